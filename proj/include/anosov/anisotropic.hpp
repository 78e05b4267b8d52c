#pragma once

// Escape functions on the codirection circle, anisotropic weights on the
// Fourier lattice, truncated weighted transfer operators and their spectra.

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <future>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "anosov/core.hpp"
#include "anosov/systems.hpp"

namespace anosov {

inline constexpr int kDirectionGrid = 10000;
inline constexpr int kMaxTruncation = 32;
inline constexpr double kEssentialModulus = 1e-8;

namespace detail {

inline double wrap_angle(double t) {
  t = std::fmod(t, kTwoPi);
  return t < 0 ? t + kTwoPi : t;
}

/// Angle between the lines through a and b, in [0, pi/2].
inline double line_distance(double a, double b) {
  double d = std::fmod(std::abs(a - b), std::numbers::pi);
  return std::min(d, std::numbers::pi - d);
}

inline Eigen::Vector2d unit(double t) { return {std::cos(t), std::sin(t)}; }

inline double raised_cosine(double d, double width) {
  return d >= width ? 0.0 : 0.5 * (1.0 + std::cos(std::numbers::pi * d / width));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Codirection dynamics: A^T on Z^2 and the induced circle map B.

struct CodirectionMap {
  IntMatrix2 matrix;            // A^T
  double multiplier = 0.0;      // signed expanding eigenvalue of A^T
  Eigen::Vector2d source;       // contracting eigenvector, repelling for B
  Eigen::Vector2d sink;         // expanding eigenvector, attracting for B
  double source_direction = 0.0;
  double sink_direction = 0.0;
  Eigen::Matrix2d to_eigen;     // v -> (a, b) with v = a source + b sink
  double expansion_constant = 0.0;

  Eigen::Vector2d apply(const Eigen::Vector2d& v) const {
    return {matrix(0, 0) * v[0] + matrix(0, 1) * v[1], matrix(1, 0) * v[0] + matrix(1, 1) * v[1]};
  }

  double B(double theta) const {
    const auto w = apply(detail::unit(theta));
    return detail::wrap_angle(std::atan2(w[1], w[0]));
  }

  /// log|b/a| / log mu^2; B shifts it by exactly one.
  double zeta(const Eigen::Vector2d& v) const {
    const Eigen::Vector2d c = to_eigen * v;
    return (std::log(std::abs(c[1])) - std::log(std::abs(c[0]))) / (2.0 * std::log(std::abs(multiplier)));
  }

  /// Unit vector along (A^T)^t v, computed in eigen coordinates so large t
  /// neither overflows nor loses the source component.
  Eigen::Vector2d shift(const Eigen::Vector2d& v, int t) const {
    const Eigen::Vector2d c = to_eigen * v;
    const double lm = std::log(std::abs(multiplier));
    const double la = std::log(std::abs(c[0])) - t * lm;
    const double lb = std::log(std::abs(c[1])) + t * lm;
    const double top = std::max(la, lb);
    const double sgn = (multiplier < 0 && (t % 2 != 0)) ? -1.0 : 1.0;
    const double a = c[0] == 0 ? 0.0 : sgn * std::copysign(std::exp(la - top), c[0]);
    const double b = c[1] == 0 ? 0.0 : sgn * std::copysign(std::exp(lb - top), c[1]);
    const Eigen::Vector2d w = a * source + b * sink;
    return w / w.norm();
  }

  double distance_to_sink(double theta) const { return detail::line_distance(theta, sink_direction); }
  double distance_to_source(double theta) const { return detail::line_distance(theta, source_direction); }
};

inline CodirectionMap codirection_map(const CatMapSystem& cat) {
  CodirectionMap c;
  c.matrix = cat.matrix.transpose();
  c.multiplier = cat.unstable_multiplier;
  const auto s = detail::eigen_direction(c.matrix, 1.0 / cat.unstable_multiplier);
  const auto u = detail::eigen_direction(c.matrix, cat.unstable_multiplier);
  c.source = {s[0], s[1]};
  c.sink = {u[0], u[1]};
  c.source_direction = detail::wrap_angle(std::atan2(s[1], s[0]));
  c.sink_direction = detail::wrap_angle(std::atan2(u[1], u[0]));
  Eigen::Matrix2d basis;
  basis << c.source, c.sink;
  c.to_eigen = basis.inverse();

  // |A^T^k xi| >= C^-1 lambda^k |xi| away from the source line.
  const double lambda = std::abs(c.multiplier);
  double worst = 1.0;
  for (int i = 0; i < 720; ++i) {
    const double t = kTwoPi * i / 720.0;
    if (c.distance_to_source(t) < 0.1) continue;
    Eigen::Vector2d v = detail::unit(t);
    for (int k = 1; k <= 20; ++k) {
      v = c.apply(v);
      worst = std::max(worst, std::pow(lambda, k) / v.norm());
    }
  }
  c.expansion_constant = worst;
  return c;
}

// ---------------------------------------------------------------------------
// Escape functions m_G and the weight W(k) = exp(s m_G(k/|k|) log<k>).

struct EscapeWeight {
  CodirectionMap codir;
  double width = 0.0;
  int averaging_window = 0;  // 0 for the conjugacy construction
  double s = 0.0;
  double sign = 1.0;
  std::function<double(const Eigen::Vector2d&)> profile;

  double m_G(const Eigen::Vector2d& v) const { return sign * profile(v); }
  double m_G(double theta) const { return m_G(detail::unit(theta)); }

  double log_weight(int k1, int k2) const {
    if (std::max(std::abs(k1), std::abs(k2)) <= 2) return 0.0;
    const double r2 = double(k1) * k1 + double(k2) * k2;
    return s * m_G(Eigen::Vector2d(k1, k2)) * 0.5 * std::log1p(r2);
  }
  double weight(int k1, int k2) const { return std::exp(log_weight(k1, k2)); }

  std::vector<double> grid_values(int n = kDirectionGrid) const {
    std::vector<double> v(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = m_G(kTwoPi * i / n);
    return v;
  }

  EscapeWeight with_s(double new_s) const {
    EscapeWeight w = *this;
    w.s = new_s;
    return w;
  }
  EscapeWeight negated() const {
    EscapeWeight w = *this;
    w.sign = -sign;
    return w;
  }
};

struct MonotonicityReport {
  int violations = 0;
  double worst_direction = 0.0;
  double worst_excess = -std::numeric_limits<double>::infinity();
};

/// Counts grid directions with m_G(B theta) > m_G(theta) + 1e-12.
inline MonotonicityReport check_monotonicity(const EscapeWeight& w, int n = kDirectionGrid) {
  MonotonicityReport r;
  for (int i = 0; i < n; ++i) {
    const double t = kTwoPi * i / n;
    const Eigen::Vector2d v = detail::unit(t);
    const double excess = w.m_G(w.codir.apply(v)) - w.m_G(v);
    if (excess > r.worst_excess) {
      r.worst_excess = excess;
      r.worst_direction = t;
    }
    if (excess > 1e-12) ++r.violations;
  }
  return r;
}

namespace detail {

struct ZetaBand {
  double lo = 0.0;  // m_G = 1 for zeta <= lo
  double hi = 0.0;  // m_G = -1 for zeta >= hi
};

inline ZetaBand neighborhood_band(const CodirectionMap& c, double width) {
  if (!(width > 0.0)) fail("InvalidWidth", "neighborhood width must be positive");
  const double sep = line_distance(c.source_direction, c.sink_direction);
  if (2.0 * width >= sep)
    fail("NeighborhoodsOverlap", "width " + std::to_string(width) + " rad against separation " + std::to_string(sep));
  ZetaBand b{-std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
  for (double sg : {-1.0, 1.0}) {
    b.lo = std::max(b.lo, c.zeta(unit(c.source_direction + sg * width)));
    b.hi = std::min(b.hi, c.zeta(unit(c.sink_direction + sg * width)));
  }
  if (!(b.lo < b.hi)) fail("NeighborhoodsOverlap", "source and sink neighborhoods meet along the dynamics");
  return b;
}

}  // namespace detail

/// m_G as a smooth decreasing function of the conjugacy coordinate zeta:
/// exactly 1 within `width` of the source line, -1 within `width` of the sink.
inline EscapeWeight conjugacy_escape_weight(const CodirectionMap& codir, double width, double s = 1.0) {
  const auto band = detail::neighborhood_band(codir, width);
  EscapeWeight w;
  w.codir = codir;
  w.width = width;
  w.s = s;
  w.profile = [codir, band](const Eigen::Vector2d& v) {
    const double z = codir.zeta(v);
    if (z <= band.lo) return 1.0;
    if (z >= band.hi) return -1.0;
    const double t = (z - band.lo) / (band.hi - band.lo);
    return std::cos(std::numbers::pi * t);
  };
  return w;
}

/// Averaged construction F = (1/T) sum_{t=T}^{2T-1} F0 o B^t, with F0 a
/// raised-cosine bump near the source minus one near the sink. The bumps are
/// centred 0.3 width off the eigenlines, so F0 alone is not monotone.
inline EscapeWeight build_escape_m_G(const CodirectionMap& codir, double width, int T) {
  if (T < 1) fail("InvalidWindow", "averaging window must be >= 1");
  detail::neighborhood_band(codir, width);
  const double src = codir.source_direction + 0.3 * width;
  const double snk = codir.sink_direction + 0.3 * width;
  EscapeWeight w;
  w.codir = codir;
  w.width = width;
  w.averaging_window = T;
  w.s = 1.0;
  w.profile = [codir, width, T, src, snk](const Eigen::Vector2d& v) {
    CompensatedSum<double> acc;
    for (int t = T; t < 2 * T; ++t) {
      const Eigen::Vector2d u = codir.shift(v, t);
      const double th = std::atan2(u[1], u[0]);
      acc += detail::raised_cosine(detail::line_distance(th, src), width) -
             detail::raised_cosine(detail::line_distance(th, snk), width);
    }
    return acc.value() / T;
  };
  const auto mono = check_monotonicity(w);
  if (mono.violations > 0)
    fail("MonotonicityFailed", std::to_string(mono.violations) + " directions, worst at theta = " +
                                   std::to_string(mono.worst_direction) + " (excess " +
                                   std::to_string(mono.worst_excess) + ")");
  return w;
}

// ---------------------------------------------------------------------------
// f1(xi) = sum_{t < T1} |(A^T)^{-t} xi|

struct EscapeF1 {
  CodirectionMap codir;
  int T1 = 0;
  double cone_half_angle = 0.0;
  double decay_c = 0.0;  // f1(A^T xi) <= (1 - c) f1(xi) on the cone
  double norm_c = 0.0;   // c |xi| <= f1(xi) <= |xi| / c

  double operator()(const Eigen::Vector2d& xi) const {
    const IntMatrix2& m = codir.matrix;
    // det = 1, so the inverse is integral.
    const double i00 = double(m(1, 1)), i01 = -double(m(0, 1)), i10 = -double(m(1, 0)), i11 = double(m(0, 0));
    double x = xi[0], y = xi[1], f = 0.0;
    for (int t = 0; t < T1; ++t) {
      f += std::sqrt(x * x + y * y);
      const double nx = i00 * x + i01 * y, ny = i10 * x + i11 * y;
      x = nx;
      y = ny;
    }
    return f;
  }

  bool in_cone(double theta) const { return codir.distance_to_source(theta) <= cone_half_angle; }
};

inline EscapeF1 build_escape_f1(const CodirectionMap& codir, double cone_half_angle, int T1) {
  if (T1 < 1) fail("EmptySum", "T1 must be >= 1");
  EscapeF1 f{codir, T1, cone_half_angle};
  double worst = 0.0;
  const int samples = 2001;
  for (double base : {codir.source_direction, codir.source_direction + std::numbers::pi})
    for (int i = 0; i < samples; ++i) {
      const double t = base - cone_half_angle + 2.0 * cone_half_angle * i / (samples - 1);
      const Eigen::Vector2d v = detail::unit(t);
      worst = std::max(worst, f(codir.apply(v)) / f(v));
    }
  f.decay_c = 1.0 - worst;
  if (f.decay_c <= 0.0)
    fail("ConeNotExpanding", "decay ratio " + std::to_string(worst) + " >= 1 on the cone");
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (int i = 0; i < kDirectionGrid; ++i) {
    const double v = f(detail::unit(kTwoPi * i / kDirectionGrid));
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  f.norm_c = std::min(lo, 1.0 / hi);
  return f;
}

// ---------------------------------------------------------------------------
// Truncated weighted operators M_{k,m} = W(k) U_{k,m} / W(m), U the Koopman
// operator in the Fourier basis: U e_m = e_m o T.

using SparseOperator = Eigen::SparseMatrix<Complex, Eigen::ColMajor>;

struct WeightedTransferOperator {
  int K = 0;
  bool linear = true;
  double s = 0.0;
  SparseOperator matrix;

  int side() const { return 2 * K + 1; }
  int size() const { return side() * side(); }
  int index(int k1, int k2) const { return (k1 + K) * side() + (k2 + K); }
  std::array<int, 2> point(int i) const { return {i / side() - K, i % side() - K}; }
  bool contains(std::int64_t k1, std::int64_t k2) const {
    return std::max(std::abs(k1), std::abs(k2)) <= K;
  }
};

namespace detail {

/// Lattice spread of the Fourier coefficients of exp(2 pi i m.p(x)) beyond
/// which they fall below 1e-17.
inline int coefficient_bandwidth(const PerturbedCatSystem& sys, std::array<int, 2> m) {
  int b = 0;
  for (int c = 0; c < 2; ++c)
    for (const auto& t : c == 0 ? sys.dx1 : sys.dx2) {
      const double z = kTwoPi * std::abs(m[static_cast<std::size_t>(c)] * t.amplitude);
      if (z == 0.0) continue;
      const int n = static_cast<int>(std::ceil(z + 8.0 * std::cbrt(z) + 20.0));
      b += n * std::max(std::abs(t.k1), std::abs(t.k2));
    }
  return b;
}

/// Per-size FFT workspace with the displacement sampled on the grid.
struct KoopmanQuadrature {
  int Q = 0;
  std::vector<double> p1, p2;
  fftw_complex* buf = nullptr;
  fftw_plan plan = nullptr;

  KoopmanQuadrature(const PerturbedCatSystem& sys, int q) : Q(q) {
    const std::size_t n = static_cast<std::size_t>(q) * q;
    p1.resize(n);
    p2.resize(n);
    for (int a = 0; a < q; ++a)
      for (int b = 0; b < q; ++b) {
        const auto d = sys.displacement({double(a) / q, double(b) / q});
        p1[static_cast<std::size_t>(a) * q + b] = d[0];
        p2[static_cast<std::size_t>(a) * q + b] = d[1];
      }
    buf = fftw_alloc_complex(n);
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    plan = fftw_plan_dft_2d(q, q, buf, buf, FFTW_FORWARD, FFTW_ESTIMATE);
  }
  KoopmanQuadrature(const KoopmanQuadrature&) = delete;
  KoopmanQuadrature& operator=(const KoopmanQuadrature&) = delete;
  ~KoopmanQuadrature() {
    {
      std::lock_guard<std::mutex> lock(fftw_planner_mutex());
      fftw_destroy_plan(plan);
    }
    fftw_free(buf);
  }

  /// Fourier coefficients of exp(2 pi i m.p(x)); read with coefficient().
  void transform(std::array<int, 2> m) {
    const std::size_t n = static_cast<std::size_t>(Q) * Q;
    for (std::size_t i = 0; i < n; ++i) {
      const double ph = kTwoPi * (m[0] * p1[i] + m[1] * p2[i]);
      buf[i][0] = std::cos(ph);
      buf[i][1] = std::sin(ph);
    }
    fftw_execute(plan);
  }

  Complex coefficient(std::int64_t j1, std::int64_t j2) const {
    const auto a = static_cast<std::size_t>(mod_floor(j1, Q)), b = static_cast<std::size_t>(mod_floor(j2, Q));
    const auto& c = buf[a * static_cast<std::size_t>(Q) + b];
    const double scale = 1.0 / (double(Q) * Q);
    return {c[0] * scale, c[1] * scale};
  }
};

inline int next_pow2(int n) {
  int q = 1;
  while (q < n) q *= 2;
  return q;
}

}  // namespace detail

inline WeightedTransferOperator assemble_operator(const PerturbedCatSystem& sys, const EscapeWeight& weight, int K) {
  if (K < 4) fail("TruncationTooSmall", "K = " + std::to_string(K) + " < 4");
  if (K > kMaxTruncation) fail("MatrixTooLarge", "K = " + std::to_string(K) + " > " + std::to_string(kMaxTruncation));
  if (sys.max_displacement() > 0.1)
    fail("PerturbationTooLarge", "perturbation size " + std::to_string(sys.max_displacement()) + " > 0.1");

  WeightedTransferOperator op;
  op.K = K;
  op.linear = sys.is_linear();
  op.s = weight.s;
  const int n = op.size();
  std::vector<double> lw(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const auto p = op.point(i);
    lw[static_cast<std::size_t>(i)] = weight.log_weight(p[0], p[1]);
  }
  const IntMatrix2 at = sys.base.matrix.transpose();
  std::vector<Eigen::Triplet<Complex>> entries;

  if (op.linear) {
    for (int i = 0; i < n; ++i) {
      const auto m = op.point(i);
      const auto k = at.apply({m[0], m[1]});
      if (!op.contains(k[0], k[1])) continue;
      const int r = op.index(static_cast<int>(k[0]), static_cast<int>(k[1]));
      entries.emplace_back(r, i, std::exp(lw[static_cast<std::size_t>(r)] - lw[static_cast<std::size_t>(i)]));
    }
  } else {
    std::map<int, std::unique_ptr<detail::KoopmanQuadrature>> quads;
    for (int i = 0; i < n; ++i) {
      const auto m = op.point(i);
      if (m[0] == 0 && m[1] == 0) {
        entries.emplace_back(i, i, 1.0);
        continue;
      }
      const auto am = at.apply({m[0], m[1]});
      const int J = K + static_cast<int>(std::max(std::abs(am[0]), std::abs(am[1])));
      const int B = detail::coefficient_bandwidth(sys, m);
      const int Q = detail::next_pow2(std::max(2 * J + 1, J + B + 1));
      auto& quad = quads[Q];
      if (!quad) quad = std::make_unique<detail::KoopmanQuadrature>(sys, Q);
      quad->transform(m);
      for (int r = 0; r < n; ++r) {
        const auto k = op.point(r);
        const Complex u = quad->coefficient(k[0] - am[0], k[1] - am[1]);
        if (std::abs(u) <= 1e-15) continue;
        entries.emplace_back(r, i, u * std::exp(lw[static_cast<std::size_t>(r)] - lw[static_cast<std::size_t>(i)]));
      }
    }
  }
  op.matrix.resize(n, n);
  op.matrix.setFromTriplets(entries.begin(), entries.end());
  op.matrix.makeCompressed();
  return op;
}

// ---------------------------------------------------------------------------
// Spectra

enum class SpectrumMethod { Auto, Monomial, Dense, Arnoldi };

struct Spectrum {
  std::vector<Complex> eigenvalues;  // |z| >= max(r, 1e-8), modulus descending then argument
  int essential_count = -1;          // eigenvalues below 1e-8; -1 when not resolved
  double max_essential_modulus = std::numeric_limits<double>::quiet_NaN();
  std::string method;
  double max_residual = 0.0;
};

inline constexpr int kDenseSpectrumLimit = 625;

namespace detail {

/// Argument in (-pi, pi] with numerically real values pinned to 0 or pi.
inline double stable_arg(Complex z) {
  if (std::abs(z.imag()) <= 1e-12 * std::abs(z)) return z.real() < 0 ? std::numbers::pi : 0.0;
  return std::arg(z);
}

inline void sort_spectrum(std::vector<Complex>& z) {
  std::sort(z.begin(), z.end(), [](Complex a, Complex b) {
    const double ma = std::abs(a), mb = std::abs(b);
    if (std::abs(ma - mb) > 1e-9 * std::max(ma, mb)) return ma > mb;
    return stable_arg(a) < stable_arg(b);
  });
}

inline Spectrum finish_spectrum(const std::vector<Complex>& all, double r, std::string method, bool complete) {
  Spectrum s;
  s.method = std::move(method);
  const double floor = std::max(r, kEssentialModulus);
  int ess = 0;
  double ess_max = 0.0;
  for (const Complex z : all) {
    const double a = std::abs(z);
    if (a >= floor) s.eigenvalues.push_back(z);
    if (a < kEssentialModulus) {
      ++ess;
      ess_max = std::max(ess_max, a);
    }
  }
  if (complete) {
    s.essential_count = ess;
    s.max_essential_modulus = ess_max;
  }
  sort_spectrum(s.eigenvalues);
  return s;
}

/// Exact spectrum of a matrix with at most one nonzero per column: cycles of
/// the column-to-row map carry roots of their weight products, chains are
/// nilpotent.
inline Spectrum monomial_spectrum(const SparseOperator& a, double r) {
  const int n = static_cast<int>(a.cols());
  std::vector<int> next(static_cast<std::size_t>(n), -1);
  std::vector<Complex> val(static_cast<std::size_t>(n), 0.0);
  for (int c = 0; c < n; ++c) {
    int count = 0;
    for (SparseOperator::InnerIterator it(a, c); it; ++it) {
      if (it.value() == Complex(0.0)) continue;
      ++count;
      next[static_cast<std::size_t>(c)] = static_cast<int>(it.row());
      val[static_cast<std::size_t>(c)] = it.value();
    }
    if (count > 1) fail("NotMonomial", "column " + std::to_string(c) + " has " + std::to_string(count) + " entries");
  }
  std::vector<int> state(static_cast<std::size_t>(n), 0);  // 0 new, 1 on path, 2 done
  std::vector<Complex> all;
  for (int start = 0; start < n; ++start) {
    std::vector<int> path;
    int v = start;
    while (v >= 0 && state[static_cast<std::size_t>(v)] == 0) {
      state[static_cast<std::size_t>(v)] = 1;
      path.push_back(v);
      v = next[static_cast<std::size_t>(v)];
    }
    if (v >= 0 && state[static_cast<std::size_t>(v)] == 1) {
      const auto it = std::find(path.begin(), path.end(), v);
      const int len = static_cast<int>(path.end() - it);
      Complex prod = 1.0;
      for (auto p = it; p != path.end(); ++p) prod *= val[static_cast<std::size_t>(*p)];
      const double mod = std::pow(std::abs(prod), 1.0 / len);
      const double ph = std::arg(prod) / len;
      for (int j = 0; j < len; ++j) all.push_back(std::polar(mod, ph + kTwoPi * j / len));
    }
    for (int p : path) state[static_cast<std::size_t>(p)] = 2;
  }
  all.resize(static_cast<std::size_t>(n), Complex(0.0));
  return finish_spectrum(all, r, "monomial", true);
}

inline Spectrum dense_spectrum(const SparseOperator& a, double r) {
  const Eigen::MatrixXcd d = Eigen::MatrixXcd(a);
  std::vector<Complex> all;
  if (d.imag().cwiseAbs().maxCoeff() == 0.0) {
    Eigen::EigenSolver<Eigen::MatrixXd> es(d.real(), false);
    if (es.info() != Eigen::Success) violate("EigensolverFailed", "real QR iteration did not converge");
    all.assign(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
  } else {
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(d, false);
    if (es.info() != Eigen::Success) violate("EigensolverFailed", "complex QR iteration did not converge");
    all.assign(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
  }
  return finish_spectrum(all, r, "dense", true);
}

/// Eigenvalues with |z| >= r from an unrestarted Arnoldi factorization,
/// grown until every such Ritz value has residual <= tol |z|.
inline Spectrum arnoldi_spectrum(const SparseOperator& a, double r, double tol = 1e-11) {
  const int n = static_cast<int>(a.rows());
  const double floor = std::max(r, kEssentialModulus);
  Eigen::VectorXcd v0(n);
  for (int i = 0; i < n; ++i) v0[i] = Complex(1.0 + 0.5 * std::sin(1.0 + i), std::cos(0.5 + 2.0 * i));
  v0.normalize();

  double last_residual = 0.0;
  for (int dim : {120, 240, 480, 960}) {
    const int m = std::min(dim, n);
    Eigen::MatrixXcd V(n, m + 1);
    Eigen::MatrixXcd H = Eigen::MatrixXcd::Zero(m + 1, m);
    V.col(0) = v0;
    int used = m;
    bool invariant = false;
    for (int j = 0; j < m; ++j) {
      Eigen::VectorXcd w = a * V.col(j);
      const double wn = w.norm();
      for (int pass = 0; pass < 2; ++pass)
        for (int i = 0; i <= j; ++i) {
          const Complex h = V.col(i).dot(w);
          H(i, j) += h;
          w -= h * V.col(i);
        }
      const double beta = w.norm();
      H(j + 1, j) = beta;
      if (beta <= 1e-14 * std::max(1.0, wn)) {
        used = j + 1;
        invariant = true;
        break;
      }
      V.col(j + 1) = w / beta;
    }
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(H.topLeftCorner(used, used), true);
    if (es.info() != Eigen::Success) violate("EigensolverFailed", "Hessenberg eigenproblem did not converge");
    const double beta = invariant ? 0.0 : std::abs(H(used, used - 1));
    std::vector<Complex> found;
    double worst = 0.0;
    bool ok = true;
    for (int i = 0; i < used; ++i) {
      const Complex z = es.eigenvalues()[i];
      if (std::abs(z) < floor) continue;
      const Eigen::VectorXcd y = es.eigenvectors().col(i);
      const double res = beta * std::abs(y[used - 1]) / y.norm();
      worst = std::max(worst, res);
      if (res > tol * std::abs(z)) ok = false;
      found.push_back(z);
    }
    last_residual = worst;
    if (ok || used == n) {
      auto s = finish_spectrum(found, r, "arnoldi", used == n);
      s.max_residual = worst;
      return s;
    }
  }
  violate("ArnoldiNotConverged", "Ritz residual " + std::to_string(last_residual) + " after 960 steps");
}

}  // namespace detail

inline Spectrum spectrum(const WeightedTransferOperator& op, double r, SpectrumMethod method = SpectrumMethod::Auto) {
  if (!(r >= 0.0)) fail("InvalidRadius", "radius must be >= 0");
  if (op.K > kMaxTruncation) fail("MatrixTooLarge", "K = " + std::to_string(op.K));
  if (method == SpectrumMethod::Auto)
    method = op.linear ? SpectrumMethod::Monomial
                       : (op.size() <= kDenseSpectrumLimit ? SpectrumMethod::Dense : SpectrumMethod::Arnoldi);
  switch (method) {
    case SpectrumMethod::Monomial:
      return detail::monomial_spectrum(op.matrix, r);
    case SpectrumMethod::Dense:
      return detail::dense_spectrum(op.matrix, r);
    default:
      return detail::arnoldi_spectrum(op.matrix, r);
  }
}

// ---------------------------------------------------------------------------
// Truncation stability across K

struct StabilityReport {
  std::vector<int> Ks;
  std::vector<Spectrum> spectra;
  std::vector<double> movement;  // between consecutive truncations
  double max_movement = 0.0;
};

namespace detail {

/// Hausdorff distance between the parts of a and b with modulus >= r; the
/// partner set is searched down to 0.8 r so eigenvalues near the circle do
/// not register as vanishing.
inline double spectral_movement(const std::vector<Complex>& a, const std::vector<Complex>& b, double r) {
  double d = 0.0;
  for (int pass = 0; pass < 2; ++pass) {
    const auto& x = pass == 0 ? a : b;
    const auto& y = pass == 0 ? b : a;
    for (const Complex z : x) {
      if (std::abs(z) < r) continue;
      double best = std::numeric_limits<double>::infinity();
      for (const Complex w : y) best = std::min(best, std::abs(z - w));
      d = std::max(d, best);
    }
  }
  return d;
}

}  // namespace detail

inline StabilityReport truncation_stability(const PerturbedCatSystem& sys, const EscapeWeight& weight,
                                            std::vector<int> Ks, double r) {
  if (Ks.empty()) fail("InvalidTruncation", "no truncations given");
  std::sort(Ks.begin(), Ks.end());
  StabilityReport rep;
  rep.Ks = Ks;
  std::vector<std::future<Spectrum>> jobs;
  for (int K : Ks)
    jobs.push_back(std::async(std::launch::async, [&sys, &weight, K, r] {
      return spectrum(assemble_operator(sys, weight, K), 0.8 * r);
    }));
  for (auto& j : jobs) rep.spectra.push_back(j.get());
  for (std::size_t i = 1; i < rep.spectra.size(); ++i) {
    const double d = detail::spectral_movement(rep.spectra[i - 1].eigenvalues, rep.spectra[i].eigenvalues, r);
    rep.movement.push_back(d);
    rep.max_movement = std::max(rep.max_movement, d);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Sign convention probe: the largest weight ratio W(m_j)/W(m_i), i < j, along
// lattice orbits m_{i+1} = A^T m_i inside the truncation box.

inline double max_orbit_product(const EscapeWeight& w, int K) {
  const IntMatrix2& at = w.codir.matrix;
  double best = 0.0;
  for (int a = -K; a <= K; ++a)
    for (int b = -K; b <= K; ++b) {
      if (a == 0 && b == 0) continue;
      std::array<std::int64_t, 2> m{a, b};
      double low = w.log_weight(a, b);
      while (true) {
        m = at.apply(m);
        if (std::max(std::abs(m[0]), std::abs(m[1])) > K) break;
        const double l = w.log_weight(static_cast<int>(m[0]), static_cast<int>(m[1]));
        best = std::max(best, l - low);
        low = std::min(low, l);
      }
    }
  return std::exp(best);
}

struct SignProbeReport {
  double s = 0.0;
  std::vector<int> Ks;
  std::vector<double> correct;  // max orbit product per K
  std::vector<double> flipped;
  double correct_max = 1.0;
  double flipped_exponent = 0.0;  // fitted d log(product) / d log K
};

inline SignProbeReport sign_convention_probe(const EscapeWeight& weight, int K) {
  if (K < 4) fail("TruncationTooSmall", "K = " + std::to_string(K) + " < 4");
  SignProbeReport rep;
  rep.s = weight.s;
  for (int k : {8, 12, 16, 24, 32, 48, 64})
    if (k < K) rep.Ks.push_back(k);
  rep.Ks.push_back(K);
  const EscapeWeight flipped = weight.negated();
  std::vector<double> lk, lp;
  for (int k : rep.Ks) {
    rep.correct.push_back(max_orbit_product(weight, k));
    rep.flipped.push_back(max_orbit_product(flipped, k));
    rep.correct_max = std::max(rep.correct_max, rep.correct.back());
    lk.push_back(std::log(double(k)));
    lp.push_back(std::log(rep.flipped.back()));
  }
  if (rep.Ks.size() >= 2) rep.flipped_exponent = least_squares(lk, lp).slope;
  return rep;
}

inline SignProbeReport sign_convention_probe(const CatMapSystem& cat, double s, int K, double width = 0.15) {
  return sign_convention_probe(conjugacy_escape_weight(codirection_map(cat), width, s), K);
}

}  // namespace anosov

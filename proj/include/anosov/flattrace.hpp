#pragma once

// Mollified traces tr(E_eps B E_eps) of grid Koopman operators on (Z/N)^2,
// and the orbit-sum side of the trace formula on functions and k-forms.

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <string>
#include <vector>

#include "anosov/core.hpp"
#include "anosov/orbits.hpp"
#include "anosov/poincare.hpp"
#include "anosov/zeta.hpp"

namespace anosov {

// ---------------------------------------------------------------------------
// Grid operators

/// An operator on functions on (Z/N)^2, indexed by y = y1 * N + y2.
/// Permutation kind: (B f)(y) = f(M y mod N) for an integer matrix M.
struct GridOperator {
  enum class Kind { Permutation, Dense };
  Kind kind = Kind::Permutation;
  int grid_size = 0;
  IntMatrix2 action;          // permutation kind
  Eigen::MatrixXd dense;      // dense kind, N^2 x N^2
  int form_degree = 0;

  std::int64_t points() const { return static_cast<std::int64_t>(grid_size) * grid_size; }

  std::int64_t image(std::int64_t y) const {
    const std::int64_t n = grid_size;
    const auto v = action.apply_mod({y / n, y % n}, n);
    return v[0] * n + v[1];
  }
};

inline constexpr int kMaxDenseGrid = 32;

/// Koopman operator of A^n on the N-grid; A^n mod N is a bijection since det A = 1.
inline GridOperator koopman_operator(const CatMapSystem& cat, int n, int grid_size) {
  if (grid_size < 2) fail("InvalidArgument", "grid size must be >= 2");
  if (n < 0) fail("InvalidArgument", "iterate must be >= 0");
  // Reduce as we go so large n never overflows.
  IntMatrix2 m = IntMatrix2::identity();
  for (int k = 0; k < n; ++k) {
    m = m * cat.matrix;
    for (auto& e : m.e) e = mod_floor(e, grid_size);
  }
  GridOperator op;
  op.grid_size = grid_size;
  op.action = m;
  return op;
}

inline GridOperator identity_operator(int grid_size) {
  GridOperator op;
  op.grid_size = grid_size;
  return op;
}

inline GridOperator dense_operator(Eigen::MatrixXd matrix, int grid_size) {
  if (grid_size > kMaxDenseGrid) fail("MatrixTooLarge", "dense grid operators support N <= 32");
  const auto pts = static_cast<Eigen::Index>(grid_size) * grid_size;
  if (matrix.rows() != pts || matrix.cols() != pts) fail("InvalidArgument", "dense operator has wrong shape");
  GridOperator op;
  op.kind = GridOperator::Kind::Dense;
  op.grid_size = grid_size;
  op.dense = std::move(matrix);
  return op;
}

/// Koopman operator of a perturbed cat map on the grid, with bilinear
/// interpolation at the non-grid image points (row-stochastic).
inline GridOperator perturbed_grid_operator(const PerturbedCatSystem& sys, int grid_size) {
  const int n = grid_size;
  const auto pts = static_cast<Eigen::Index>(n) * n;
  if (n > kMaxDenseGrid) fail("MatrixTooLarge", "dense grid operators support N <= 32");
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(pts, pts);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const Vec2 x{static_cast<double>(i) / n, static_cast<double>(j) / n};
      Vec2 y = sys.base.map(x);
      const Vec2 d = sys.displacement(x);
      y = {wrap_unit(y[0] + d[0]), wrap_unit(y[1] + d[1])};
      const double u = y[0] * n, v = y[1] * n;
      const int u0 = static_cast<int>(std::floor(u)), v0 = static_cast<int>(std::floor(v));
      const double fu = u - u0, fv = v - v0;
      const auto row = static_cast<Eigen::Index>(i) * n + j;
      auto at = [&](int a, int b) { return static_cast<Eigen::Index>(mod_floor(a, n)) * n + mod_floor(b, n); };
      m(row, at(u0, v0)) += (1 - fu) * (1 - fv);
      m(row, at(u0 + 1, v0)) += fu * (1 - fv);
      m(row, at(u0, v0 + 1)) += (1 - fu) * fv;
      m(row, at(u0 + 1, v0 + 1)) += fu * fv;
    }
  return dense_operator(std::move(m), n);
}

// ---------------------------------------------------------------------------
// Mollifiers

/// C^2 profile: 1 on [0, 1/2], quintic smoothstep down to 0 at 1.
inline double mollifier_profile(double s) {
  s = std::abs(s);
  if (s <= 0.5) return 1.0;
  if (s >= 1.0) return 0.0;
  const double u = 2.0 * s - 1.0;
  return 1.0 - u * u * u * (10.0 - 15.0 * u + 6.0 * u * u);
}

/// Signed representative of a residue in (-N/2, N/2].
inline int signed_residue(std::int64_t r, int n) {
  const auto m = static_cast<int>(mod_floor(r, n));
  return m > n / 2 ? m - n : m;
}

struct MollifierTap {
  int d1 = 0;
  int d2 = 0;
  double weight = 0.0;
};

/// E_eps on the N-grid with kernel psi(d(x, y)/eps)/F, d the max-metric with
/// wraparound. The grid is homogeneous, so F is the same for every row.
struct Mollifier {
  double eps = 0.0;
  int grid_size = 0;
  int radius = 0;                 // taps satisfy |d|_inf <= radius grid steps
  double normalization = 0.0;     // F in grid units (sum of psi over a row)
  std::vector<MollifierTap> taps;

  /// Kernel entry E(x, y) for grid indices, evaluated from the profile.
  double entry(std::int64_t x, std::int64_t y) const {
    const std::int64_t n = grid_size;
    const int a = signed_residue(x / n - y / n, grid_size), b = signed_residue(x % n - y % n, grid_size);
    const double d = std::max(std::abs(a), std::abs(b)) / static_cast<double>(grid_size);
    return mollifier_profile(d / eps) / normalization;
  }

  /// (E f)(x) = sum_y E(x, y) f(y), as a circular convolution via FFT.
  std::vector<double> apply(const std::vector<double>& f) const;
};

inline Mollifier build_mollifier(int grid_size, double eps) {
  if (grid_size < 2) fail("InvalidArgument", "grid size must be >= 2");
  if (!(eps >= 2.0 / grid_size))
    fail("EpsilonBelowGrid", "eps = " + std::to_string(eps) + " is below 2/N = " + std::to_string(2.0 / grid_size));
  Mollifier m;
  m.eps = eps;
  m.grid_size = grid_size;
  const int lo = -((grid_size - 1) / 2), hi = grid_size / 2;
  m.radius = static_cast<int>(std::min<double>(std::floor(eps * grid_size), hi));
  CompensatedSum<double> total;
  for (int a = std::max(lo, -m.radius); a <= std::min(hi, m.radius); ++a)
    for (int b = std::max(lo, -m.radius); b <= std::min(hi, m.radius); ++b) {
      const double d = std::max(std::abs(a), std::abs(b)) / static_cast<double>(grid_size);
      const double w = mollifier_profile(d / eps);
      if (w == 0.0) continue;
      m.taps.push_back({a, b, w});
      total += w;
    }
  m.normalization = total.value();
  for (auto& t : m.taps) t.weight /= m.normalization;
  return m;
}

// ---------------------------------------------------------------------------
// Mollified traces

namespace detail {

/// Autocorrelation K = e * e of the mollifier taps on a square of side P
/// (circular). Returns K indexed by residues mod P.
inline std::vector<double> tap_autoconvolution(const Mollifier& m, int side) {
  const auto total = static_cast<std::size_t>(side) * static_cast<std::size_t>(side);
  fftw_complex* buf = fftw_alloc_complex(total);
  fftw_plan fwd, bwd;
  {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    fwd = fftw_plan_dft_2d(side, side, buf, buf, FFTW_FORWARD, FFTW_ESTIMATE);
    bwd = fftw_plan_dft_2d(side, side, buf, buf, FFTW_BACKWARD, FFTW_ESTIMATE);
  }
  for (std::size_t i = 0; i < total; ++i) buf[i][0] = buf[i][1] = 0.0;
  for (const auto& t : m.taps) {
    const auto idx = static_cast<std::size_t>(mod_floor(t.d1, side) * side + mod_floor(t.d2, side));
    buf[idx][0] += t.weight;
  }
  fftw_execute(fwd);
  for (std::size_t i = 0; i < total; ++i) {
    const double re = buf[i][0], im = buf[i][1];
    buf[i][0] = re * re - im * im;
    buf[i][1] = 2.0 * re * im;
  }
  fftw_execute(bwd);
  std::vector<double> k(total);
  for (std::size_t i = 0; i < total; ++i) k[i] = buf[i][0] / static_cast<double>(total);
  {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    fftw_destroy_plan(fwd);
    fftw_destroy_plan(bwd);
  }
  fftw_free(buf);
  return k;
}

}  // namespace detail

inline std::vector<double> Mollifier::apply(const std::vector<double>& f) const {
  const int n = grid_size;
  const auto total = static_cast<std::size_t>(n) * static_cast<std::size_t>(n);
  if (f.size() != total) fail("InvalidArgument", "function size does not match the grid");
  fftw_complex* kern = fftw_alloc_complex(total);
  fftw_complex* data = fftw_alloc_complex(total);
  fftw_plan pk, pf, pb;
  {
    std::lock_guard<std::mutex> lock(detail::fftw_planner_mutex());
    pk = fftw_plan_dft_2d(n, n, kern, kern, FFTW_FORWARD, FFTW_ESTIMATE);
    pf = fftw_plan_dft_2d(n, n, data, data, FFTW_FORWARD, FFTW_ESTIMATE);
    pb = fftw_plan_dft_2d(n, n, data, data, FFTW_BACKWARD, FFTW_ESTIMATE);
  }
  for (std::size_t i = 0; i < total; ++i) {
    kern[i][0] = kern[i][1] = 0.0;
    data[i][0] = f[i];
    data[i][1] = 0.0;
  }
  // (E f)(x) = sum_d w(d) f(x + d) is a correlation; store w at -d.
  for (const auto& t : taps) {
    const auto idx = static_cast<std::size_t>(mod_floor(-t.d1, n) * n + mod_floor(-t.d2, n));
    kern[idx][0] += t.weight;
  }
  fftw_execute(pk);
  fftw_execute(pf);
  for (std::size_t i = 0; i < total; ++i) {
    const double re = data[i][0] * kern[i][0] - data[i][1] * kern[i][1];
    const double im = data[i][0] * kern[i][1] + data[i][1] * kern[i][0];
    data[i][0] = re;
    data[i][1] = im;
  }
  fftw_execute(pb);
  std::vector<double> out(total);
  for (std::size_t i = 0; i < total; ++i) out[i] = data[i][0] / static_cast<double>(total);
  {
    std::lock_guard<std::mutex> lock(detail::fftw_planner_mutex());
    fftw_destroy_plan(pk);
    fftw_destroy_plan(pf);
    fftw_destroy_plan(pb);
  }
  fftw_free(kern);
  fftw_free(data);
  return out;
}

/// tr(E B E) for a permutation operator: sum_{x,y} E(x,y) E(M y, x) collapses
/// to sum_y K((I - M) y) with K = e * e, supported within 2 eps of 0.
inline double permutation_mollified_trace(const GridOperator& op, const Mollifier& m) {
  const int n = op.grid_size;
  if (m.grid_size != n) fail("InvalidArgument", "mollifier grid does not match operator grid");
  const int reach = 2 * m.radius;
  const bool linear = 2 * reach + 1 < n;
  int side = n;
  if (linear) {
    side = 1;
    while (side < 2 * reach + 1) side *= 2;
  }
  const std::vector<double> k = detail::tap_autoconvolution(m, side);
  const IntMatrix2 diff = IntMatrix2::identity() - op.action;
  CompensatedSum<double> acc;
  for (std::int64_t y1 = 0; y1 < n; ++y1) {
    double row = 0.0;
    for (std::int64_t y2 = 0; y2 < n; ++y2) {
      const auto v = diff.apply_mod({y1, y2}, n);
      const int a = signed_residue(v[0], n), b = signed_residue(v[1], n);
      if (linear) {
        if (std::abs(a) > reach || std::abs(b) > reach) continue;
        row += k[static_cast<std::size_t>(mod_floor(a, side) * side + mod_floor(b, side))];
      } else {
        row += k[static_cast<std::size_t>(v[0] * n + v[1])];
      }
    }
    acc += row;
  }
  return acc.value();
}

/// Reference path: sum over all grid pairs of E(x,y) (B E)(y,x), with every
/// kernel entry evaluated from the profile and no support shortcuts.
inline double dense_mollified_trace(const GridOperator& op, const Mollifier& m) {
  const std::int64_t pts = op.points();
  if (op.kind == GridOperator::Kind::Permutation) {
    CompensatedSum<double> acc;
    for (std::int64_t x = 0; x < pts; ++x)
      for (std::int64_t y = 0; y < pts; ++y) acc += m.entry(x, y) * m.entry(op.image(y), x);
    return acc.value();
  }
  if (op.grid_size > kMaxDenseGrid) fail("MatrixTooLarge", "dense trace supports N <= 32");
  Eigen::MatrixXd e(pts, pts);
  for (std::int64_t x = 0; x < pts; ++x)
    for (std::int64_t y = 0; y < pts; ++y) e(x, y) = m.entry(x, y);
  return (e * op.dense * e).trace();
}

inline double mollified_trace(const GridOperator& op, const Mollifier& m) {
  return op.kind == GridOperator::Kind::Permutation ? permutation_mollified_trace(op, m) : dense_mollified_trace(op, m);
}

struct FlatTraceResult {
  std::vector<std::pair<double, Complex>> values;  // (eps, tr E B E)
  Complex extrapolated;
  double epsilon_exponent = 0.0;  // slope of log|tr| against log eps
  double fitted_order = 0.0;      // Richardson order from successive differences (0 when not contracting)
  bool divergence_flag = false;
};

/// Richardson extrapolation in eps from values at successively halved eps.
/// The order p comes from the ratio of successive differences; when the
/// differences do not contract the finest value is returned with order 0.
inline std::pair<Complex, double> extrapolate_in_eps(const std::vector<Complex>& v) {
  if (v.empty()) return {0.0, 0.0};
  if (v.size() < 3) return {v.back(), 0.0};
  const std::size_t k = v.size();
  const Complex d1 = v[k - 2] - v[k - 3], d2 = v[k - 1] - v[k - 2];
  const double scale = std::max(1.0, std::abs(v.back()));
  if (std::abs(d2) <= 1e-14 * scale) return {v.back(), std::abs(d1) <= 1e-14 * scale ? 0.0 : 64.0};
  const Complex r = d1 / d2;
  if (!(std::abs(r) > 1.5)) return {v.back(), 0.0};
  return {v.back() + d2 / (r - 1.0), std::log2(std::abs(r))};
}

inline void check_eps_list(const std::vector<double>& eps_list, int grid_size) {
  if (eps_list.empty()) fail("InvalidArgument", "empty eps list");
  for (std::size_t i = 0; i < eps_list.size(); ++i) {
    if (!(eps_list[i] >= 2.0 / grid_size))
      fail("EpsilonBelowGrid", "eps = " + std::to_string(eps_list[i]) + " is below 2/N");
    if (i > 0 && !(eps_list[i] < eps_list[i - 1])) fail("InvalidArgument", "eps list must be decreasing");
  }
}

inline FlatTraceResult flat_trace(const GridOperator& op, const std::vector<double>& eps_list) {
  check_eps_list(eps_list, op.grid_size);
  FlatTraceResult res;
  std::vector<Complex> vals;
  std::vector<double> xs, ys;
  for (double eps : eps_list) {
    const double v = mollified_trace(op, build_mollifier(op.grid_size, eps));
    res.values.emplace_back(eps, v);
    vals.emplace_back(v);
    xs.push_back(std::log(eps));
    ys.push_back(std::log(std::max(std::abs(v), 1e-300)));
  }
  std::tie(res.extrapolated, res.fitted_order) = extrapolate_in_eps(vals);
  if (xs.size() >= 2) {
    res.epsilon_exponent = least_squares(xs, ys).slope;
    res.divergence_flag = res.epsilon_exponent <= -1.0;
  }
  return res;
}

inline FlatTraceResult flat_trace(const CatMapSystem& cat, int n, int grid_size, const std::vector<double>& eps_list) {
  return flat_trace(koopman_operator(cat, n, grid_size), eps_list);
}

// ---------------------------------------------------------------------------
// k-forms

/// Trace of the k-th exterior power of an integer 2x2 matrix.
inline std::int64_t integer_wedge_trace(const IntMatrix2& m, int k) {
  switch (k) {
    case 0: return 1;
    case 1: return m.trace();
    case 2: return m.det();
    default: fail("DegreeOutOfRange", "k must be 0, 1 or 2 on the 2-torus");
  }
}

/// Orbit-sum side sum_{A^n x = x} tr(wedge^k P)/|det(I - P)| with P = A^{-n},
/// in exact integer arithmetic over the enumerated fixed points.
inline double flat_trace_forms(const CatMapSystem& cat, int n, int k) {
  if (n < 1) fail("InvalidArgument", "n must be >= 1");
  if (k < 0 || k > 2) fail("DegreeOutOfRange", "k must be 0, 1 or 2 on the 2-torus");
  const IntMatrix2 an = cat.matrix.pow(n);
  // A^{-n} = adj(A^n) since det A = 1
  const IntMatrix2 p{{an(1, 1), -an(0, 1), -an(1, 0), an(0, 0)}};
  const std::int64_t w = integer_wedge_trace(p, k);
  const std::int64_t det = checked_abs((IntMatrix2::identity() - p).det());
  std::int64_t numerator = 0;
  for (std::size_t i = 0, count = periodic_points(cat, n).size(); i < count; ++i) numerator = checked_add(numerator, w);
  if (numerator % det != 0) violate("InexactOrbitSum", "orbit sum is not an integer");
  return static_cast<double>(numerator / det);
}

/// Frame coefficients b_{JL} of the pullback by A^n on constant k-frames
/// dx_J: (A^n)^* dx_J = sum_L b_{JL} dx_L.
inline Eigen::MatrixXd pullback_frame_coefficients(const CatMapSystem& cat, int n, int k) {
  const Eigen::Matrix2d an = [&] {
    const IntMatrix2 m = cat.matrix.pow(n);
    Eigen::Matrix2d r;
    r << double(m(0, 0)), double(m(0, 1)), double(m(1, 0)), double(m(1, 1));
    return r;
  }();
  switch (k) {
    case 0: return Eigen::MatrixXd::Ones(1, 1);
    case 1: return an;  // d(A^n x)_j = sum_l (A^n)_{jl} dx_l
    case 2: return Eigen::MatrixXd::Constant(1, 1, an.determinant());
    default: fail("DegreeOutOfRange", "k must be 0, 1 or 2 on the 2-torus");
  }
}

/// Mollified side on k-forms: the pullback acts as b (x) U^n on coefficient
/// functions, so the trace is sum_J b_JJ times the scalar mollified trace.
inline double flat_trace_forms_mollified(const CatMapSystem& cat, int n, int k, int grid_size, double eps) {
  const Eigen::MatrixXd b = pullback_frame_coefficients(cat, n, k);
  const double scalar = mollified_trace(koopman_operator(cat, n, grid_size), build_mollifier(grid_size, eps));
  return b.trace() * scalar;
}

inline double lefschetz_number(const CatMapSystem& cat, int n) {
  double s = 0.0;
  for (int k = 0; k <= 2; ++k) s += (k % 2 == 0 ? 1.0 : -1.0) * flat_trace_forms(cat, n, k);
  return s;
}

// ---------------------------------------------------------------------------
// Smoothed orbit sums

/// C^2 window: 1 on [plateau_lo, plateau_hi], smoothstep ramps of the given
/// width on both sides, 0 outside (plateau_lo - ramp, plateau_hi + ramp).
struct Window {
  double plateau_lo = 1.0;
  double plateau_hi = 10.0;
  double ramp = 0.5;

  double support_lo() const { return plateau_lo - ramp; }
  double support_hi() const { return plateau_hi + ramp; }

  double operator()(double t) const {
    if (t >= plateau_lo && t <= plateau_hi) return 1.0;
    if (t <= support_lo() || t >= support_hi()) return 0.0;
    const double s = t < plateau_lo ? (plateau_lo - t) / ramp : (t - plateau_hi) / ramp;
    // map s in (0, 1) to the profile's ramp on (1/2, 1)
    return mollifier_profile(0.5 + 0.5 * s);
  }
};

inline void check_window(const Window& w) {
  if (!(w.ramp > 0.0) || !(w.plateau_hi >= w.plateau_lo)) fail("InvalidArgument", "malformed window");
  if (w.support_lo() < 0.0 || w.plateau_lo <= 0.0)
    fail("WindowTouchesZero", "window support must stay in t > 0");
}

/// (1/i) sum_gamma chi(T) T# e^{i lambda T} tr(wedge^k P)/|det(I - P)|.
inline Complex smoothed_trace_sum(const OrbitSpectrum& spec, const Window& chi, int k, Complex lambda) {
  check_window(chi);
  check_degree(spec, k);
  if (chi.support_hi() > spec.horizon * (1 + 1e-12)) fail("HorizonExceeded", "window extends past the census");
  CompensatedSum<Complex> acc;
  for (const auto& r : spec.records) {
    if (r.period >= chi.support_hi()) break;
    const double c = chi(r.period);
    if (c == 0.0) continue;
    acc += c * static_cast<double>(r.multiplicity) * r.primitive_period *
           (r.wedge_traces[static_cast<std::size_t>(k)] / r.abs_det) * std::exp(Complex(0, 1) * lambda * r.period);
  }
  return acc.value() / Complex(0, 1);
}

// ---------------------------------------------------------------------------
// Discrete resolvent

/// Smallest prime grid size >= lo that is coprime to #Fix(A^n) for all
/// n <= n_max. On such grids (A^n - I) is invertible mod N, so the mollified
/// trace of U^n equals 1 exactly for every eps.
inline int coprime_grid_size(const CatMapSystem& cat, int n_max, int lo = 257) {
  auto is_prime = [](int p) {
    if (p < 2) return false;
    for (int d = 2; d * d <= p; ++d)
      if (p % d == 0) return false;
    return true;
  };
  for (int p = lo;; ++p) {
    if (!is_prime(p)) continue;
    bool ok = true;
    for (int n = 1; n <= n_max && ok; ++n) {
      const IntMatrix2 m = koopman_operator(cat, n, p).action - IntMatrix2::identity();
      ok = mod_floor(m.det(), p) != 0;
    }
    if (ok) return p;
  }
}

struct ResolventTrace {
  Complex value;
  Complex closed_form;  // e^{i l}/(1 - e^{i l}) = i f_0(l)
  double tail_bound = 0.0;
  int grid_size = 0;
};

/// Mollified trace of sum_{n=1}^{n_max} e^{i l n} U^n (the shifted resolvent's
/// Neumann series with a one-step shift).
inline ResolventTrace resolvent_trace_identity(const CatMapSystem& cat, Complex lambda, int n_max, double eps = 1.0 / 16,
                                               int grid_size = 0) {
  if (!(lambda.imag() > 0.1)) fail("NotInConvergenceRegion", "Im(lambda) must exceed 0.1");
  if (n_max < 0) fail("InvalidArgument", "n_max must be >= 0");
  ResolventTrace res;
  const Complex z = std::exp(Complex(0, 1) * lambda);
  res.closed_form = z / (1.0 - z);
  res.tail_bound = std::pow(std::abs(z), n_max + 1) / (1.0 - std::abs(z));
  if (n_max == 0) return res;
  res.grid_size = grid_size > 0 ? grid_size : coprime_grid_size(cat, n_max);
  const Mollifier m = build_mollifier(res.grid_size, eps);
  CompensatedSum<Complex> acc;
  for (int n = 1; n <= n_max; ++n)
    acc += std::pow(z, n) * mollified_trace(koopman_operator(cat, n, res.grid_size), m);
  res.value = acc.value();
  return res;
}

struct OrderOfLimits {
  Complex eps_first;      // lim_T (extrapolated in eps at each T)
  Complex horizon_first;  // extrapolated in eps of the largest-T values
  double difference = 0.0;
  double tolerance = 0.0;  // spread in eps at the largest T plus the horizon tail
};

/// Compares the two iterated limits of tr E_eps (sum_{n<=T} e^{i l n} U^n) E_eps
/// on a fixed grid.
inline OrderOfLimits order_of_limits(const CatMapSystem& cat, Complex lambda, int grid_size,
                                     const std::vector<double>& eps_list, const std::vector<int>& horizons) {
  check_eps_list(eps_list, grid_size);
  if (horizons.empty()) fail("InvalidArgument", "empty horizon list");
  const int t_max = *std::max_element(horizons.begin(), horizons.end());
  const Complex z = std::exp(Complex(0, 1) * lambda);
  // table[e][n-1] = e^{i l n} tr(E U^n E)
  std::vector<std::vector<Complex>> table;
  for (double eps : eps_list) {
    const Mollifier m = build_mollifier(grid_size, eps);
    std::vector<Complex> row;
    for (int n = 1; n <= t_max; ++n) row.push_back(std::pow(z, n) * mollified_trace(koopman_operator(cat, n, grid_size), m));
    table.push_back(std::move(row));
  }
  auto partial = [&](std::size_t e, int t) {
    CompensatedSum<Complex> acc;
    for (int n = 1; n <= t; ++n) acc += table[e][static_cast<std::size_t>(n - 1)];
    return acc.value();
  };
  OrderOfLimits res;
  // eps first: extrapolate at every T, then take the last T.
  std::vector<Complex> by_t;
  for (int t : horizons) {
    std::vector<Complex> col;
    for (std::size_t e = 0; e < eps_list.size(); ++e) col.push_back(partial(e, t));
    by_t.push_back(extrapolate_in_eps(col).first);
  }
  res.eps_first = by_t.back();
  std::vector<Complex> at_max;
  for (std::size_t e = 0; e < eps_list.size(); ++e) at_max.push_back(partial(e, t_max));
  res.horizon_first = extrapolate_in_eps(at_max).first;
  res.difference = std::abs(res.eps_first - res.horizon_first);
  double spread = 0.0;
  for (const auto& a : at_max)
    for (const auto& b : at_max) spread = std::max(spread, std::abs(a - b));
  res.tolerance = spread + std::pow(std::abs(z), t_max + 1) / (1.0 - std::abs(z));
  return res;
}

}  // namespace anosov

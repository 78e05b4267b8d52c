#pragma once

// Dirichlet-series evaluation of log zeta_R, zeta_1 and the degree factors
// f_k over a closed-orbit census, with tail bounds from a fitted orbit
// growth law N(T) <= C e^{h T}. For the unit-roof cat suspension the
// meromorphic continuation is available in closed form.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "anosov/core.hpp"
#include "anosov/orbits.hpp"
#include "anosov/poincare.hpp"

namespace anosov {

struct ZetaEvaluation {
  Complex value;
  double tail_bound = 0.0;
  std::int64_t terms_used = 0;
};

/// N(T) <= constant * exp(exponent * T) on the census, with exponent fitted.
struct GrowthLaw {
  double exponent = 0.0;
  double constant = 1.0;
};

/// Cumulative orbit counts N(T) at each distinct period.
inline std::vector<std::pair<double, double>> counting_steps(const OrbitSpectrum& spec) {
  std::vector<std::pair<double, double>> steps;
  double n = 0.0;
  for (const auto& r : spec.records) {
    n += static_cast<double>(r.multiplicity);
    if (!steps.empty() && std::abs(steps.back().first - r.period) <= 1e-12 * std::max(1.0, r.period))
      steps.back().second = n;
    else
      steps.emplace_back(r.period, n);
  }
  return steps;
}

/// Entropy estimate: slope of log(T N(T)) against T over [t_lo, t_hi].
///
/// Orbit counts grow like e^{hT}/(hT), so the factor T removes the leading
/// polynomial correction; the plain slope of log N(T) is biased low at
/// moderate T.
inline double fit_entropy(const OrbitSpectrum& spec, double t_lo, double t_hi) {
  const auto steps = counting_steps(spec);
  std::vector<double> xs, ys;
  // Sample N(T) on a grid of 25 points, counting with right-continuity.
  const int samples = 25;
  for (int i = 0; i < samples; ++i) {
    const double t = t_lo + (t_hi - t_lo) * i / (samples - 1);
    double n = 0.0;
    for (const auto& [p, c] : steps) {
      if (p > t + 1e-12 * std::max(1.0, t)) break;
      n = c;
    }
    if (n > 0.0) {
      xs.push_back(t);
      ys.push_back(std::log(t * n));
    }
  }
  return least_squares(xs, ys).slope;
}

/// Growth law with exponent from fit_entropy and the least constant that
/// makes N(T) <= C e^{hT} hold at every period of the census.
inline GrowthLaw fit_growth_law(const OrbitSpectrum& spec, double t_lo, double t_hi) {
  GrowthLaw g;
  g.exponent = fit_entropy(spec, t_lo, t_hi);
  g.constant = 0.0;
  for (const auto& [t, n] : counting_steps(spec)) g.constant = std::max(g.constant, n * std::exp(-g.exponent * t));
  return g;
}

/// Default fitting window: the upper 60% of the census horizon.
inline GrowthLaw fit_growth_law(const OrbitSpectrum& spec) {
  const double hi = spec.horizon;
  return fit_growth_law(spec, std::max(spec.records.empty() ? 0.0 : spec.records.front().period, 0.4 * hi), hi);
}

/// Bound on sum_{T_gamma > t0} w_gamma e^{-y T_gamma} given N(T) <= C e^{hT}
/// and weights w_gamma <= weight_bound * T_gamma^power (power 0 or 1).
///
/// Integrating by parts against dN: for power 0 the tail is at most
/// C y/(y-h) e^{-(y-h) t0}; for power 1 it is at most
/// C y e^{-(y-h) t0} (t0/(y-h) + 1/(y-h)^2).
inline double dirichlet_tail_bound(const GrowthLaw& g, double y, double t0, double weight_bound, int power) {
  const double a = y - g.exponent;
  if (!(a > 0.0)) return std::numeric_limits<double>::infinity();
  const double decay = std::exp(-a * t0);
  if (power == 0) return weight_bound * g.constant * y / a * decay;
  return weight_bound * g.constant * y * decay * (t0 / a + 1.0 / (a * a));
}

namespace detail {

inline void check_region(const GrowthLaw& g, Complex lambda) {
  if (!(lambda.imag() > g.exponent + 0.1))
    fail("NotInConvergenceRegion", "Im(lambda) = " + std::to_string(lambda.imag()) +
                                       " is not above the fitted entropy " + std::to_string(g.exponent) + " + 0.1");
}

/// e^{i lambda T}; zero when the exponent underflows.
inline Complex phase(Complex lambda, double t) { return std::exp(Complex(0, 1) * lambda * t); }

}  // namespace detail

/// log zeta_R(lambda) = -sum_gamma T#/T e^{i lambda T}, over periods <= t_max.
inline ZetaEvaluation log_zeta_R(const OrbitSpectrum& spec, const GrowthLaw& g, Complex lambda, double t_max) {
  if (std::isinf(lambda.imag()) && lambda.imag() > 0) return {0.0, 0.0, 0};
  detail::check_region(g, lambda);
  if (t_max > spec.horizon * (1 + 1e-12)) fail("HorizonExceeded", "t_max exceeds census horizon");
  CompensatedSum<Complex> acc;
  ZetaEvaluation ev;
  for (const auto& r : spec.records) {
    if (r.period > t_max) break;
    acc += -static_cast<double>(r.multiplicity) * (r.primitive_period / r.period) * detail::phase(lambda, r.period);
    ev.terms_used += r.multiplicity;
  }
  ev.value = acc.value();
  ev.tail_bound = dirichlet_tail_bound(g, lambda.imag(), t_max, 1.0, 0);
  return ev;
}

/// zeta_1(lambda) = exp(-sum T#/(T |det(I-P)|) e^{i lambda T}).
/// The tail bound applies to the value (not its logarithm).
inline ZetaEvaluation zeta_1(const OrbitSpectrum& spec, const GrowthLaw& g, Complex lambda, double t_max) {
  if (spec.records.empty()) return {1.0, 0.0, 0};
  detail::check_region(g, lambda);
  if (t_max > spec.horizon * (1 + 1e-12)) fail("HorizonExceeded", "t_max exceeds census horizon");
  CompensatedSum<Complex> acc;
  ZetaEvaluation ev;
  double weight_bound = 0.0;
  for (const auto& r : spec.records) {
    weight_bound = std::max(weight_bound, 1.0 / r.abs_det);
    if (r.period > t_max) continue;
    acc += -static_cast<double>(r.multiplicity) * (r.primitive_period / (r.period * r.abs_det)) *
           detail::phase(lambda, r.period);
    ev.terms_used += r.multiplicity;
  }
  const Complex log_value = acc.value();
  ev.value = std::exp(log_value);
  const double log_tail = dirichlet_tail_bound(g, lambda.imag(), t_max, weight_bound, 0);
  ev.tail_bound = std::abs(ev.value) * std::expm1(log_tail);
  return ev;
}

/// Per-degree weight tr(wedge^k P) / |det(I - P)|, bounded over the census.
inline double wedge_weight_bound(const OrbitSpectrum& spec, int k) {
  double w = 0.0;
  for (const auto& r : spec.records) w = std::max(w, std::abs(r.wedge_traces[static_cast<std::size_t>(k)]) / r.abs_det);
  return w;
}

inline void check_degree(const OrbitSpectrum& spec, int k) {
  if (k < 0 || k > spec.transversal_dimension)
    fail("DegreeOutOfRange", "degree " + std::to_string(k) + " outside 0.." + std::to_string(spec.transversal_dimension));
}

/// f_k(lambda) = (1/i) sum T# e^{i lambda T} tr(wedge^k P) / |det(I - P)|.
inline ZetaEvaluation f_k(const OrbitSpectrum& spec, const GrowthLaw& g, int k, Complex lambda, double t_max) {
  check_degree(spec, k);
  detail::check_region(g, lambda);
  if (t_max > spec.horizon * (1 + 1e-12)) fail("HorizonExceeded", "t_max exceeds census horizon");
  CompensatedSum<Complex> acc;
  ZetaEvaluation ev;
  for (const auto& r : spec.records) {
    if (r.period > t_max) break;
    acc += static_cast<double>(r.multiplicity) * r.primitive_period *
           (r.wedge_traces[static_cast<std::size_t>(k)] / r.abs_det) * detail::phase(lambda, r.period);
    ev.terms_used += r.multiplicity;
  }
  ev.value = acc.value() / Complex(0, 1);
  ev.tail_bound = dirichlet_tail_bound(g, lambda.imag(), t_max, wedge_weight_bound(spec, k), 1);
  return ev;
}

/// Logarithm of the degree-k factor: -sum T# e^{i lambda T} tr(wedge^k P) / (T |det(I - P)|).
inline ZetaEvaluation log_degree_factor(const OrbitSpectrum& spec, const GrowthLaw& g, int k, Complex lambda,
                                        double t_max) {
  check_degree(spec, k);
  detail::check_region(g, lambda);
  CompensatedSum<Complex> acc;
  ZetaEvaluation ev;
  for (const auto& r : spec.records) {
    if (r.period > t_max) break;
    acc += -static_cast<double>(r.multiplicity) * (r.primitive_period / r.period) *
           (r.wedge_traces[static_cast<std::size_t>(k)] / r.abs_det) * detail::phase(lambda, r.period);
    ev.terms_used += r.multiplicity;
  }
  ev.value = acc.value();
  ev.tail_bound = dirichlet_tail_bound(g, lambda.imag(), t_max, wedge_weight_bound(spec, k), 0);
  return ev;
}

struct FactorizationReport {
  Complex log_zeta;
  Complex factor_sum;     // sum_k (-1)^{k+q} log factor_k
  double discrepancy = 0.0;
  double combined_tail = 0.0;   // truncation tails plus a floating-point rounding bound
};

/// Compares log zeta_R with the alternating sum of the per-degree factors.
inline FactorizationReport zeta_factorization_check(const OrbitSpectrum& spec, const GrowthLaw& g, Complex lambda,
                                                    int q, double t_max) {
  FactorizationReport rep;
  const auto lz = log_zeta_R(spec, g, lambda, t_max);
  rep.log_zeta = lz.value;
  rep.combined_tail = lz.tail_bound;
  CompensatedSum<Complex> acc;
  for (int k = 0; k <= spec.transversal_dimension; ++k) {
    const auto f = log_degree_factor(spec, g, k, lambda, t_max);
    acc += ((k + q) % 2 == 0 ? 1.0 : -1.0) * f.value;
    rep.combined_tail += f.tail_bound;
  }
  rep.factor_sum = acc.value();
  // Rounding: each side is a compensated sum of terms bounded by |term|, so
  // its error is a few ulps of the absolute sum.
  double magnitude = 0.0;
  for (const auto& r : spec.records) {
    if (r.period > t_max) break;
    double w = 1.0;
    for (double t : r.wedge_traces) w += std::abs(t) / r.abs_det;
    magnitude += static_cast<double>(r.multiplicity) * (r.primitive_period / r.period) * w *
                 std::exp(-lambda.imag() * r.period);
  }
  rep.combined_tail += 16.0 * std::numeric_limits<double>::epsilon() * magnitude;
  rep.discrepancy = std::abs(rep.log_zeta - rep.factor_sum);
  return rep;
}

// ---------------------------------------------------------------------------
// Closed forms for the unit-roof suspension of a cat map

struct LinearSuspensionZeta {
  double unstable_eigenvalue = 0.0;

  /// zeta_R(l) = (1 - mu e^{il})(1 - mu^{-1} e^{il}) / (1 - e^{il})^2.
  Complex zeta_R(Complex lambda) const {
    const Complex z = std::exp(Complex(0, 1) * lambda);
    const double mu = unstable_eigenvalue;
    return (1.0 - mu * z) * (1.0 - z / mu) / ((1.0 - z) * (1.0 - z));
  }

  Complex zeta_1(Complex lambda) const { return 1.0 - std::exp(Complex(0, 1) * lambda); }

  /// f_0(l) = (1/i) e^{il} / (1 - e^{il}).
  Complex f0(Complex lambda) const {
    const Complex z = std::exp(Complex(0, 1) * lambda);
    return z / (1.0 - z) / Complex(0, 1);
  }
};

/// Closed-form continuation; only the linear model (unit roof over a cat map
/// with positive trace) has one.
inline LinearSuspensionZeta continuation_oracle(const SuspensionSystem& sys) {
  if (!sys.roof.is_constant() || std::abs(sys.roof({0.0, 0.0}) - 1.0) > 0.0 || sys.base.unstable_multiplier < 0)
    fail("NoClosedForm", "closed-form continuation exists only for the unit-roof cat suspension");
  return {sys.base.unstable_eigenvalue};
}

struct Singularity {
  Complex center;      // center of the reporting square
  int winding = 0;     // +order for zeros, -order for poles
};

/// Winding number of f around the boundary of the square [c - h, c + h]^2,
/// tracking the argument adaptively between samples.
template <typename F>
int winding_number(const F& f, Complex center, double half_side, int samples_per_side = 64) {
  const Complex corners[4] = {center + Complex(-half_side, -half_side), center + Complex(half_side, -half_side),
                              center + Complex(half_side, half_side), center + Complex(-half_side, half_side)};
  double total = 0.0;
  auto arg_step = [&](auto&& self, Complex a, Complex b, Complex fa, Complex fb, int depth) -> double {
    const double d = std::arg(fb / fa);
    if (std::abs(d) < 0.5 || depth > 20) return d;
    const Complex m = 0.5 * (a + b);
    const Complex fm = f(m);
    return self(self, a, m, fa, fm, depth + 1) + self(self, m, b, fm, fb, depth + 1);
  };
  for (int s = 0; s < 4; ++s) {
    const Complex a = corners[s], b = corners[(s + 1) % 4];
    Complex prev = a, fprev = f(a);
    for (int k = 1; k <= samples_per_side; ++k) {
      const Complex z = a + (b - a) * (static_cast<double>(k) / samples_per_side);
      const Complex fz = f(z);
      total += arg_step(arg_step, prev, z, fprev, fz, 0);
      prev = z;
      fprev = fz;
    }
  }
  return static_cast<int>(std::lround(total / kTwoPi));
}

/// Zeros and poles of zeta_R in [re_lo, re_hi) x [im_lo, im_hi) located by
/// winding numbers on squares of side 0.1 centred on the lattice 0.1 Z^2;
/// square k covers [0.1 k - 0.05, 0.1 k + 0.05) in each coordinate.
inline std::vector<Singularity> locate_singularities(const LinearSuspensionZeta& oracle, double re_lo, double re_hi,
                                                     double im_lo, double im_hi) {
  constexpr double side = 0.1;
  std::vector<Singularity> found;
  auto f = [&](Complex l) { return oracle.zeta_R(l); };
  const long i0 = std::lround(std::ceil(re_lo / side - 0.5)), i1 = std::lround(std::ceil(re_hi / side - 0.5));
  const long j0 = std::lround(std::ceil(im_lo / side - 0.5)), j1 = std::lround(std::ceil(im_hi / side - 0.5));
  for (long i = i0; i < i1; ++i)
    for (long j = j0; j < j1; ++j) {
      const Complex c(i * side, j * side);
      const int w = winding_number(f, c, side / 2);
      if (w != 0) found.push_back({c, w});
    }
  return found;
}

struct ResidueReport {
  double limit_value = 0.0;     // Richardson-extrapolated (l - l0) f0(l)
  double contour_value = 0.0;   // 16-node trapezoid on |l - l0| = radius
  double residue = 0.0;
};

/// Residue of f_0 at l0 by the limit and by contour quadrature; the result
/// must be a non-negative integer.
inline ResidueReport residue_check_f0(const LinearSuspensionZeta& oracle, double lambda0) {
  ResidueReport rep;
  // (l - l0) f0(l) at l = l0 + 10^{-k}, k = 3..6, Richardson in the step.
  std::vector<double> vals;
  for (int k = 3; k <= 6; ++k) {
    const double h = std::pow(10.0, -k);
    vals.push_back((h * oracle.f0(Complex(lambda0 + h, 0.0))).real());
  }
  // Each step shrinks by 10; eliminate the O(h) term.
  std::vector<double> rich;
  for (std::size_t i = 0; i + 1 < vals.size(); ++i) rich.push_back((10.0 * vals[i + 1] - vals[i]) / 9.0);
  rep.limit_value = rich[1];

  // Poles of f0 sit on 2 pi Z; the trapezoid error decays like (r / R)^16
  // with R the distance to the nearest pole other than l0.
  constexpr int nodes = 16;
  const double offset = lambda0 - kTwoPi * std::round(lambda0 / kTwoPi);
  const double nearest_other = std::abs(offset) < 1e-9 ? kTwoPi : std::min(std::abs(offset), kTwoPi - std::abs(offset));
  const double radius = 0.25 * nearest_other;
  CompensatedSum<Complex> acc;
  for (int k = 0; k < nodes; ++k) {
    const Complex w = std::polar(1.0, kTwoPi * k / nodes);
    acc += oracle.f0(lambda0 + radius * w) * radius * w / static_cast<double>(nodes);
  }
  rep.contour_value = acc.value().real();
  rep.residue = rep.contour_value;
  const double nearest = std::max(0.0, std::round(rep.residue));
  if (std::abs(rep.residue - nearest) > 1e-3)
    violate("NotIntegral", "residue " + std::to_string(rep.residue) + " is not a non-negative integer");
  return rep;
}

}  // namespace anosov

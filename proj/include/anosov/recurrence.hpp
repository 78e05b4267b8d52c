#pragma once

// Near-recurrence volumes of suspension flows, the closed-trajectory counting
// bound and nondegeneracy of closed orbits.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "anosov/core.hpp"
#include "anosov/orbits.hpp"
#include "anosov/poincare.hpp"
#include "anosov/systems.hpp"

namespace anosov {

// ---------------------------------------------------------------------------
// Counter-based uniform variates: sample i of a stream depends only on
// (seed, i), so any partition of the samples across workers sees the same
// numbers.

inline std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline double counter_uniform(std::uint64_t seed, std::uint64_t counter) {
  const std::uint64_t bits = splitmix64(splitmix64(seed) ^ splitmix64(counter + 0x632be59bd9b4e019ULL));
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

// ---------------------------------------------------------------------------
// Near-recurrence measure
//
// mu~ = (normalized Lebesgue on the suspension) x dt over [t_e, T]. Distance
// is the max of the torus max-metric and the vertical gap, minimized over the
// representatives (A^m x, s + t - R_m(x)) of phi_t(x, s), R_m the roof sum
// along m iterates. For fixed x the admissible t form the intervals
// |t - R_m(x)| <= eps with d(A^m x, x) <= eps, whose total length is
// integrated exactly; only x is sampled.

struct MeasureEstimate {
  double epsilon = 0.0;
  double estimate = 0.0;
  double standard_error = 0.0;
};

inline constexpr std::int64_t kMinRecurrenceSamples = 10'000;
inline constexpr std::int64_t kRecurrenceChunk = 4096;

namespace detail {

inline void check_window(double t_e, double T) {
  if (!(t_e > 0.0 && t_e < T && std::isfinite(T)))
    fail("BadWindow", "need 0 < t_e < T, got t_e = " + std::to_string(t_e) + ", T = " + std::to_string(T));
}

/// Length of {t in [t_e, T] : d(phi_t(x, s), (x, s)) <= eps} for each eps.
inline void recurrence_lengths(const SuspensionSystem& sys, Vec2 x, const std::vector<double>& eps, double t_e,
                               double T, std::vector<double>& out) {
  const double eps_max = *std::max_element(eps.begin(), eps.end());
  std::vector<std::pair<double, double>> hits;  // (R_m, d(A^m x, x))
  Vec2 y = x;
  double r = 0.0;
  while (r - eps_max <= T) {
    const double d = torus_distance(y, x);
    if (d <= eps_max && r + eps_max >= t_e) hits.emplace_back(r, d);
    r += sys.roof(y);
    y = sys.base.map(y);
  }
  for (std::size_t e = 0; e < eps.size(); ++e) {
    const double ep = eps[e];
    // intervals are sorted by R_m; merge overlaps before measuring
    double total = 0.0, lo = 0.0, hi = -1.0;
    bool open = false;
    for (const auto& [rm, d] : hits) {
      if (d > ep) continue;
      const double a = std::max(rm - ep, t_e), b = std::min(rm + ep, T);
      if (a >= b) continue;
      if (open && a <= hi) {
        hi = std::max(hi, b);
      } else {
        if (open) total += hi - lo;
        lo = a;
        hi = b;
        open = true;
      }
    }
    if (open) total += hi - lo;
    out[e] = total;
  }
}

}  // namespace detail

/// Estimates for several eps from one common set of samples.
inline std::vector<MeasureEstimate> near_recurrence_measures(const SuspensionSystem& sys,
                                                             const std::vector<double>& eps, double t_e,
                                                             double T, std::int64_t samples, std::uint64_t seed,
                                                             int workers = 1) {
  detail::check_window(t_e, T);
  if (eps.empty()) fail("BadEpsilon", "no eps values");
  for (double e : eps)
    if (!(e > 0.0)) fail("BadEpsilon", "eps must be positive");
  if (samples < kMinRecurrenceSamples)
    fail("TooFewSamples", std::to_string(samples) + " < " + std::to_string(kMinRecurrenceSamples));
  if (workers < 1) fail("BadWorkers", "worker count must be >= 1");

  // x is drawn uniformly; the suspension marginal has density r(x) / r_mean.
  const double r_mean = sys.roof.constant;
  const std::size_t ne = eps.size();
  const std::int64_t chunks = (samples + kRecurrenceChunk - 1) / kRecurrenceChunk;
  std::vector<double> sums(static_cast<std::size_t>(chunks) * ne * 2, 0.0);

  auto run_chunk = [&](std::int64_t c) {
    std::vector<CompensatedSum<double>> s1(ne), s2(ne);
    std::vector<double> len(ne);
    const std::int64_t end = std::min(samples, (c + 1) * kRecurrenceChunk);
    for (std::int64_t i = c * kRecurrenceChunk; i < end; ++i) {
      const Vec2 x{counter_uniform(seed, 2 * static_cast<std::uint64_t>(i)),
                   counter_uniform(seed, 2 * static_cast<std::uint64_t>(i) + 1)};
      detail::recurrence_lengths(sys, x, eps, t_e, T, len);
      const double w = sys.roof(x) / r_mean;
      for (std::size_t e = 0; e < ne; ++e) {
        const double v = w * len[e];
        s1[e] += v;
        s2[e] += v * v;
      }
    }
    for (std::size_t e = 0; e < ne; ++e) {
      sums[(static_cast<std::size_t>(c) * ne + e) * 2] = s1[e].value();
      sums[(static_cast<std::size_t>(c) * ne + e) * 2 + 1] = s2[e].value();
    }
  };

  if (workers == 1) {
    for (std::int64_t c = 0; c < chunks; ++c) run_chunk(c);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        for (std::int64_t c = w; c < chunks; c += workers) run_chunk(c);
      });
    for (auto& t : pool) t.join();
  }

  std::vector<MeasureEstimate> out;
  const double n = static_cast<double>(samples);
  for (std::size_t e = 0; e < ne; ++e) {
    CompensatedSum<double> a, b;
    for (std::int64_t c = 0; c < chunks; ++c) {
      a += sums[(static_cast<std::size_t>(c) * ne + e) * 2];
      b += sums[(static_cast<std::size_t>(c) * ne + e) * 2 + 1];
    }
    const double mean = a.value() / n;
    const double var = std::max(0.0, b.value() / n - mean * mean) * n / (n - 1.0);
    out.push_back({eps[e], mean, std::sqrt(var / n)});
  }
  return out;
}

inline MeasureEstimate near_recurrence_measure(const SuspensionSystem& sys, double eps, double t_e, double T,
                                               std::int64_t samples, std::uint64_t seed, int workers = 1) {
  return near_recurrence_measures(sys, {eps}, t_e, T, samples, seed, workers).front();
}

struct RecurrenceReport {
  std::vector<double> epsilon_grid;
  double t_e = 0.0;
  double T = 0.0;
  std::vector<MeasureEstimate> measure_estimates;
  std::optional<double> fitted_eps_exponent;
  double L_used = 0.0;
  std::int64_t samples = 0;
  std::uint64_t seed = 0;
  std::string metric = "max(torus max-metric with wraparound, vertical gap)";
  bool monotone = true;  // estimates non-decreasing in eps within 2 standard errors
};

inline RecurrenceReport recurrence_report(const SuspensionSystem& sys, std::vector<double> eps, double t_e,
                                          double T, std::int64_t samples, std::uint64_t seed, double L,
                                          int workers = 1) {
  std::sort(eps.begin(), eps.end());
  RecurrenceReport rep;
  rep.epsilon_grid = eps;
  rep.t_e = t_e;
  rep.T = T;
  rep.L_used = L;
  rep.samples = samples;
  rep.seed = seed;
  rep.measure_estimates = near_recurrence_measures(sys, eps, t_e, T, samples, seed, workers);
  for (std::size_t i = 1; i < rep.measure_estimates.size(); ++i) {
    const auto& a = rep.measure_estimates[i - 1];
    const auto& b = rep.measure_estimates[i];
    if (a.estimate > b.estimate + 2.0 * std::hypot(a.standard_error, b.standard_error)) rep.monotone = false;
  }
  if (eps.size() >= 3) {
    std::vector<double> le, lm;
    for (const auto& m : rep.measure_estimates)
      if (m.estimate > 0.0) {
        le.push_back(std::log(m.epsilon));
        lm.push_back(std::log(m.estimate));
      }
    if (le.size() >= 3) rep.fitted_eps_exponent = least_squares(le, lm).slope;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Counting bound N(T) <= C e^{(2n-1) L T}

struct CountingBoundReport {
  double C = 0.0;
  double exponent = 0.0;  // (2n - 1) L
  double fitted_entropy = 0.0;
  std::vector<std::pair<double, std::int64_t>> counts;
};

inline CountingBoundReport verify_counting_bound(const OrbitCensus& census, double L, std::vector<double> T_grid,
                                                 int dimension = 3) {
  if (T_grid.empty()) fail("EmptyGrid", "T_grid is empty");
  std::sort(T_grid.begin(), T_grid.end());
  if (T_grid.back() > census.horizon * (1 + 1e-12))
    fail("HorizonExceeded", "max T = " + std::to_string(T_grid.back()) + " > census horizon " +
                                std::to_string(census.horizon));
  CountingBoundReport rep;
  rep.exponent = (2.0 * dimension - 1.0) * L;
  for (double t : T_grid) {
    const auto n = orbit_count_function(census, t);
    rep.counts.emplace_back(t, n);
    rep.C = std::max(rep.C, static_cast<double>(n) * std::exp(-rep.exponent * t));
  }
  if (!std::isfinite(rep.C)) violate("BoundNotFinite", "fitted constant is not finite");

  // slope of log(T N(T)) over the upper part of the census
  const double hi = std::min(12.0, census.horizon), lo = std::min(6.0, 0.5 * census.horizon);
  std::vector<double> xs, ys;
  for (int i = 0; i < 25; ++i) {
    const double t = lo + (hi - lo) * i / 24.0;
    const auto n = orbit_count_function(census, t);
    if (n > 0) {
      xs.push_back(t);
      ys.push_back(std::log(t * static_cast<double>(n)));
    }
  }
  if (xs.size() >= 2) rep.fitted_entropy = least_squares(xs, ys).slope;
  return rep;
}

// ---------------------------------------------------------------------------
// Nondegeneracy

struct NondegeneracyReport {
  double min_abs_det = std::numeric_limits<double>::infinity();
  double at_period = 0.0;
  std::size_t records = 0;
};

inline NondegeneracyReport nondegeneracy_check(const OrbitSpectrum& spec, double tol = 1e-9) {
  if (spec.records.empty()) fail("EmptyCensus", "no closed orbits to check");
  NondegeneracyReport rep;
  rep.records = spec.records.size();
  for (const auto& r : spec.records) {
    if (r.abs_det < rep.min_abs_det) {
      rep.min_abs_det = r.abs_det;
      rep.at_period = r.period;
    }
    const double scale = 1.0 + std::abs(r.wedge_traces.size() > 1 ? r.wedge_traces[1] : 0.0);
    if (!(r.abs_det > tol * scale))
      violate("DegenerateOrbitFound", "|det(I - P)| = " + std::to_string(r.abs_det) + " at period " +
                                          std::to_string(r.period));
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Separation of periodic points: distinct solutions of A^n x = x are at least
// delta lambda^-n apart.

struct SeparationReport {
  double delta = std::numeric_limits<double>::infinity();
  int worst_n = 0;
};

inline SeparationReport separation_constant(const CatMapSystem& cat, int n_max) {
  SeparationReport rep;
  for (int n = 1; n <= n_max; ++n) {
    const auto pts = periodic_points(cat, n);
    if (pts.size() < 2) continue;
    const std::int64_t D = pts.front().denominator;
    std::int64_t best = D;
    for (std::size_t i = 0; i < pts.size(); ++i)
      for (std::size_t j = i + 1; j < pts.size(); ++j) {
        std::int64_t m = 0;
        for (int c = 0; c < 2; ++c) {
          const std::int64_t d = std::abs(pts[i].numerators[static_cast<std::size_t>(c)] -
                                          pts[j].numerators[static_cast<std::size_t>(c)]);
          m = std::max(m, std::min(d, D - d));
        }
        best = std::min(best, m);
      }
    const double delta = static_cast<double>(best) / static_cast<double>(D) * std::pow(cat.unstable_eigenvalue, n);
    if (delta < rep.delta) {
      rep.delta = delta;
      rep.worst_n = n;
    }
  }
  return rep;
}

}  // namespace anosov

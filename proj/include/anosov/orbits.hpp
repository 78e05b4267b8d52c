#pragma once

// Closed-orbit enumeration: periodic points of cat maps (exact, via the
// Smith normal form of A^n - I), closed trajectories of suspension flows,
// and conjugacy classes of hyperbolic elements in Fuchsian groups.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_set>
#include <vector>

#include "anosov/core.hpp"
#include "anosov/systems.hpp"

namespace anosov {

enum class SystemKind { CatMap, Suspension, Fuchsian };

/// A periodic point of a cat map with exact rational coordinates
/// (numerators[0] / denominator, numerators[1] / denominator).
struct RationalPoint {
  std::array<std::int64_t, 2> numerators{};
  std::int64_t denominator = 1;

  Vec2 value() const {
    return {static_cast<double>(numerators[0]) / static_cast<double>(denominator),
            static_cast<double>(numerators[1]) / static_cast<double>(denominator)};
  }
};

struct ClosedOrbit {
  SystemKind system_kind = SystemKind::Suspension;
  double period = 0.0;             // T_gamma (flow time; iterate count for maps)
  double primitive_period = 0.0;   // T_gamma^#
  int iterates = 0;                // base-map iterates n along the full orbit (maps/suspensions)
  int repetitions = 1;             // period / primitive_period
  bool is_primitive = true;
  std::int64_t multiplicity = 1;   // number of distinct orbits sharing these data
  std::optional<RationalPoint> representative;
  Word word;                       // Fuchsian: canonical cyclic word
};

struct OrbitCensus {
  SystemKind system_kind = SystemKind::Suspension;
  double horizon = 0.0;
  std::vector<ClosedOrbit> orbits;  // sorted by (period, primitive_period)
  std::map<int, std::int64_t> fixed_point_counts;  // n -> #Fix(A^n)
  std::map<int, std::int64_t> primitive_counts;    // p -> N_p
  std::int64_t nonhyperbolic_skipped = 0;
  std::int64_t trace_coincidences = 0;  // distinct classes with equal |tr| (not merged)

  std::int64_t total_orbits() const {
    std::int64_t n = 0;
    for (const auto& o : orbits) n = checked_add(n, o.multiplicity);
    return n;
  }
};

// ---------------------------------------------------------------------------
// Fixed points of cat maps

struct SmithForm {
  std::int64_t d1 = 0;  // d1 | d2
  std::int64_t d2 = 0;
};

/// Invariant factors of a nonsingular 2x2 integer matrix; Z^2/MZ^2 = Z/d1 x Z/d2.
inline SmithForm smith_normal_form(const IntMatrix2& m) {
  const __int128 wide = static_cast<__int128>(m.e[0]) * m.e[3] - static_cast<__int128>(m.e[1]) * m.e[2];
  const __int128 wide_abs = wide < 0 ? -wide : wide;
  if (wide_abs > std::numeric_limits<std::int64_t>::max()) fail("Overflow", "determinant exceeds the 63-bit range");
  const auto det = static_cast<std::int64_t>(wide_abs);
  if (det == 0) fail("DegenerateOrbit", "singular matrix has no finite Smith form");
  const std::int64_t d1 = gcd64(gcd64(m.e[0], m.e[1]), gcd64(m.e[2], m.e[3]));
  return {d1, det / d1};
}

inline IntMatrix2 power_minus_identity(const CatMapSystem& cat, int n) {
  try {
    return cat.matrix.pow(n) - IntMatrix2::identity();
  } catch (const Error& e) {
    fail("Overflow", "A^" + std::to_string(n) + " - I exceeds the 63-bit range");
  }
}

/// #Fix(A^n) = |det(A^n - I)|, as the order of Z^2 / (A^n - I) Z^2.
inline std::int64_t count_fixed_points(const CatMapSystem& cat, int n) {
  if (n < 1) fail("InvalidArgument", "n must be >= 1");
  const auto snf = smith_normal_form(power_minus_identity(cat, n));
  try {
    return checked_mul(snf.d1, snf.d2);
  } catch (const Error&) {
    fail("Overflow", "#Fix(A^" + std::to_string(n) + ") exceeds the 63-bit range");
  }
}

/// Largest n for which count_fixed_points does not overflow.
inline int fixed_point_horizon(const CatMapSystem& cat) {
  int n = 1;
  for (;; ++n) {
    try {
      (void)count_fixed_points(cat, n + 1);
    } catch (const Error&) {
      return n;
    }
  }
}

inline int mobius(int n) {
  int result = 1;
  for (int p = 2; p * p <= n; ++p) {
    if (n % p == 0) {
      n /= p;
      if (n % p == 0) return 0;
      result = -result;
    }
  }
  if (n > 1) result = -result;
  return result;
}

/// N_p = (1/p) sum_{d | p} mu(d) #Fix(A^{p/d}) for p = 1..n_max.
inline std::map<int, std::int64_t> primitive_orbit_counts(const CatMapSystem& cat, int n_max) {
  if (n_max < 1) fail("InvalidArgument", "n_max must be >= 1");
  std::vector<std::int64_t> fix(static_cast<std::size_t>(n_max) + 1, 0);
  for (int n = 1; n <= n_max; ++n) fix[n] = count_fixed_points(cat, n);
  std::map<int, std::int64_t> counts;
  for (int p = 1; p <= n_max; ++p) {
    std::int64_t s = 0;
    for (int d = 1; d <= p; ++d)
      if (p % d == 0) s = checked_add(s, checked_mul(mobius(d), fix[p / d]));
    if (s % p != 0 || s < 0)
      violate("MobiusInconsistent", "primitive count for p = " + std::to_string(p) + " is not a non-negative integer");
    counts[p] = s / p;
  }
  return counts;
}

/// All solutions of A^n x = x on T^2 as rational points with denominator |det(A^n - I)|.
inline std::vector<RationalPoint> periodic_points(const CatMapSystem& cat, int n) {
  const IntMatrix2 m = power_minus_identity(cat, n);
  const std::int64_t det = m.det();
  const std::int64_t denom = checked_abs(det);
  if (denom == 0) fail("DegenerateOrbit", "A^n - I is singular");
  if (denom > 50'000'000) fail("Overflow", "too many periodic points to list for n = " + std::to_string(n));
  // x = M^{-1} z = adj(M) z / det: the solutions form the subgroup of
  // (Z/D)^2 generated by the columns of +-adj(M).
  const std::int64_t sgn = det > 0 ? 1 : -1;
  const std::array<std::int64_t, 2> c1{mod_floor(sgn * m(1, 1), denom), mod_floor(-sgn * m(1, 0), denom)};
  const std::array<std::int64_t, 2> c2{mod_floor(-sgn * m(0, 1), denom), mod_floor(sgn * m(0, 0), denom)};
  auto encode = [denom](std::array<std::int64_t, 2> v) { return v[0] * denom + v[1]; };

  std::vector<std::array<std::int64_t, 2>> cyclic;
  std::unordered_set<std::int64_t> seen;
  std::array<std::int64_t, 2> v{0, 0};
  do {
    cyclic.push_back(v);
    seen.insert(encode(v));
    v = {(v[0] + c1[0]) % denom, (v[1] + c1[1]) % denom};
  } while (v[0] != 0 || v[1] != 0);

  std::vector<RationalPoint> points;
  std::array<std::int64_t, 2> shift{0, 0};
  for (;;) {
    for (const auto& c : cyclic)
      points.push_back({{(c[0] + shift[0]) % denom, (c[1] + shift[1]) % denom}, denom});
    shift = {(shift[0] + c2[0]) % denom, (shift[1] + c2[1]) % denom};
    if (seen.count(encode(shift))) break;
  }
  if (static_cast<std::int64_t>(points.size()) != denom)
    violate("CountMismatch", "periodic point enumeration found " + std::to_string(points.size()) +
                                 " points, expected " + std::to_string(denom));
  std::sort(points.begin(), points.end(),
            [](const RationalPoint& a, const RationalPoint& b) { return a.numerators < b.numerators; });
  return points;
}

struct PeriodicOrbit {
  std::vector<RationalPoint> points;  // points[0] is lexicographically minimal
};

/// Primitive orbits of exact period n, each listed from its minimal point.
inline std::vector<PeriodicOrbit> primitive_periodic_orbits(const CatMapSystem& cat, int n) {
  const auto pts = periodic_points(cat, n);
  const std::int64_t denom = pts.empty() ? 1 : pts.front().denominator;
  std::unordered_set<std::int64_t> used;
  std::vector<PeriodicOrbit> orbits;
  for (const auto& p : pts) {
    const auto key = p.numerators[0] * denom + p.numerators[1];
    if (used.count(key)) continue;
    PeriodicOrbit orbit;
    auto q = p.numerators;
    do {
      orbit.points.push_back({q, denom});
      used.insert(q[0] * denom + q[1]);
      q = cat.matrix.apply_mod(q, denom);
    } while (q != p.numerators);
    if (static_cast<int>(orbit.points.size()) == n) orbits.push_back(std::move(orbit));
  }
  return orbits;
}

// ---------------------------------------------------------------------------
// Suspension flows

inline void sort_orbits(std::vector<ClosedOrbit>& orbits) {
  std::stable_sort(orbits.begin(), orbits.end(), [](const ClosedOrbit& a, const ClosedOrbit& b) {
    if (a.period != b.period) return a.period < b.period;
    if (a.primitive_period != b.primitive_period) return a.primitive_period < b.primitive_period;
    if (a.iterates != b.iterates) return a.iterates < b.iterates;
    if (a.representative && b.representative)
      return a.representative->numerators < b.representative->numerators;
    return false;
  });
}

/// Closed trajectories of period <= t_max. Constant roofs are summarized by
/// multiplicity (one record per primitive period and repetition) unless
/// explicit_points is set; variable roofs always list representatives.
inline OrbitCensus enumerate_orbits(const SuspensionSystem& sys, double t_max, bool explicit_points = false) {
  OrbitCensus census;
  census.system_kind = SystemKind::Suspension;
  census.horizon = t_max;
  const int n_max = static_cast<int>(std::floor(t_max / sys.min_roof + 1e-12));
  if (n_max < 1) return census;

  for (int n = 1; n <= n_max; ++n) census.fixed_point_counts[n] = count_fixed_points(sys.base, n);
  census.primitive_counts = primitive_orbit_counts(sys.base, n_max);

  const bool constant = sys.roof.is_constant();
  if (constant && !explicit_points) {
    const double r = sys.roof.constant + [&] {
      double c = 0;
      for (const auto& t : sys.roof.terms) c += t.amplitude * std::cos(t.phase);
      return c;
    }();
    for (const auto& [p, count] : census.primitive_counts) {
      if (count == 0) continue;
      for (int m = 1; m * p * r <= t_max * (1 + 1e-15); ++m) {
        ClosedOrbit o;
        o.system_kind = SystemKind::Suspension;
        o.period = m * p * r;
        o.primitive_period = p * r;
        o.iterates = m * p;
        o.repetitions = m;
        o.is_primitive = m == 1;
        o.multiplicity = count;
        census.orbits.push_back(o);
      }
    }
  } else {
    for (int p = 1; p <= n_max; ++p) {
      for (const auto& orbit : primitive_periodic_orbits(sys.base, p)) {
        CompensatedSum<double> length;
        for (const auto& q : orbit.points) length += sys.roof(q.value());
        const double t_prim = length.value();
        for (int m = 1; m * t_prim <= t_max; ++m) {
          ClosedOrbit o;
          o.system_kind = SystemKind::Suspension;
          o.period = m * t_prim;
          o.primitive_period = t_prim;
          o.iterates = m * p;
          o.repetitions = m;
          o.is_primitive = m == 1;
          o.representative = orbit.points.front();
          census.orbits.push_back(o);
        }
      }
    }
  }
  sort_orbits(census.orbits);
  return census;
}

/// N(T): number of closed trajectories (primitive or not) with period <= T.
inline std::int64_t orbit_count_function(const OrbitCensus& census, double t) {
  if (t > census.horizon * (1 + 1e-12)) fail("HorizonExceeded", "T exceeds census horizon");
  std::int64_t n = 0;
  const double cut = t + 1e-12 * std::max(1.0, std::abs(t));
  for (const auto& o : census.orbits) {
    if (o.period > cut) break;
    n = checked_add(n, o.multiplicity);
  }
  return n;
}

// ---------------------------------------------------------------------------
// Fuchsian groups

namespace detail {

inline int letter_key(int l) { return 2 * (std::abs(l) - 1) + (l < 0 ? 1 : 0); }

inline bool word_less(const Word& a, const Word& b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end(),
                                      [](int x, int y) { return letter_key(x) < letter_key(y); });
}

inline Word inverse_word(const Word& w) {
  Word r(w.rbegin(), w.rend());
  for (int& l : r) l = -l;
  return r;
}

inline Word min_rotation(const Word& w) {
  Word best = w;
  Word cur = w;
  for (std::size_t i = 1; i < w.size(); ++i) {
    std::rotate(cur.begin(), cur.begin() + 1, cur.end());
    if (word_less(cur, best)) best = cur;
  }
  return best;
}

}  // namespace detail

/// Free and cyclic reduction.
inline Word cyclically_reduce(const Word& w) {
  Word r;
  for (int l : w) {
    if (!r.empty() && r.back() == -l)
      r.pop_back();
    else
      r.push_back(l);
  }
  std::size_t b = 0, e = r.size();
  while (e - b >= 2 && r[b] == -r[e - 1]) {
    ++b;
    --e;
  }
  return Word(r.begin() + static_cast<std::ptrdiff_t>(b), r.begin() + static_cast<std::ptrdiff_t>(e));
}

/// Canonical representative of the cyclic word up to rotation and inversion.
inline Word canonical_cyclic_word(const Word& w) {
  const Word reduced = cyclically_reduce(w);
  if (reduced.empty()) return reduced;
  Word a = detail::min_rotation(reduced);
  Word b = detail::min_rotation(detail::inverse_word(reduced));
  return detail::word_less(b, a) ? b : a;
}

/// Smallest k-th root: returns (root, k) with w = root^k.
inline std::pair<Word, int> primitive_root(const Word& w) {
  const std::size_t n = w.size();
  for (std::size_t d = 1; d <= n; ++d) {
    if (n % d != 0) continue;
    bool ok = true;
    for (std::size_t i = d; i < n && ok; ++i) ok = w[i] == w[i - d];
    if (ok) return {Word(w.begin(), w.begin() + static_cast<std::ptrdiff_t>(d)), static_cast<int>(n / d)};
  }
  return {w, 1};
}

inline double hyperbolic_length(double trace) { return 2.0 * std::acosh(std::abs(trace) / 2.0); }

/// Closed geodesic for a single group word, or nullopt when the word reduces
/// to the identity or the element is not hyperbolic.
inline std::optional<ClosedOrbit> fuchsian_orbit(const FuchsianSystem& sys, const Word& word) {
  const Word canon = canonical_cyclic_word(word);
  if (canon.empty()) return std::nullopt;
  const double tr = sys.evaluate(canon).trace();
  if (std::abs(tr) <= 2.0 + 1e-12) return std::nullopt;
  const auto [root, k] = primitive_root(canon);
  ClosedOrbit o;
  o.system_kind = SystemKind::Fuchsian;
  o.period = hyperbolic_length(tr);
  o.primitive_period = hyperbolic_length(sys.evaluate(root).trace());
  o.repetitions = k;
  o.is_primitive = k == 1;
  o.word = canon;
  return o;
}

/// One closed geodesic per conjugacy class of the free group (cyclic words up
/// to rotation and inversion) of reduced length <= max_word_length.
inline OrbitCensus enumerate_fuchsian_orbits(const FuchsianSystem& sys, int max_word_length) {
  if (max_word_length < 1) fail("InvalidArgument", "max_word_length must be >= 1");
  const int g = static_cast<int>(sys.generators.size());
  std::vector<int> letters;
  for (int i = 1; i <= g; ++i) {
    letters.push_back(i);
    letters.push_back(-i);
  }

  std::set<Word, decltype(&detail::word_less)> classes(&detail::word_less);
  Word w;
  auto extend = [&](auto&& self) -> void {
    if (!w.empty() && (w.size() == 1 || w.front() != -w.back())) classes.insert(canonical_cyclic_word(w));
    if (static_cast<int>(w.size()) == max_word_length) return;
    for (int l : letters) {
      if (!w.empty() && w.back() == -l) continue;
      w.push_back(l);
      self(self);
      w.pop_back();
    }
  };
  extend(extend);

  OrbitCensus census;
  census.system_kind = SystemKind::Fuchsian;
  census.horizon = std::numeric_limits<double>::infinity();
  for (const auto& c : classes) {
    const double tr = sys.evaluate(c).trace();
    if (std::abs(tr) <= 2.0 + 1e-12) {
      ++census.nonhyperbolic_skipped;
      continue;
    }
    census.orbits.push_back(*fuchsian_orbit(sys, c));
  }
  sort_orbits(census.orbits);
  for (std::size_t i = 1; i < census.orbits.size(); ++i)
    if (std::abs(census.orbits[i].period - census.orbits[i - 1].period) <= 1e-9) ++census.trace_coincidences;
  return census;
}

}  // namespace anosov

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "anosov/orbits.hpp"

using namespace anosov;

namespace {

std::string error_name(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.name();
  }
  return "";
}

// Fixed points of A^n have denominators dividing D = |det(A^n - I)|; count the
// grid points k/D that A^n fixes, in plain integer arithmetic.
std::int64_t brute_force_fixed_points(const IntMatrix2& a, int n) {
  IntMatrix2 an = IntMatrix2::identity();
  for (int i = 0; i < n; ++i) an = an * a;
  const std::int64_t det = (an(0, 0) - 1) * (an(1, 1) - 1) - an(0, 1) * an(1, 0);
  const std::int64_t d = det < 0 ? -det : det;
  std::int64_t count = 0;
  for (std::int64_t i = 0; i < d; ++i)
    for (std::int64_t j = 0; j < d; ++j) {
      const std::int64_t u = ((an(0, 0) - 1) * i + an(0, 1) * j) % d;
      const std::int64_t v = (an(1, 0) * i + (an(1, 1) - 1) * j) % d;
      if (u == 0 && v == 0) ++count;
    }
  return count;
}

// Order of Z^2 / M Z^2 as the product of invariant factors d1 * d2, with
// d1 = gcd of entries and d1 d2 = |det M|.
std::int64_t group_order_from_invariants(const IntMatrix2& m) {
  const std::int64_t d1 = std::gcd(std::gcd(m(0, 0), m(0, 1)), std::gcd(m(1, 0), m(1, 1)));
  const std::int64_t det = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
  return d1 * ((det < 0 ? -det : det) / d1);
}

}  // namespace

TEST_CASE("fixed point counts") {
  const auto cat = default_cat_map();
  CHECK(count_fixed_points(cat, 1) == 1);
  CHECK(count_fixed_points(cat, 2) == 5);
  CHECK(count_fixed_points(cat, 3) == 16);
  CHECK(cat.matrix.pow(3) == IntMatrix2{{13, 8, 8, 5}});
  for (int n = 1; n <= 6; ++n) {
    CHECK(count_fixed_points(cat, n) == brute_force_fixed_points(cat.matrix, n));
    CHECK(count_fixed_points(cat, n) == group_order_from_invariants(cat.matrix.pow(n) - IntMatrix2::identity()));
    CHECK(static_cast<std::int64_t>(periodic_points(cat, n).size()) == count_fixed_points(cat, n));
  }
  const auto other = build_cat_map(3, 2, 4, 3);
  for (int n = 1; n <= 4; ++n) CHECK(count_fixed_points(other, n) == brute_force_fixed_points(other.matrix, n));
}

TEST_CASE("periodic points are fixed") {
  const auto cat = default_cat_map();
  for (int n = 1; n <= 5; ++n)
    for (const auto& p : periodic_points(cat, n)) {
      Vec2 x = p.value();
      for (int i = 0; i < n; ++i) x = cat.map(x);
      CHECK(torus_distance(x, p.value()) <= 1e-9);
    }
}

TEST_CASE("overflow is reported") {
  const auto cat = default_cat_map();
  const int h = fixed_point_horizon(cat);
  CHECK(h >= 40);
  CHECK(error_name([&] { count_fixed_points(cat, h + 1); }) == "Overflow");
}

TEST_CASE("primitive orbit counts") {
  const auto cat = default_cat_map();
  const auto np = primitive_orbit_counts(cat, 10);
  const std::vector<std::int64_t> expected{1, 2, 5, 10, 24, 50, 120, 270, 640, 1500};
  for (int p = 1; p <= 10; ++p) CHECK(np.at(p) == expected[static_cast<std::size_t>(p - 1)]);
  for (int n = 1; n <= 10; ++n) {
    std::int64_t s = 0;
    for (int p = 1; p <= n; ++p)
      if (n % p == 0) s += p * np.at(p);
    CHECK(s == count_fixed_points(cat, n));
  }
  for (int p = 1; p <= 6; ++p) CHECK(static_cast<std::int64_t>(primitive_periodic_orbits(cat, p).size()) == np.at(p));
}

TEST_CASE("unit-roof census") {
  const auto sys = unit_suspension(default_cat_map());
  const auto c = enumerate_orbits(sys, 2.5);
  std::vector<std::pair<double, double>> rows;
  for (const auto& o : c.orbits)
    for (std::int64_t m = 0; m < o.multiplicity; ++m) rows.emplace_back(o.period, o.primitive_period);
  const std::vector<std::pair<double, double>> expected{{1, 1}, {2, 1}, {2, 2}, {2, 2}};
  CHECK(rows == expected);

  CHECK(enumerate_orbits(sys, 0.5).orbits.empty());
  for (const auto& o : c.orbits) CHECK(o.period == o.repetitions * o.primitive_period);

  const auto c3 = enumerate_orbits(sys, 3.0);
  CHECK(orbit_count_function(c3, 1.0) == 1);
  CHECK(orbit_count_function(c3, 2.0) == 4);
  CHECK(orbit_count_function(c3, 0.5) == 0);
  CHECK(error_name([&] { orbit_count_function(c3, 3.5); }) == "HorizonExceeded");

  const auto explicit_census = enumerate_orbits(sys, 6.0, true);
  const auto summary = enumerate_orbits(sys, 6.0);
  CHECK(explicit_census.total_orbits() == summary.total_orbits());
}

TEST_CASE("variable roof census") {
  const auto sys = build_suspension(default_cat_map(), TrigPolynomial{1.0, {{1, 0, 0.1, 0.0}}});
  const auto c = enumerate_orbits(sys, 4.0);
  REQUIRE(!c.orbits.empty());
  CHECK(c.orbits.front().period == doctest::Approx(1.1).epsilon(1e-12));
  for (const auto& o : c.orbits) {
    CHECK(std::abs(o.period - o.repetitions * o.primitive_period) <= 1e-9);
    // Landing just below the roof is the same point as landing at height 0.
    auto p = flow(sys, {o.representative->value(), 0.0}, o.period);
    if (sys.roof(p.x) - p.s <= 1e-9) p = {sys.base.map(p.x), 0.0};
    CHECK(torus_distance(p.x, o.representative->value()) <= 1e-9);
    CHECK(p.s <= 1e-9);
  }
}

TEST_CASE("orbit growth") {
  const auto cat = default_cat_map();
  const auto sys = unit_suspension(cat);
  const auto c = enumerate_orbits(sys, 12.0);
  std::vector<double> ts, logs;
  for (int t = 6; t <= 12; ++t) {
    ts.push_back(t);
    logs.push_back(std::log(static_cast<double>(t) * static_cast<double>(orbit_count_function(c, t))));
  }
  const double h = least_squares(ts, logs).slope;
  CHECK(h >= 0.9 * cat.entropy);
  CHECK(h <= 1.05 * cat.entropy);

  const double L = estimate_L(sys, {2, 4, 6, 8, 10});
  double c_fit = 0.0;
  for (int t = 1; t <= 12; ++t)
    c_fit = std::max(c_fit, static_cast<double>(orbit_count_function(c, t)) * std::exp(-h * t));
  for (double t = 1.0; t <= 12.0; t += 0.25)
    CHECK(static_cast<double>(orbit_count_function(c, t)) <= c_fit * std::exp(5.0 * L * t));
}

TEST_CASE("fuchsian words") {
  CHECK(cyclically_reduce({1, -1}).empty());
  CHECK(cyclically_reduce({2, 1, -1, 3, -2}) == Word{3});
  CHECK(canonical_cyclic_word({2, 1}) == canonical_cyclic_word({1, 2}));
  CHECK(canonical_cyclic_word({-1, -2}) == canonical_cyclic_word({2, 1}));
  const auto [root, k] = primitive_root({1, 2, 1, 2});
  CHECK(k == 2);
  CHECK(root.size() == 2);
}

TEST_CASE("fuchsian orbits") {
  const auto surf = sample_genus2_surface();
  const auto g = fuchsian_orbit(surf, {1});
  REQUIRE(g);
  CHECK(g->period == doctest::Approx(2.0 * std::acosh(1.0 + std::sqrt(2.0))).epsilon(1e-12));
  CHECK(g->period == doctest::Approx(3.0571).epsilon(1e-4));
  CHECK(!fuchsian_orbit(surf, {1, -1}));
  const auto g2 = fuchsian_orbit(surf, {1, 1});
  REQUIRE(g2);
  CHECK(!g2->is_primitive);
  CHECK(g2->period == doctest::Approx(2.0 * g->period).epsilon(1e-12));

  const auto census = enumerate_fuchsian_orbits(surf, 3);
  for (const auto& o : census.orbits) CHECK(std::abs(o.period - o.repetitions * o.primitive_period) <= 1e-9);

  FuchsianSystem inverted = surf;
  for (auto& m : inverted.generators) m = Matrix2(m.inverse());
  const auto census_inv = enumerate_fuchsian_orbits(inverted, 3);
  REQUIRE(census.orbits.size() == census_inv.orbits.size());
  for (std::size_t i = 0; i < census.orbits.size(); ++i) {
    CHECK(std::abs(census.orbits[i].period - census_inv.orbits[i].period) <= 1e-9);
    CHECK(std::abs(census.orbits[i].primitive_period - census_inv.orbits[i].primitive_period) <= 1e-9);
  }
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "anosov/systems.hpp"

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

}  // namespace

TEST_CASE("cat map eigendata") {
  const auto cat = build_cat_map(2, 1, 1, 1);
  CHECK(cat.unstable_eigenvalue == doctest::Approx((3.0 + std::sqrt(5.0)) / 2.0).epsilon(1e-14));
  CHECK(cat.entropy == doctest::Approx(0.9624236501192069).epsilon(1e-14));
  CHECK(std::abs(cat.unstable_multiplier * cat.stable_multiplier() - 1.0) < 1e-14);

  const Eigen::Matrix2d a = cat.real_matrix();
  const Eigen::Vector2d vu(cat.unstable_direction[0], cat.unstable_direction[1]);
  const Eigen::Vector2d vs(cat.stable_direction[0], cat.stable_direction[1]);
  CHECK((a * vu - cat.unstable_multiplier * vu).norm() < 1e-12);
  CHECK((a * vs - cat.stable_multiplier() * vs).norm() < 1e-12);
  CHECK(std::abs(vs[0] * vu[1] - vs[1] * vu[0]) > 0.1);
}

TEST_CASE("cat map rejects non-Anosov input") {
  CHECK(error_name([] { build_cat_map(1, 1, 0, 1); }) == "NotHyperbolic");
  CHECK(error_name([] { build_cat_map(1, 1, 1, 0); }) == "NotUnimodular");
  CHECK(error_name([] { build_cat_map(-2, 1, 1, -1); }) == "");
}

TEST_CASE("suspension construction") {
  const auto cat = default_cat_map();
  const auto sys = build_suspension(cat, TrigPolynomial{1.0, {{1, 0, 0.1, 0.0}}});
  CHECK(sys.min_roof == doctest::Approx(0.9).epsilon(1e-12));
  CHECK(error_name([&] { build_suspension(cat, TrigPolynomial{-1.0, {}}); }) == "NonPositiveRoof");
}

TEST_CASE("flow examples") {
  const auto sys = unit_suspension(default_cat_map());
  auto p = flow(sys, {{0.0, 0.0}, 0.0}, 1.0);
  CHECK(p.x[0] == 0.0);
  CHECK(p.x[1] == 0.0);
  CHECK(p.s == 0.0);

  p = flow(sys, {{0.3, 0.7}, 0.0}, 0.5);
  CHECK(p.x[0] == doctest::Approx(0.3));
  CHECK(p.x[1] == doctest::Approx(0.7));
  CHECK(p.s == doctest::Approx(0.5));

  p = flow(sys, {{0.3, 0.7}, 0.2}, 0.0);
  CHECK(p.s == 0.2);

  // Unit roof: integer time is exactly one map iterate per unit.
  const Vec2 x{0.125, 0.375};
  p = flow(sys, {x, 0.0}, 3.0);
  const Vec2 y = sys.base.map(sys.base.map(sys.base.map(x)));
  CHECK(p.x[0] == y[0]);
  CHECK(p.x[1] == y[1]);
}

TEST_CASE("flow group law") {
  const auto cat = default_cat_map();
  for (const auto& sys : {unit_suspension(cat), build_suspension(cat, TrigPolynomial{1.0, {{1, 0, 0.1, 0.3}}})}) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0), tt(-3.0, 3.0);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
      const Vec2 x{u(rng), u(rng)};
      const SuspensionPoint p{x, u(rng) * sys.roof(x)};
      const double t1 = tt(rng), t2 = tt(rng);
      const auto a = flow(sys, flow(sys, p, t1), t2);
      const auto b = flow(sys, p, t1 + t2);
      worst = std::max({worst, torus_distance(a.x, b.x), std::abs(a.s - b.s)});
    }
    CHECK(worst <= 1e-10);
  }
}

TEST_CASE("estimate_L") {
  const auto cat = default_cat_map();
  const std::vector<double> ts{2, 4, 6, 8, 10};
  const double l1 = estimate_L(unit_suspension(cat), ts);
  CHECK(std::abs(l1 - cat.entropy) <= 0.05);
  const double l2 = estimate_L(build_suspension(cat, TrigPolynomial{2.0, {}}), {4, 8, 12, 16, 20});
  CHECK(std::abs(l2 / l1 - 0.5) <= 0.05);
  CHECK(error_name([&] { estimate_L(unit_suspension(cat), {1.0}); }) == "DegenerateFit");
}

TEST_CASE("stable vectors contract at rate theta") {
  const auto cat = default_cat_map();
  const auto sys = build_suspension(cat, TrigPolynomial{1.0, {{1, 0, 0.1, 0.0}, {0, 1, 0.05, 1.0}}});
  const double theta = cat.entropy / sys.max_roof;
  const Vec2 x{0.21, 0.62};
  const Eigen::Vector3d v = flow_stable_vector(sys, x);
  std::vector<double> ts, logs;
  for (int t = 1; t <= 10; ++t) {
    const Eigen::Vector3d w = flow_jacobian(sys, {x, 0.0}, t) * v;
    ts.push_back(t);
    logs.push_back(std::log(w.norm() / v.norm()));
  }
  CHECK(least_squares(ts, logs).slope <= -0.9 * theta);
}

TEST_CASE("fuchsian sample surface") {
  const auto surf = sample_genus2_surface();
  CHECK(surf.generators.size() == 4);
  for (const auto& g : surf.generators) CHECK(std::abs(g.determinant() - 1.0) <= 1e-12);
  for (const auto& w : surf.relation_words) {
    const Matrix2 m = surf.evaluate(w);
    const double dev = std::min((m - Matrix2::Identity()).cwiseAbs().maxCoeff(),
                                (m + Matrix2::Identity()).cwiseAbs().maxCoeff());
    CHECK(dev <= 1e-9);
  }
  CHECK(format_word(parse_word("aBcDAbCd")) == "aBcDAbCd");
  CHECK(parse_word("aB") == Word{1, -2});
  CHECK(error_name([] { parse_word("a1"); }) == "ConfigError");

  Matrix2 bad;
  bad << 2, 0, 0, 1;
  CHECK(error_name([&] { build_fuchsian({bad}); }) == "NotUnimodular");
  CHECK(error_name([&] { build_fuchsian(surf.generators, {Word{1}}); }) == "RelationFailed");
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "anosov/zeta.hpp"

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

struct Fixture {
  CatMapSystem cat = default_cat_map();
  SuspensionSystem sys = unit_suspension(cat);
  OrbitSpectrum spec = attach_poincare(enumerate_orbits(sys, 25.0), sys);
  GrowthLaw growth = fit_growth_law(spec, 6.0, 12.0);
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

// Independent resummation: -sum_n Fix(n) z^n / n with Fix(n) = mu^n + mu^-n - 2
// is log(1 - mu z) + log(1 - z/mu) - 2 log(1 - z).
Complex log_zeta_closed(double mu, Complex lambda) {
  const Complex z = std::exp(Complex(0, 1) * lambda);
  return std::log(1.0 - mu * z) + std::log(1.0 - z / mu) - 2.0 * std::log(1.0 - z);
}

}  // namespace

TEST_CASE("entropy fit") {
  const auto& f = fixture();
  CHECK(f.growth.exponent >= 0.9 * f.cat.entropy);
  CHECK(f.growth.exponent <= 1.05 * f.cat.entropy);
}

TEST_CASE("log zeta_R") {
  const auto& f = fixture();
  const Complex l(0.7, 3.0);
  const auto ev = log_zeta_R(f.spec, f.growth, l, 25.0);
  const Complex closed = (1.0 - f.cat.unstable_eigenvalue * std::exp(Complex(0, 1) * l)) *
                         (1.0 - std::exp(Complex(0, 1) * l) / f.cat.unstable_eigenvalue) /
                         std::pow(1.0 - std::exp(Complex(0, 1) * l), 2);
  CHECK(std::abs(std::exp(ev.value) - closed) <= 1e-6);
  CHECK(std::abs(ev.value - log_zeta_closed(f.cat.unstable_eigenvalue, l)) <= 1e-6);

  const auto inf = log_zeta_R(f.spec, f.growth, Complex(0, std::numeric_limits<double>::infinity()), 25.0);
  CHECK(inf.value == Complex(0.0));
  CHECK(error_name([&] { log_zeta_R(f.spec, f.growth, Complex(0, 0.5), 25.0); }) == "NotInConvergenceRegion");
}

TEST_CASE("zeta_1 telescopes") {
  const auto& f = fixture();
  const Complex a(1, 2);
  CHECK(std::abs(zeta_1(f.spec, f.growth, a, 25.0).value - (1.0 - std::exp(Complex(0, 1) * a))) <= 1e-8);
  const Complex b(std::numbers::pi, 5);
  CHECK(std::abs(zeta_1(f.spec, f.growth, b, 25.0).value - (1.0 + std::exp(-5.0))) <= 1e-10);
  CHECK(zeta_1(OrbitSpectrum{}, f.growth, b, 25.0).value == Complex(1.0));

  double worst = 0.0;
  for (int i = 0; i < 20; ++i)
    for (int j = 0; j < 5; ++j) {
      const Complex l(-std::numbers::pi + 2.0 * std::numbers::pi * i / 19.0, 3.0 + j);
      worst = std::max(worst, std::abs(zeta_1(f.spec, f.growth, l, 25.0).value - (1.0 - std::exp(Complex(0, 1) * l))));
    }
  CHECK(worst <= 1e-6);
}

TEST_CASE("degree factors") {
  const auto& f = fixture();
  for (double x : {-2.0, 0.0, 0.4, 1.3}) {
    const Complex l(x, 4.0);
    const Complex z = std::exp(Complex(0, 1) * l);
    const Complex closed = z / (1.0 - z) / Complex(0, 1);
    CHECK(std::abs(f_k(f.spec, f.growth, 0, l, 25.0).value - closed) <= 1e-7);
    CHECK(std::abs(f_k(f.spec, f.growth, 2, l, 25.0).value - closed) <= 1e-7);
  }
  CHECK(error_name([&] { f_k(f.spec, f.growth, 3, Complex(0, 4), 25.0); }) == "DegreeOutOfRange");
}

TEST_CASE("tail certificate") {
  const auto& f = fixture();
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> re(-std::numbers::pi, std::numbers::pi), im(3.0, 6.0);
  for (int i = 0; i < 50; ++i) {
    const Complex l(re(rng), im(rng));
    const auto a = log_zeta_R(f.spec, f.growth, l, 15.0);
    const auto b = log_zeta_R(f.spec, f.growth, l, 25.0);
    CHECK(std::abs(a.value - b.value) <= a.tail_bound);
    const auto c = zeta_1(f.spec, f.growth, l, 15.0);
    const auto d = zeta_1(f.spec, f.growth, l, 25.0);
    CHECK(std::abs(c.value - d.value) <= c.tail_bound);
    for (int k = 0; k <= 2; ++k) {
      const auto e = f_k(f.spec, f.growth, k, l, 15.0);
      const auto g = f_k(f.spec, f.growth, k, l, 25.0);
      CHECK(std::abs(e.value - g.value) <= e.tail_bound);
    }
  }
}

TEST_CASE("factorization") {
  const auto& f = fixture();
  const int q = determine_q(f.spec);
  CHECK(zeta_factorization_check(f.spec, f.growth, Complex(1, 3), q, 25.0).discrepancy <= 1e-6);
  CHECK(zeta_factorization_check(f.spec, f.growth, Complex(1, 8), q, 25.0).discrepancy <= 1e-10);

  OrbitSpectrum toy;
  toy.horizon = 3.0;
  toy.records.push_back({2.5, 2.5, 1, 1, true, 2.0 - 2.0 * std::cosh(2.5), 2.0 * std::cosh(2.5) - 2.0,
                         {1.0, 2.0 * std::cosh(2.5), 1.0}});
  const GrowthLaw toy_growth{0.5, 1.0};
  CHECK(zeta_factorization_check(toy, toy_growth, Complex(0.3, 2.0), 1, 3.0).discrepancy <= 1e-12);

  for (int i = 0; i < 20; ++i)
    for (int j = 0; j < 5; ++j) {
      const Complex l(-std::numbers::pi + 2.0 * std::numbers::pi * i / 19.0, 3.0 + j);
      const auto rep = zeta_factorization_check(f.spec, f.growth, l, q, 25.0);
      CHECK(rep.discrepancy <= rep.combined_tail);
    }
}

TEST_CASE("continuation oracle") {
  const auto& f = fixture();
  const auto oracle = continuation_oracle(f.sys);
  CHECK(std::abs(oracle.zeta_R(Complex(0, f.cat.entropy))) <= 1e-12);

  const Complex small(1e-3, 0.0), smaller(1e-4, 0.0);
  const Complex limit_a = oracle.zeta_R(small) * small * small;
  const Complex limit_b = oracle.zeta_R(smaller) * smaller * smaller;
  CHECK(std::abs(limit_a) > 0.1);
  CHECK(std::abs(limit_a - limit_b) <= 1e-2 * std::abs(limit_b));

  const Complex l(1, 3);
  const auto ev = log_zeta_R(f.spec, f.growth, l, 25.0);
  CHECK(std::abs(oracle.zeta_R(l) - std::exp(ev.value)) <= std::abs(std::exp(ev.value)) * std::expm1(ev.tail_bound) + 1e-15);

  const auto sing = locate_singularities(oracle, -1.0, 7.0, -1.5, 1.5);
  std::vector<std::pair<Complex, int>> got;
  for (const auto& s : sing) got.emplace_back(s.center, s.winding);
  // zeros at 0 +- i h and 2 pi +- i h (rounded to the 0.1 lattice), double poles at 0 and 2 pi
  REQUIRE(got.size() == 6);
  int zeros = 0, poles = 0;
  for (const auto& [c, w] : got) {
    if (w == 1) {
      ++zeros;
      CHECK(std::abs(std::abs(c.imag()) - f.cat.entropy) <= 0.05 + 1e-9);
    } else {
      CHECK(w == -2);
      ++poles;
      CHECK(std::abs(c.imag()) <= 1e-12);
    }
  }
  CHECK(zeros == 4);
  CHECK(poles == 2);

  for (const Complex p : {Complex(0.3, 0.2), Complex(-1.1, 2.0), Complex(2.0, -0.7)})
    CHECK(std::abs(oracle.zeta_R(p + 2.0 * std::numbers::pi) - oracle.zeta_R(p)) <=
          1e-12 * std::max(1.0, std::abs(oracle.zeta_R(p))));

  const auto varied = build_suspension(f.cat, TrigPolynomial{1.0, {{1, 0, 0.1, 0.0}}});
  CHECK(error_name([&] { continuation_oracle(varied); }) == "NoClosedForm");
}

TEST_CASE("residues of f0") {
  const auto oracle = continuation_oracle(fixture().sys);
  const auto r0 = residue_check_f0(oracle, 0.0);
  CHECK(std::abs(r0.residue - 1.0) <= 1e-6);
  CHECK(std::abs(r0.limit_value - 1.0) <= 1e-6);
  CHECK(std::abs(r0.contour_value - 1.0) <= 1e-6);
  CHECK(std::abs(residue_check_f0(oracle, 2.0 * std::numbers::pi).residue - 1.0) <= 1e-6);
  const auto r1 = residue_check_f0(oracle, 1.0);
  CHECK(std::abs(r1.residue) <= 1e-6);
  CHECK(std::abs(r1.limit_value) <= 1e-6);
}

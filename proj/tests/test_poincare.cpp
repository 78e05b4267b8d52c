#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "anosov/orbits.hpp"
#include "anosov/poincare.hpp"

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

// Elementary symmetric functions of the eigenvalues, straight from the
// characteristic polynomial coefficients computed by expansion over subsets
// of principal minors.
std::vector<double> wedge_by_minors(const Eigen::MatrixXd& p) {
  const int d = static_cast<int>(p.rows());
  std::vector<double> e(static_cast<std::size_t>(d) + 1, 0.0);
  for (unsigned mask = 0; mask < (1u << d); ++mask) {
    std::vector<int> idx;
    for (int i = 0; i < d; ++i)
      if (mask & (1u << i)) idx.push_back(i);
    const int k = static_cast<int>(idx.size());
    Eigen::MatrixXd sub(k, k);
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < k; ++j) sub(i, j) = p(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
    e[static_cast<std::size_t>(k)] += k == 0 ? 1.0 : sub.determinant();
  }
  return e;
}

}  // namespace

TEST_CASE("wedge trace examples") {
  Eigen::MatrixXd a2(2, 2);
  a2 << 5, 3, 3, 2;
  CHECK(wedge_traces(a2) == std::vector<double>{1, 7, 1});
  CHECK(wedge_traces(Eigen::MatrixXd::Identity(2, 2)) == std::vector<double>{1, 2, 1});
  CHECK(wedge_traces(Eigen::MatrixXd::Zero(2, 2)) == std::vector<double>{1, 0, 0});
}

TEST_CASE("wedge trace identity on random matrices") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 200; ++trial) {
    const int d = 2 + trial % 3;
    Eigen::MatrixXd p(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) p(i, j) = g(rng);
    const auto w = wedge_traces(p);
    const auto oracle = wedge_by_minors(p);
    for (int k = 0; k <= d; ++k)
      CHECK(std::abs(w[static_cast<std::size_t>(k)] - oracle[static_cast<std::size_t>(k)]) <=
            1e-9 * std::max(1.0, std::abs(oracle[static_cast<std::size_t>(k)])));
    const double det = (Eigen::MatrixXd::Identity(d, d) - p).determinant();
    CHECK(std::abs(alternating_wedge_sum(w) - det) <= 1e-9 * std::max(1.0, std::abs(det)));
  }
}

TEST_CASE("nilpotent traces vanish") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> u(-5, 5);
  for (int d = 2; d <= 5; ++d) {
    Eigen::MatrixXd n = Eigen::MatrixXd::Zero(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = i + 1; j < d; ++j) n(i, j) = u(rng);
    Eigen::MatrixXd pw = Eigen::MatrixXd::Identity(d, d);
    for (int j = 1; j <= d; ++j) {
      pw = pw * n;
      CHECK(pw.trace() == 0.0);
    }
  }
}

TEST_CASE("cat suspension Poincare maps") {
  const auto cat = default_cat_map();
  CHECK(cat_poincare_map(cat, 1).det_I_minus_P == -1.0);
  CHECK(cat_poincare_map(cat, 2).det_I_minus_P == -5.0);
  for (int n = 1; n <= 8; ++n) {
    const auto pd = cat_poincare_map(cat, n);
    const Eigen::MatrixXd standard = cat_poincare_standard(cat, n);
    const double det = (Eigen::MatrixXd::Identity(2, 2) - standard).determinant();
    CHECK(std::abs(pd.det_I_minus_P - det) <= 1e-9 * std::abs(det));
    CHECK(std::abs(alternating_wedge_sum(pd.wedge_traces) - pd.det_I_minus_P) <= 1e-9 * pd.abs_det);
    const auto w = wedge_traces(standard);
    for (int k = 0; k <= 2; ++k)
      CHECK(std::abs(w[static_cast<std::size_t>(k)] - pd.wedge_traces[static_cast<std::size_t>(k)]) <=
            1e-9 * std::max(1.0, std::abs(w[static_cast<std::size_t>(k)])));
    CHECK(std::abs(pd.abs_det - (pd.sign_q % 2 ? -1.0 : 1.0) * pd.det_I_minus_P) <= 1e-12);
  }
}

TEST_CASE("sign q over the census") {
  const auto cat = default_cat_map();
  const auto sys = unit_suspension(cat);
  const auto census = enumerate_orbits(sys, 20.0);
  const auto spec = attach_poincare(census, sys);
  CHECK(determine_q(spec) == 1);
  for (int n = 1; n <= 20; ++n) CHECK(-(2 - trace_of_power(cat, n)) > 0);

  const auto surf = sample_genus2_surface();
  const auto fspec = attach_poincare(enumerate_fuchsian_orbits(surf, 2), surf);
  CHECK(determine_q(fspec) == 1);

  OrbitSpectrum mixed = spec;
  mixed.records.resize(3);
  mixed.records[2].det_I_minus_P = 3.0;
  CHECK(error_name([&] { determine_q(mixed); }) == "SignNotConstant");
}

TEST_CASE("fuchsian Poincare maps") {
  const auto surf = sample_genus2_surface();
  const auto o = fuchsian_orbit(surf, {1, 2});
  REQUIRE(o);
  const auto pd = poincare_map(*o, surf);
  CHECK(pd.det_I_minus_P == doctest::Approx(2.0 - 2.0 * std::cosh(o->period)).epsilon(1e-12));
  CHECK(std::abs(alternating_wedge_sum(pd.wedge_traces) - pd.det_I_minus_P) <= 1e-9 * pd.abs_det);
}

TEST_CASE("Poincare map is conjugation invariant along the orbit") {
  const auto sys = build_suspension(default_cat_map(), TrigPolynomial{1.0, {{1, 0, 0.1, 0.0}, {1, 1, 0.05, 0.4}}});
  const auto census = enumerate_orbits(sys, 4.0);
  for (const auto& o : census.orbits) {
    if (o.iterates < 2) continue;
    const Eigen::Matrix2d p0 = suspension_poincare_at(sys, o, 0);
    const Eigen::Matrix2d p1 = suspension_poincare_at(sys, o, 1);
    CHECK(std::abs(p0.trace() - p1.trace()) <= 1e-9 * std::max(1.0, std::abs(p0.trace())));
    CHECK(std::abs(p0.determinant() - p1.determinant()) <= 1e-9);
  }
}

TEST_CASE("nilpotent residue") {
  const Complex l0(0.3, -0.2);
  const double t0 = 1.7;
  const auto phi = exp_series(t0, l0, 8);

  Eigen::MatrixXcd a1(1, 1);
  a1(0, 0) = l0;
  CHECK(std::abs(nilpotent_residue(make_residue_probe(a1, l0, 1), phi) - std::exp(Complex(0, -t0) * l0)) <= 1e-9);

  Eigen::MatrixXcd a2(2, 2);
  a2 << l0, 1.0, 0.0, l0;
  const auto p2 = make_residue_probe(a2, l0, 2);
  CHECK(std::abs(nilpotent_residue(p2, phi) - 2.0 * std::exp(Complex(0, -t0) * l0)) <= 1e-9);
  CHECK(std::abs(nilpotent_residue_contour(p2, phi, 0.5) - 2.0 * std::exp(Complex(0, -t0) * l0)) <= 1e-9);

  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  Eigen::MatrixXcd a3 = l0 * Eigen::MatrixXcd::Identity(3, 3);
  a3(0, 1) = g(rng);
  a3(0, 2) = g(rng);
  a3(1, 2) = g(rng);
  const auto p3 = make_residue_probe(a3, l0, 3);
  const Complex expected = 3.0 * std::exp(Complex(0, -t0) * l0);
  CHECK(std::abs(nilpotent_residue(p3, phi) - expected) <= 1e-9);

  // Brute-force: (l - l0) tr(phi(A) sum_j N^{j-1}/(l - l0)^j) at l - l0 = 10^-k,
  // with phi(A) from the exact matrix exponential; Richardson in the step.
  const Eigen::MatrixXcd n = a3 - l0 * Eigen::MatrixXcd::Identity(3, 3);
  const Eigen::MatrixXcd phi_a = std::exp(Complex(0, -t0) * l0) *
                                 (Eigen::MatrixXcd::Identity(3, 3) + Complex(0, -t0) * n +
                                  0.5 * Complex(0, -t0) * Complex(0, -t0) * n * n);
  std::vector<Complex> vals;
  for (int k = 3; k <= 6; ++k) {
    const double h = std::pow(10.0, -k);
    Eigen::MatrixXcd s = Eigen::MatrixXcd::Zero(3, 3);
    Eigen::MatrixXcd pw = Eigen::MatrixXcd::Identity(3, 3);
    for (int j = 1; j <= 3; ++j) {
      s += pw / std::pow(h, j);
      pw = pw * n;
    }
    vals.push_back(h * (phi_a * s).trace());
  }
  const Complex rich = (10.0 * vals[3] - vals[2]) / 9.0;
  CHECK(std::abs(rich - expected) <= 1e-9);

  Eigen::MatrixXcd bad(2, 2);
  bad << l0, 1.0, 1.0, l0;
  CHECK(error_name([&] { make_residue_probe(bad, l0, 2); }) == "NotNilpotent");
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "anosov/anisotropic.hpp"
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

const CatMapSystem& cat() {
  static const CatMapSystem c = default_cat_map();
  return c;
}

const CodirectionMap& codir() {
  static const CodirectionMap c = codirection_map(cat());
  return c;
}

double angle_of(double x, double y) { return std::atan2(y, x); }

// Circle map induced by a 2x2 matrix, straight from the definition.
double circle_map(const Eigen::Matrix2d& m, double t) {
  const Eigen::Vector2d v = m * Eigen::Vector2d(std::cos(t), std::sin(t));
  return angle_of(v[0], v[1]);
}

double line_gap(double a, double b) {
  double d = std::fmod(std::abs(a - b), std::numbers::pi);
  return std::min(d, std::numbers::pi - d);
}

Eigen::Matrix2d transpose_matrix() { return cat().real_matrix().transpose(); }

}  // namespace

TEST_CASE("codirection dynamics has a radial source and sink") {
  const auto& c = codir();
  const Eigen::Matrix2d at = transpose_matrix();
  // eigen lines of A^T from Eigen's symmetric solver
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(at);
  const Eigen::Vector2d contracting = es.eigenvectors().col(0), expanding = es.eigenvectors().col(1);
  CHECK(line_gap(c.source_direction, angle_of(contracting[0], contracting[1])) <= 1e-12);
  CHECK(line_gap(c.sink_direction, angle_of(expanding[0], expanding[1])) <= 1e-12);

  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, kTwoPi);
  for (int i = 0; i < 100; ++i) {
    double t = u(rng);
    for (int k = 0; k < 60; ++k) t = c.B(t);
    CHECK(c.distance_to_sink(t) <= 1e-6);
  }

  const Eigen::Matrix2d inv = at.inverse();
  int forward_bad = 0, backward_bad = 0;
  for (int i = 0; i < kDirectionGrid; ++i) {
    const double t0 = kTwoPi * i / kDirectionGrid;
    if (line_gap(t0, c.source_direction) > 1e-3) {
      double t = t0;
      for (int k = 0; k < 80; ++k) t = circle_map(at, t);
      if (line_gap(t, c.sink_direction) > 1e-6) ++forward_bad;
    }
    if (line_gap(t0, c.sink_direction) > 1e-3) {
      double t = t0;
      for (int k = 0; k < 80; ++k) t = circle_map(inv, t);
      if (line_gap(t, c.source_direction) > 1e-6) ++backward_bad;
    }
  }
  CHECK(forward_bad == 0);
  CHECK(backward_bad == 0);
}

TEST_CASE("expansion off the stable codirection") {
  const auto& c = codir();
  CHECK(c.expansion_constant >= 1.0);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, kTwoPi);
  for (int i = 0; i < 200; ++i) {
    const double t = u(rng);
    if (c.distance_to_source(t) < 0.1) continue;
    for (int k = 1; k <= 15; ++k) {
      const IntMatrix2 p = c.matrix.pow(k);
      const double x = std::cos(t), y = std::sin(t);
      const double n = std::hypot(p(0, 0) * x + p(0, 1) * y, p(1, 0) * x + p(1, 1) * y);
      CHECK(n * c.expansion_constant >= std::pow(cat().unstable_eigenvalue, k) * (1.0 - 1e-12));
    }
  }
}

TEST_CASE("conjugacy escape function") {
  const auto w = conjugacy_escape_weight(codir(), 0.15, 2.0);
  const auto mono = check_monotonicity(w);
  CHECK(mono.violations == 0);
  const auto g = w.grid_values();
  REQUIRE(g.size() == kDirectionGrid);
  for (int i = 0; i < kDirectionGrid; ++i) {
    const double t = kTwoPi * i / kDirectionGrid;
    const double v = g[static_cast<std::size_t>(i)];
    CHECK(v >= -1.0);
    CHECK(v <= 1.0);
    if (codir().distance_to_source(t) < 0.15) CHECK(v == 1.0);
    if (codir().distance_to_sink(t) < 0.15) CHECK(v == -1.0);
  }
  // monotone along the dynamics, checked with an independent circle map
  const Eigen::Matrix2d at = transpose_matrix();
  int bad = 0;
  for (int i = 0; i < kDirectionGrid; ++i) {
    const double t = kTwoPi * i / kDirectionGrid;
    if (w.m_G(circle_map(at, t)) > w.m_G(t) + 1e-12) ++bad;
  }
  CHECK(bad == 0);
  CHECK(error_name([] { conjugacy_escape_weight(codir(), 0.8); }) == "NeighborhoodsOverlap");
}

TEST_CASE("averaged escape function") {
  const auto w = build_escape_m_G(codir(), 0.15, 20);
  CHECK(check_monotonicity(w).violations == 0);
  for (double v : w.grid_values()) {
    CHECK(v >= -1.0);
    CHECK(v <= 1.0);
  }
  CHECK(error_name([] { build_escape_m_G(codir(), 0.15, 1); }) == "MonotonicityFailed");
  CHECK(error_name([] { build_escape_m_G(codir(), 0.8, 20); }) == "NeighborhoodsOverlap");
  CHECK(error_name([] { build_escape_m_G(codir(), 0.15, 0); }) == "InvalidWindow");
}

TEST_CASE("escape function f1") {
  const auto f = build_escape_f1(codir(), 0.2, 10);
  CHECK(f.decay_c >= 0.3);
  CHECK(f.norm_c > 0.0);
  std::mt19937_64 rng(9);
  std::normal_distribution<double> g;
  for (int i = 0; i < 100; ++i) {
    const Eigen::Vector2d xi(g(rng), g(rng));
    CHECK(f(2.0 * xi) == 2.0 * f(xi));
    CHECK(f(xi) >= f.norm_c * xi.norm());
    CHECK(f(xi) <= xi.norm() / f.norm_c);
  }
  // decay on the cone against a direct sum over backward images
  const Eigen::Matrix2d at = transpose_matrix(), inv = at.inverse();
  auto direct = [&](Eigen::Vector2d v) {
    double s = 0.0;
    for (int t = 0; t < 10; ++t) {
      s += v.norm();
      v = inv * v;
    }
    return s;
  };
  for (int i = -50; i <= 50; ++i) {
    const double t = codir().source_direction + 0.2 * i / 50.0;
    const Eigen::Vector2d v(std::cos(t), std::sin(t));
    CHECK(direct(at * v) <= (1.0 - f.decay_c) * direct(v) * (1.0 + 1e-12));
  }
  CHECK(error_name([] { build_escape_f1(codir(), 0.2, 0); }) == "EmptySum");
  // a cone containing the sink has no decay
  CHECK(error_name([] { build_escape_f1(codir(), 1.6, 10); }) == "ConeNotExpanding");
}

TEST_CASE("linear operator structure") {
  const auto w = conjugacy_escape_weight(codir(), 0.15, 2.0);
  const auto op = assemble_operator(shear_perturbation(cat(), 0.0), w, 8);
  CHECK(op.linear);
  const int zero = op.index(0, 0);
  int count = 0;
  for (SparseOperator::InnerIterator it(op.matrix, zero); it; ++it) {
    ++count;
    CHECK(it.row() == zero);
    CHECK(it.value() == Complex(1.0));
  }
  CHECK(count == 1);
  for (int c = 0; c < op.size(); ++c) {
    const auto m = op.point(c);
    const std::int64_t k1 = 2 * m[0] + m[1], k2 = m[0] + m[1];  // A^T m for A = [[2,1],[1,1]]
    int nz = 0;
    for (SparseOperator::InnerIterator it(op.matrix, c); it; ++it) {
      ++nz;
      const auto k = op.point(static_cast<int>(it.row()));
      CHECK(k[0] == k1);
      CHECK(k[1] == k2);
      CHECK(std::abs(it.value().real() - w.weight(k[0], k[1]) / w.weight(m[0], m[1])) <=
            1e-12 * std::abs(it.value().real()));
    }
    CHECK(nz == (std::max(std::abs(k1), std::abs(k2)) <= 8 ? 1 : 0));
  }
  CHECK(error_name([&] { assemble_operator(shear_perturbation(cat(), 0.0), w, 3); }) == "TruncationTooSmall");
  CHECK(error_name([&] { assemble_operator(shear_perturbation(cat(), 0.0), w, 33); }) == "MatrixTooLarge");
}

TEST_CASE("perturbed operator entries") {
  // Unweighted entries against the Jacobi-Anger expansion:
  // U_{k,m} = J_{k2 - (A^T m)_2}(2 pi m1 delta) when k1 = (A^T m)_1.
  const double delta = 0.05;
  const auto flat = conjugacy_escape_weight(codir(), 0.15, 0.0);
  const auto op = assemble_operator(shear_perturbation(cat(), delta), flat, 6);
  CHECK(!op.linear);
  const Eigen::MatrixXcd d(op.matrix);
  double worst = 0.0;
  for (int c = 0; c < op.size(); ++c) {
    const auto m = op.point(c);
    const int a1 = 2 * m[0] + m[1], a2 = m[0] + m[1];
    for (int r = 0; r < op.size(); ++r) {
      const auto k = op.point(r);
      double expected = 0.0;
      if (k[0] == a1) {
        const int order = k[1] - a2;
        const double x = kTwoPi * m[0] * delta;
        expected = std::cyl_bessel_j(std::abs(order), std::abs(x));
        if ((order < 0) != (x < 0) && order % 2 != 0) expected = -expected;
      }
      worst = std::max(worst, std::abs(d(r, c) - expected));
    }
  }
  CHECK(worst <= 1e-12);

  const auto w = conjugacy_escape_weight(codir(), 0.15, 2.0);
  const auto wop = assemble_operator(shear_perturbation(cat(), delta), w, 8);
  // transfer convention: the k = 0 row of the transpose sums to one
  CHECK(std::abs(Eigen::MatrixXcd(wop.matrix).col(wop.index(0, 0)).sum() - 1.0) <= 1e-10);
  CHECK(error_name([&] { assemble_operator(shear_perturbation(cat(), 0.2), w, 8); }) == "PerturbationTooLarge");
}

TEST_CASE("linear spectrum is {1} plus a nilpotent part") {
  for (double s : {1.0, 2.0, 4.0}) {
    const auto w = conjugacy_escape_weight(codir(), 0.15, s);
    for (int K : {8, 16, 32}) {
      const auto op = assemble_operator(shear_perturbation(cat(), 0.0), w, K);
      const auto sp = spectrum(op, 0.0);
      REQUIRE(sp.eigenvalues.size() == 1);
      CHECK(std::abs(sp.eigenvalues[0] - 1.0) <= 1e-10);
      CHECK(sp.essential_count == op.size() - 1);
      CHECK(sp.max_essential_modulus <= 1e-10);
    }
  }
  // independent check: off the constant mode M is nilpotent of index at most
  // the longest orbit segment in the box
  const auto w = conjugacy_escape_weight(codir(), 0.15, 2.0);
  const auto op = assemble_operator(shear_perturbation(cat(), 0.0), w, 8);
  SparseOperator n = op.matrix;
  n.coeffRef(op.index(0, 0), op.index(0, 0)) = 0.0;
  SparseOperator p = n;
  int steps = 1;
  while (p.nonZeros() > 0 && steps < op.size()) {
    p = (n * p).pruned();
    ++steps;
  }
  CHECK(p.nonZeros() == 0);
  CHECK(steps <= 2 * op.K + 1);

  // the weighted zeta exp(sum z^n/n Fix(n)/|det(I - A^n)|) is 1/(1 - z)
  const Complex z(0.5, 0.2);
  Complex acc = 0.0, zn = 1.0;
  for (int k = 1; k <= 40; ++k) {
    zn *= z;
    const double ratio = double(count_fixed_points(cat(), k)) /
                         std::abs(2.0 - double(cat().matrix.pow(k).trace()));
    acc += zn / double(k) * ratio;
  }
  CHECK(std::abs(std::exp(acc) - 1.0 / (1.0 - z)) <= 1e-10);
}

TEST_CASE("perturbed spectrum") {
  const auto w = conjugacy_escape_weight(codir(), 0.15, 2.0);
  const auto pert = shear_perturbation(cat(), 0.05);
  const auto op12 = assemble_operator(pert, w, 12);
  const auto dense = spectrum(op12, 0.02, SpectrumMethod::Dense);
  const auto arn = spectrum(op12, 0.02, SpectrumMethod::Arnoldi);
  REQUIRE(dense.eigenvalues.size() == arn.eigenvalues.size());
  for (std::size_t i = 0; i < dense.eigenvalues.size(); ++i)
    CHECK(std::abs(dense.eigenvalues[i] - arn.eigenvalues[i]) <= 1e-8);
  CHECK(std::abs(dense.eigenvalues[0] - 1.0) <= 1e-10);
  for (std::size_t i = 1; i < dense.eigenvalues.size(); ++i)
    CHECK(std::abs(dense.eigenvalues[i - 1]) >= std::abs(dense.eigenvalues[i]) - 1e-9);

  const auto rep = truncation_stability(pert, w, {24, 32}, 0.3);
  REQUIRE(rep.spectra.size() == 2);
  for (const auto& sp : rep.spectra) CHECK(std::abs(sp.eigenvalues[0] - 1.0) <= 1e-10);
  CHECK(rep.max_movement <= 1e-3);
  CHECK(error_name([&] { spectrum(op12, -1.0); }) == "InvalidRadius");
}

TEST_CASE("sign convention probe") {
  const auto rep = sign_convention_probe(cat(), 2.0, 32);
  CHECK(rep.correct_max <= 1.5);
  CHECK(rep.flipped_exponent >= 1.5);
  const auto flat = sign_convention_probe(cat(), 0.0, 16);
  for (double v : flat.correct) CHECK(v == 1.0);
  for (double v : flat.flipped) CHECK(v == 1.0);
}

#pragma once

// Concrete Anosov models: hyperbolic toral automorphisms (cat maps), their
// suspension flows under trigonometric-polynomial roofs, small analytic
// perturbations of cat maps, and Fuchsian groups presented by generators.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "anosov/core.hpp"

namespace anosov {

using Vec2 = std::array<double, 2>;

// ---------------------------------------------------------------------------
// Cat maps

struct CatMapSystem {
  IntMatrix2 matrix;
  double unstable_eigenvalue = 0.0;   // |mu_u| > 1
  double unstable_multiplier = 0.0;   // signed eigenvalue mu_u (negative when tr < -2)
  Vec2 stable_direction{};
  Vec2 unstable_direction{};
  double entropy = 0.0;               // log of unstable_eigenvalue, per iterate

  double stable_multiplier() const { return 1.0 / unstable_multiplier; }

  Eigen::Matrix2d real_matrix() const {
    Eigen::Matrix2d m;
    m << static_cast<double>(matrix(0, 0)), static_cast<double>(matrix(0, 1)),
        static_cast<double>(matrix(1, 0)), static_cast<double>(matrix(1, 1));
    return m;
  }

  /// x -> A x mod 1.
  Vec2 map(Vec2 x) const {
    return {wrap_unit(matrix(0, 0) * x[0] + matrix(0, 1) * x[1]),
            wrap_unit(matrix(1, 0) * x[0] + matrix(1, 1) * x[1])};
  }

  /// x -> A^{-1} x mod 1 (det A = 1).
  Vec2 inverse_map(Vec2 x) const {
    return {wrap_unit(matrix(1, 1) * x[0] - matrix(0, 1) * x[1]),
            wrap_unit(-matrix(1, 0) * x[0] + matrix(0, 0) * x[1])};
  }
};

namespace detail {

inline Vec2 eigen_direction(const IntMatrix2& a, double mu) {
  // (A - mu) v = 0; pick the better-conditioned row.
  const double a00 = static_cast<double>(a(0, 0)), a01 = static_cast<double>(a(0, 1));
  const double a10 = static_cast<double>(a(1, 0)), a11 = static_cast<double>(a(1, 1));
  Vec2 v;
  if (std::abs(a01) + std::abs(a00 - mu) >= std::abs(a10) + std::abs(a11 - mu))
    v = {a01, mu - a00};
  else
    v = {mu - a11, a10};
  const double n = std::hypot(v[0], v[1]);
  v = {v[0] / n, v[1] / n};
  if (v[0] < 0 || (v[0] == 0 && v[1] < 0)) v = {-v[0], -v[1]};
  return v;
}

}  // namespace detail

/// Builds a cat map from row-major integer entries [[a, b], [c, d]].
inline CatMapSystem build_cat_map(std::int64_t a, std::int64_t b, std::int64_t c, std::int64_t d) {
  CatMapSystem sys;
  sys.matrix = IntMatrix2{{a, b, c, d}};
  const auto det = sys.matrix.det();
  if (det != 1) fail("NotUnimodular", "det(A) = " + std::to_string(det) + ", expected 1");
  const auto tr = sys.matrix.trace();
  if (checked_abs(tr) <= 2) fail("NotHyperbolic", "|tr(A)| = " + std::to_string(checked_abs(tr)) + " <= 2");

  const double t = static_cast<double>(tr);
  const double disc = std::sqrt(t * t - 4.0);
  // Largest-modulus root of mu^2 - t mu + 1, computed without cancellation.
  const double mu_u = t > 0 ? (t + disc) / 2.0 : (t - disc) / 2.0;
  sys.unstable_multiplier = mu_u;
  sys.unstable_eigenvalue = std::abs(mu_u);
  sys.entropy = std::log(sys.unstable_eigenvalue);
  sys.unstable_direction = detail::eigen_direction(sys.matrix, mu_u);
  sys.stable_direction = detail::eigen_direction(sys.matrix, 1.0 / mu_u);
  return sys;
}

inline CatMapSystem default_cat_map() { return build_cat_map(2, 1, 1, 1); }

// ---------------------------------------------------------------------------
// Trigonometric polynomials on T^2

/// amplitude * cos(2 pi (k1 x1 + k2 x2) + phase)
struct TrigTerm {
  int k1 = 0;
  int k2 = 0;
  double amplitude = 0.0;
  double phase = 0.0;
};

struct TrigPolynomial {
  double constant = 0.0;
  std::vector<TrigTerm> terms;

  double operator()(Vec2 x) const {
    double v = constant;
    for (const auto& t : terms) v += t.amplitude * std::cos(kTwoPi * (t.k1 * x[0] + t.k2 * x[1]) + t.phase);
    return v;
  }

  Vec2 gradient(Vec2 x) const {
    Vec2 g{0.0, 0.0};
    for (const auto& t : terms) {
      const double s = -t.amplitude * kTwoPi * std::sin(kTwoPi * (t.k1 * x[0] + t.k2 * x[1]) + t.phase);
      g[0] += s * t.k1;
      g[1] += s * t.k2;
    }
    return g;
  }

  bool is_constant() const {
    return std::all_of(terms.begin(), terms.end(),
                       [](const TrigTerm& t) { return t.amplitude == 0.0 || (t.k1 == 0 && t.k2 == 0); });
  }

  double min_on_grid(int n) const {
    double m = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) m = std::min(m, (*this)({double(i) / n, double(j) / n}));
    return m;
  }

  double max_on_grid(int n) const {
    double m = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) m = std::max(m, (*this)({double(i) / n, double(j) / n}));
    return m;
  }
};

// ---------------------------------------------------------------------------
// Suspension flows

struct SuspensionPoint {
  Vec2 x{};
  double s = 0.0;  // height in [0, roof(x))
};

struct SuspensionSystem {
  CatMapSystem base;
  TrigPolynomial roof;
  double min_roof = 1.0;
  double max_roof = 1.0;

  static constexpr int dimension = 3;

  double roof_at(Vec2 x) const { return roof(x); }
};

inline constexpr int kRoofSampleGrid = 512;

inline SuspensionSystem build_suspension(const CatMapSystem& base, TrigPolynomial roof) {
  SuspensionSystem sys{base, std::move(roof)};
  sys.min_roof = sys.roof.min_on_grid(kRoofSampleGrid);
  if (!(sys.min_roof > 0.0))
    fail("NonPositiveRoof", "roof minimum on the sample grid is " + std::to_string(sys.min_roof));
  sys.max_roof = sys.roof.max_on_grid(kRoofSampleGrid);
  return sys;
}

inline SuspensionSystem unit_suspension(const CatMapSystem& base) {
  return build_suspension(base, TrigPolynomial{1.0, {}});
}

/// phi_t on the suspension: vertical motion with base-map returns at the roof.
inline SuspensionPoint flow(const SuspensionSystem& sys, SuspensionPoint p, double t) {
  double s = p.s + t;
  Vec2 x = p.x;
  for (double r = sys.roof(x); s >= r; r = sys.roof(x)) {
    s -= r;
    x = sys.base.map(x);
  }
  while (s < 0.0) {
    x = sys.base.inverse_map(x);
    s += sys.roof(x);
  }
  return {x, s};
}

/// Number of roof crossings made by phi_t from p (t >= 0).
inline int roof_crossings(const SuspensionSystem& sys, SuspensionPoint p, double t) {
  double s = p.s + t;
  Vec2 x = p.x;
  int n = 0;
  for (double r = sys.roof(x); s >= r; r = sys.roof(x)) {
    s -= r;
    x = sys.base.map(x);
    ++n;
  }
  return n;
}

/// Jacobian of phi_t at p in the chart (x1, x2, s), holding the number of
/// roof crossings fixed: phi = (A^n x, s + t - sum_{j<n} r(A^j x)).
inline Eigen::Matrix3d flow_jacobian(const SuspensionSystem& sys, SuspensionPoint p, double t) {
  const int n = roof_crossings(sys, p, t);
  const Eigen::Matrix2d a = sys.base.real_matrix();
  Eigen::Matrix2d an = Eigen::Matrix2d::Identity();
  Eigen::RowVector2d dvert = Eigen::RowVector2d::Zero();
  Vec2 x = p.x;
  for (int j = 0; j < n; ++j) {
    const Vec2 g = sys.roof.gradient(x);
    dvert -= Eigen::RowVector2d(g[0], g[1]) * an;
    an = a * an;
    x = sys.base.map(x);
  }
  Eigen::Matrix3d jac = Eigen::Matrix3d::Zero();
  jac.topLeftCorner<2, 2>() = an;
  jac.block<1, 2>(2, 0) = dvert;
  jac(2, 2) = 1.0;
  return jac;
}

/// Stable vector of the flow at (x, .): (v_s, w) with w = sum_j grad r(A^j x) . A^j v_s.
inline Eigen::Vector3d flow_stable_vector(const SuspensionSystem& sys, Vec2 x) {
  Eigen::Vector2d v(sys.base.stable_direction[0], sys.base.stable_direction[1]);
  double w = 0.0;
  Eigen::Vector2d aj = v;
  for (int j = 0; j < 200 && aj.norm() > 1e-18; ++j) {
    const Vec2 g = sys.roof.gradient(x);
    w += g[0] * aj[0] + g[1] * aj[1];
    aj *= sys.base.stable_multiplier();
    x = sys.base.map(x);
  }
  return {v[0], v[1], w};
}

/// Fits ||d phi_t|| <= C exp(L t) in log scale over the samples; returns L.
///
/// The growth is measured on the flow derivative (the Lipschitz bound that
/// the composition estimate controls) at a fixed 4x4 set of base points.
inline double estimate_L(const SuspensionSystem& sys, const std::vector<double>& t_samples) {
  if (t_samples.size() < 2) fail("DegenerateFit", "estimate_L needs at least two time samples");
  std::vector<double> ts, logs;
  for (double t : t_samples) {
    if (!(t > 0.0)) fail("DegenerateFit", "time samples must be positive");
    double worst = 0.0;
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) {
        const Vec2 x{(i + 0.37) / 4.0, (j + 0.61) / 4.0};
        const SuspensionPoint p{x, 0.5 * sys.roof(x)};
        const Eigen::Matrix3d jac = flow_jacobian(sys, p, t);
        worst = std::max(worst, Eigen::JacobiSVD<Eigen::Matrix3d>(jac).singularValues()(0));
      }
    ts.push_back(t);
    logs.push_back(std::log(worst));
  }
  return least_squares(ts, logs).slope;
}

// ---------------------------------------------------------------------------
// Perturbed cat maps: x -> A x + p(x) mod 1, p a trigonometric polynomial
// written with sines, p_i(x) = sum amplitude * sin(2 pi k.x + phase).

struct PerturbedCatSystem {
  CatMapSystem base;
  std::vector<TrigTerm> dx1;  // sine terms added to the first coordinate
  std::vector<TrigTerm> dx2;  // sine terms added to the second coordinate

  Vec2 displacement(Vec2 x) const {
    Vec2 d{0.0, 0.0};
    for (const auto& t : dx1) d[0] += t.amplitude * std::sin(kTwoPi * (t.k1 * x[0] + t.k2 * x[1]) + t.phase);
    for (const auto& t : dx2) d[1] += t.amplitude * std::sin(kTwoPi * (t.k1 * x[0] + t.k2 * x[1]) + t.phase);
    return d;
  }

  double max_displacement() const {
    double m1 = 0, m2 = 0;
    for (const auto& t : dx1) m1 += std::abs(t.amplitude);
    for (const auto& t : dx2) m2 += std::abs(t.amplitude);
    return std::max(m1, m2);
  }

  int max_frequency() const {
    int k = 0;
    for (const auto* v : {&dx1, &dx2})
      for (const auto& t : *v) k = std::max({k, std::abs(t.k1), std::abs(t.k2)});
    return k;
  }

  bool is_linear() const { return max_displacement() == 0.0; }
};

/// The shear x -> A x + (delta sin(2 pi x2), 0).
inline PerturbedCatSystem shear_perturbation(const CatMapSystem& base, double delta) {
  PerturbedCatSystem p{base, {}, {}};
  if (delta != 0.0) p.dx1.push_back({0, 1, delta, 0.0});
  return p;
}

// ---------------------------------------------------------------------------
// Fuchsian groups

using Matrix2 = Eigen::Matrix2d;

/// A word in the generators: letter +(i+1) is generator i, -(i+1) its inverse.
using Word = std::vector<int>;

struct FuchsianSystem {
  std::vector<Matrix2> generators;
  std::vector<Word> relation_words;

  Matrix2 letter(int l) const {
    const Matrix2& g = generators.at(static_cast<std::size_t>(std::abs(l) - 1));
    if (l > 0) return g;
    Matrix2 inv;
    inv << g(1, 1), -g(0, 1), -g(1, 0), g(0, 0);
    return inv;
  }

  Matrix2 evaluate(const Word& w) const {
    Matrix2 m = Matrix2::Identity();
    for (int l : w) m = m * letter(l);
    return m;
  }
};

/// Parses a word written with letters: 'a' is generator 0, 'A' its inverse.
inline Word parse_word(const std::string& text) {
  Word w;
  for (char c : text) {
    if (c >= 'a' && c <= 'z')
      w.push_back(c - 'a' + 1);
    else if (c >= 'A' && c <= 'Z')
      w.push_back(-(c - 'A' + 1));
    else if (c != ' ' && c != '\t')
      fail("ConfigError", std::string("invalid letter '") + c + "' in word " + text);
  }
  return w;
}

inline std::string format_word(const Word& w) {
  std::string s;
  for (int l : w) s.push_back(l > 0 ? char('a' + l - 1) : char('A' - l - 1));
  return s;
}

inline FuchsianSystem build_fuchsian(std::vector<Matrix2> generators, std::vector<Word> relations = {}) {
  FuchsianSystem sys{std::move(generators), std::move(relations)};
  if (sys.generators.empty()) fail("ConfigError", "Fuchsian system needs at least one generator");
  for (std::size_t i = 0; i < sys.generators.size(); ++i) {
    const double det = sys.generators[i].determinant();
    if (std::abs(det - 1.0) > 1e-12)
      fail("NotUnimodular", "generator " + std::to_string(i) + " has det " + std::to_string(det));
  }
  for (const auto& w : sys.relation_words) {
    for (int l : w)
      if (l == 0 || static_cast<std::size_t>(std::abs(l)) > sys.generators.size())
        fail("ConfigError", "relation uses unknown generator");
    const Matrix2 m = sys.evaluate(w);
    const double dev = std::min((m - Matrix2::Identity()).cwiseAbs().maxCoeff(),
                                (m + Matrix2::Identity()).cwiseAbs().maxCoeff());
    if (dev > 1e-9) fail("RelationFailed", "relation " + format_word(w) + " deviates from +-I by " + std::to_string(dev));
  }
  return sys;
}

/// Side pairings of the regular hyperbolic octagon (genus-2 surface), in
/// SL(2,R) acting on the upper half plane; generator k is the translation
/// along the axis through i rotated by k pi/4, with cosh(l/2) = 1 + sqrt 2.
inline FuchsianSystem sample_genus2_surface() {
  const double a = 1.0 + std::sqrt(2.0);
  const double b = std::sqrt(a * a - 1.0);
  Matrix2 g0;
  g0 << a, b, b, a;
  std::vector<Matrix2> gens;
  for (int k = 0; k < 4; ++k) {
    const double phi = k * std::numbers::pi / 8.0;
    Matrix2 rot;
    rot << std::cos(phi), std::sin(phi), -std::sin(phi), std::cos(phi);
    gens.push_back(rot * g0 * rot.transpose());
  }
  return build_fuchsian(std::move(gens), {parse_word("aBcDAbCd")});
}

}  // namespace anosov

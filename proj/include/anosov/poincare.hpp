#pragma once

// Linearized Poincare maps of closed orbits, traces of their exterior
// powers, the orientation sign q, and the finite-dimensional residue lemma.

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "anosov/core.hpp"
#include "anosov/orbits.hpp"
#include "anosov/systems.hpp"

namespace anosov {

struct PoincareData {
  Eigen::MatrixXd matrix;             // P_gamma on E_s + E_u
  double det_I_minus_P = 0.0;
  double abs_det = 0.0;
  std::vector<double> wedge_traces;   // tr of the k-th exterior power, k = 0..d
  int sign_q = 0;                     // (-1)^q det(I - P) = |det(I - P)|
  std::optional<std::int64_t> exact_det_I_minus_P;  // integer value for cat-map orbits
};

/// Traces of all exterior powers of P via Newton's identities:
/// e_k = (1/k) sum_{i=1}^k (-1)^{i-1} e_{k-i} tr(P^i).
inline std::vector<double> wedge_traces(const Eigen::MatrixXd& p) {
  const auto d = p.rows();
  if (d != p.cols()) fail("InvalidArgument", "wedge_traces needs a square matrix");
  if (d > 6) fail("InvalidArgument", "wedge_traces supports dimension <= 6");
  std::vector<double> power_sums(static_cast<std::size_t>(d) + 1, 0.0);
  Eigen::MatrixXd pk = Eigen::MatrixXd::Identity(d, d);
  for (Eigen::Index k = 1; k <= d; ++k) {
    pk = pk * p;
    power_sums[static_cast<std::size_t>(k)] = pk.trace();
  }
  std::vector<double> e(static_cast<std::size_t>(d) + 1, 0.0);
  e[0] = 1.0;
  for (std::size_t k = 1; k <= static_cast<std::size_t>(d); ++k) {
    double s = 0.0;
    for (std::size_t i = 1; i <= k; ++i) s += ((i % 2 == 1) ? 1.0 : -1.0) * e[k - i] * power_sums[i];
    e[k] = s / static_cast<double>(k);
  }
  return e;
}

/// Alternating sum sum_k (-1)^k tr(wedge^k P), which equals det(I - P).
inline double alternating_wedge_sum(const std::vector<double>& traces) {
  double s = 0.0;
  for (std::size_t k = 0; k < traces.size(); ++k) s += (k % 2 == 0 ? 1.0 : -1.0) * traces[k];
  return s;
}

/// tr(A^n) by the recurrence t_{n+1} = tr(A) t_n - t_{n-1} (det A = 1).
inline std::int64_t trace_of_power(const CatMapSystem& cat, int n) {
  const std::int64_t t1 = cat.matrix.trace();
  std::int64_t prev = 2, cur = t1;
  if (n == 0) return 2;
  for (int k = 1; k < n; ++k) {
    std::int64_t next;
    try {
      next = checked_sub(checked_mul(t1, cur), prev);
    } catch (const Error&) {
      fail("Overflow", "tr(A^" + std::to_string(k + 1) + ") exceeds the 63-bit range");
    }
    prev = cur;
    cur = next;
  }
  return cur;
}

namespace detail {

inline PoincareData finish_poincare(Eigen::MatrixXd m) {
  PoincareData pd;
  pd.matrix = std::move(m);
  pd.wedge_traces = wedge_traces(pd.matrix);
  const auto d = pd.matrix.rows();
  pd.det_I_minus_P = (Eigen::MatrixXd::Identity(d, d) - pd.matrix).determinant();
  pd.abs_det = std::abs(pd.det_I_minus_P);
  pd.sign_q = pd.det_I_minus_P < 0 ? 1 : 0;
  return pd;
}

}  // namespace detail

/// P = A^{-n} for n base iterates, written in the (v_s, v_u) eigenbasis:
/// diag(mu_u^n, mu_u^{-n}). det(I - P) = 2 - tr(A^n) is computed exactly.
inline PoincareData cat_poincare_map(const CatMapSystem& cat, int n) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(2, 2);
  m(0, 0) = std::pow(cat.unstable_multiplier, n);
  m(1, 1) = std::pow(cat.unstable_multiplier, -n);
  PoincareData pd;
  pd.matrix = m;
  const std::int64_t tn = trace_of_power(cat, n);
  const std::int64_t det = checked_sub(2, tn);
  if (det == 0) fail("DegenerateOrbit", "det(I - P) = 0 for n = " + std::to_string(n));
  pd.exact_det_I_minus_P = det;
  pd.det_I_minus_P = static_cast<double>(det);
  pd.abs_det = std::abs(pd.det_I_minus_P);
  pd.sign_q = det < 0 ? 1 : 0;
  pd.wedge_traces = {1.0, static_cast<double>(tn), 1.0};  // det(A^{-n}) = 1, tr A^{-n} = tr A^n
  return pd;
}

/// A^{-n} in the standard basis of the torus chart.
inline Eigen::Matrix2d cat_poincare_standard(const CatMapSystem& cat, int n) {
  const Eigen::Matrix2d inv = cat.real_matrix().inverse();
  Eigen::Matrix2d p = Eigen::Matrix2d::Identity();
  for (int k = 0; k < n; ++k) p = inv * p;
  return p;
}

/// Linearized Poincare map of a suspension orbit, computed from the flow
/// Jacobian over one period at the given point of the orbit: the map induced
/// on the quotient by the flow direction, inverted.
inline Eigen::Matrix2d suspension_poincare_at(const SuspensionSystem& sys, const ClosedOrbit& orbit, int point_index) {
  if (!orbit.representative) fail("InvalidArgument", "orbit has no representative point");
  Vec2 x = orbit.representative->value();
  for (int j = 0; j < point_index; ++j) x = sys.base.map(x);
  // Start slightly above the base so the crossing count over one period is exact.
  const SuspensionPoint p{x, 1e-9 * sys.min_roof};
  const Eigen::Matrix3d jac = flow_jacobian(sys, p, orbit.period);
  return jac.topLeftCorner<2, 2>().inverse();
}

inline PoincareData poincare_map(const ClosedOrbit& orbit, const SuspensionSystem& sys) {
  if (orbit.system_kind != SystemKind::Suspension) fail("InvalidArgument", "orbit is not a suspension orbit");
  return cat_poincare_map(sys.base, orbit.iterates);
}

/// Hyperbolic element of translation length l: P has eigenvalues e^{-l}, e^{l}.
inline PoincareData poincare_map(const ClosedOrbit& orbit, const FuchsianSystem&) {
  if (orbit.system_kind != SystemKind::Fuchsian) fail("InvalidArgument", "orbit is not a Fuchsian orbit");
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(2, 2);
  m(0, 0) = std::exp(orbit.period);
  m(1, 1) = std::exp(-orbit.period);
  auto pd = detail::finish_poincare(std::move(m));
  pd.det_I_minus_P = 2.0 - 2.0 * std::cosh(orbit.period);
  pd.abs_det = std::abs(pd.det_I_minus_P);
  pd.wedge_traces = {1.0, 2.0 * std::cosh(orbit.period), 1.0};
  if (pd.abs_det < 1e-10) fail("DegenerateOrbit", "|det(I - P)| < 1e-10");
  return pd;
}

inline PoincareData poincare_from_matrix(const Eigen::MatrixXd& p) {
  auto pd = detail::finish_poincare(p);
  if (pd.abs_det < 1e-10) fail("DegenerateOrbit", "|det(I - P)| < 1e-10");
  return pd;
}

// ---------------------------------------------------------------------------
// Orbit data with Poincare summaries: the input of every orbit sum.

struct OrbitRecord {
  double period = 0.0;
  double primitive_period = 0.0;
  std::int64_t multiplicity = 1;
  int iterates = 0;
  bool is_primitive = true;
  double det_I_minus_P = 0.0;
  double abs_det = 0.0;
  std::vector<double> wedge_traces;
};

struct OrbitSpectrum {
  std::vector<OrbitRecord> records;  // sorted by period
  double horizon = 0.0;
  int transversal_dimension = 2;
};

inline OrbitRecord make_record(const ClosedOrbit& o, const PoincareData& pd) {
  return {o.period, o.primitive_period, o.multiplicity, o.iterates, o.is_primitive,
          pd.det_I_minus_P, pd.abs_det, pd.wedge_traces};
}

inline OrbitSpectrum attach_poincare(const OrbitCensus& census, const SuspensionSystem& sys) {
  OrbitSpectrum spec;
  spec.horizon = census.horizon;
  for (const auto& o : census.orbits) spec.records.push_back(make_record(o, poincare_map(o, sys)));
  return spec;
}

inline OrbitSpectrum attach_poincare(const OrbitCensus& census, const FuchsianSystem& sys) {
  OrbitSpectrum spec;
  spec.horizon = census.orbits.empty() ? 0.0 : census.orbits.back().period;
  for (const auto& o : census.orbits) spec.records.push_back(make_record(o, poincare_map(o, sys)));
  return spec;
}

/// Finds q with |det(I - P)| = (-1)^q det(I - P) on every orbit: the sign of
/// the majority fixes q, then every orbit is checked.
inline int determine_q(const OrbitSpectrum& spec) {
  if (spec.records.empty()) fail("EmptyCensus", "determine_q needs at least one orbit");
  std::int64_t negative = 0, positive = 0;
  for (const auto& r : spec.records) (r.det_I_minus_P < 0 ? negative : positive) += r.multiplicity;
  const int q = negative >= positive ? 1 : 0;
  const OrbitRecord* witness = nullptr;
  for (const auto& r : spec.records) {
    const int qr = r.det_I_minus_P < 0 ? 1 : 0;
    if (qr == q) {
      witness = &r;
      continue;
    }
    std::string msg = "orbit with T = " + std::to_string(r.period) + " has det(I-P) = " + std::to_string(r.det_I_minus_P);
    if (witness)
      msg += " while orbit with T = " + std::to_string(witness->period) + " has det(I-P) = " +
             std::to_string(witness->det_I_minus_P);
    violate("SignNotConstant", msg);
  }
  return q;
}

// ---------------------------------------------------------------------------
// Finite-dimensional residue lemma

struct ResidueProbe {
  int dim = 0;
  Complex base_eigenvalue;
  int nilpotent_order = 1;
  Eigen::MatrixXcd matrix;
};

/// Validates (A - l0)^J = 0 and (A - l0)^{J-1} != 0.
inline ResidueProbe make_residue_probe(Eigen::MatrixXcd a, Complex lambda0, int order) {
  const auto m = a.rows();
  if (m != a.cols() || m < 1 || order < 1) fail("InvalidArgument", "bad residue probe shape");
  const Eigen::MatrixXcd n = a - lambda0 * Eigen::MatrixXcd::Identity(m, m);
  Eigen::MatrixXcd pw = Eigen::MatrixXcd::Identity(m, m);
  for (int j = 1; j < order; ++j) pw = pw * n;
  const double below = pw.cwiseAbs().maxCoeff();
  const double at = (pw * n).cwiseAbs().maxCoeff();
  if (at > 1e-10) violate("NotNilpotent", "(A - l0)^J has entry of size " + std::to_string(at));
  if (below <= 1e-10) violate("NotNilpotent", "(A - l0)^{J-1} vanishes; J is not the nilpotent order");
  return {static_cast<int>(m), lambda0, order, std::move(a)};
}

/// Taylor coefficients of exp(-i t0 mu) at mu = l0, up to the given degree.
inline std::vector<Complex> exp_series(double t0, Complex lambda0, int degree) {
  std::vector<Complex> c;
  const Complex base = std::exp(Complex(0, -t0) * lambda0);
  Complex term = base;
  for (int k = 0; k <= degree; ++k) {
    c.push_back(term);
    term *= Complex(0, -t0) / static_cast<double>(k + 1);
  }
  return c;
}

namespace detail {

inline Eigen::MatrixXcd apply_series(const ResidueProbe& probe, const std::vector<Complex>& coeffs) {
  const auto m = probe.matrix.rows();
  const Eigen::MatrixXcd n = probe.matrix - probe.base_eigenvalue * Eigen::MatrixXcd::Identity(m, m);
  Eigen::MatrixXcd result = Eigen::MatrixXcd::Zero(m, m);
  Eigen::MatrixXcd pw = Eigen::MatrixXcd::Identity(m, m);
  for (std::size_t k = 0; k < coeffs.size() && static_cast<int>(k) < probe.nilpotent_order; ++k) {
    result += coeffs[k] * pw;
    pw = pw * n;
  }
  return result;
}

}  // namespace detail

/// lim_{l -> l0} (l - l0) tr(phi(A) sum_j (A - l0)^{j-1} / (l - l0)^j).
///
/// Expanding, the quantity is sum_j tr(phi(A) N^{j-1}) (l - l0)^{1-j} with
/// N = A - l0; every j >= 2 coefficient is a trace of a nilpotent matrix and
/// must vanish, leaving tr phi(A) = m phi(l0).
inline Complex nilpotent_residue(const ResidueProbe& probe, const std::vector<Complex>& phi_coeffs) {
  const auto m = probe.matrix.rows();
  const Eigen::MatrixXcd n = probe.matrix - probe.base_eigenvalue * Eigen::MatrixXcd::Identity(m, m);
  const Eigen::MatrixXcd phi = detail::apply_series(probe, phi_coeffs);
  Eigen::MatrixXcd pw = Eigen::MatrixXcd::Identity(m, m);
  Complex leading = 0.0;
  const double scale = std::max(1.0, phi.cwiseAbs().maxCoeff());
  for (int j = 1; j <= probe.nilpotent_order; ++j) {
    const Complex c = (phi * pw).trace();
    if (j == 1)
      leading = c;
    else if (std::abs(c) > 1e-9 * scale * std::max(1.0, pw.cwiseAbs().maxCoeff()))
      violate("NotNilpotent", "singular coefficient " + std::to_string(j) + " does not vanish");
    pw = pw * n;
  }
  return leading;
}

/// Same limit as the contour integral (1/2 pi i) of tr(phi(A)(l - A)^{-1})
/// over the circle |l - l0| = radius, trapezoid rule on the given nodes.
inline Complex nilpotent_residue_contour(const ResidueProbe& probe, const std::vector<Complex>& phi_coeffs,
                                         double radius, int nodes = 64) {
  const auto m = probe.matrix.rows();
  const Eigen::MatrixXcd phi = detail::apply_series(probe, phi_coeffs);
  CompensatedSum<Complex> acc;
  for (int k = 0; k < nodes; ++k) {
    const Complex w = std::polar(1.0, kTwoPi * k / nodes);
    const Complex lambda = probe.base_eigenvalue + radius * w;
    const Eigen::MatrixXcd resolvent =
        (lambda * Eigen::MatrixXcd::Identity(m, m) - probe.matrix).partialPivLu().inverse();
    // dl = i r w dtheta, and (1/2 pi i) * i r w * (2 pi / nodes) = r w / nodes
    acc += (phi * resolvent).trace() * radius * w / static_cast<double>(nodes);
  }
  return acc.value();
}

}  // namespace anosov

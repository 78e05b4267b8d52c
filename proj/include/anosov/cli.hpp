#pragma once

// Command-line front end. Every subcommand reads the run configuration, lets
// flags override single keys, validates all parameters, and writes CSV/JSON
// artifacts atomically into the output directory.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "anosov/anisotropic.hpp"
#include "anosov/config.hpp"
#include "anosov/flattrace.hpp"
#include "anosov/orbits.hpp"
#include "anosov/poincare.hpp"
#include "anosov/recurrence.hpp"
#include "anosov/systems.hpp"
#include "anosov/zeta.hpp"

namespace anosov::cli {

using json = nlohmann::json;

inline constexpr std::int64_t kMaxCsvRows = 5'000'000;

inline std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void atomic_write(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::create_directories(path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) fail("IOError", "cannot write " + tmp.string());
    f << content;
    f.flush();
    if (!f) fail("IOError", "write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline json config_json(const RunConfig& cfg) {
  json j = json::object();
  for (const auto& [sec, keys] : cfg.values())
    for (const auto& [k, v] : keys) j[sec][k] = v.size() == 1 ? json(v.front()) : json(v);
  return j;
}

inline json complex_json(Complex z) { return json::array({z.real(), z.imag()}); }

struct Context {
  RunConfig cfg;
  std::filesystem::path out_dir;
  int workers = 1;
  std::ostream& out;

  void write(const std::string& name, const std::string& content) const {
    atomic_write(out_dir / name, content);
    out << "wrote " << (out_dir / name).string() << "\n";
  }

  void write_json(const std::string& name, json j) const {
    j["config"] = config_json(cfg);
    write(name, j.dump(2) + "\n");
  }
};

inline SuspensionSystem require_suspension(const RunConfig& cfg) {
  auto sys = config_system(cfg);
  if (!std::holds_alternative<SuspensionSystem>(sys))
    fail("UnsupportedSystem", "this command needs a cat map or suspension system");
  return std::get<SuspensionSystem>(sys);
}

inline std::pair<int, int> parse_grid(const std::string& text) {
  const auto x = text.find('x');
  if (x == std::string::npos) fail("ConfigError", "grid must look like NxM, got '" + text + "'");
  const auto a = parse_integer(text.substr(0, x)), b = parse_integer(text.substr(x + 1));
  if (a < 1 || b < 1 || a > 1000 || b > 1000) fail("OutOfRange", "grid dimensions must lie in [1, 1000]");
  return {static_cast<int>(a), static_cast<int>(b)};
}

// ---------------------------------------------------------------------------
// orbits

inline int cmd_orbits(const Context& ctx) {
  const auto sys = config_system(ctx.cfg);
  OrbitSpectrum spec;
  if (const auto* s = std::get_if<SuspensionSystem>(&sys)) {
    const double tmax = ctx.cfg.number("orbits", "tmax", 1e-9, 40.0);
    spec = attach_poincare(enumerate_orbits(*s, tmax), *s);
  } else {
    const auto& f = std::get<FuchsianSystem>(sys);
    const int len = static_cast<int>(ctx.cfg.integer("orbits", "max_word_length", 1, 8));
    spec = attach_poincare(enumerate_fuchsian_orbits(f, len), f);
  }
  std::int64_t rows = 0;
  for (const auto& r : spec.records) rows = checked_add(rows, r.multiplicity);
  if (rows > kMaxCsvRows)
    fail("TooManyRows", std::to_string(rows) + " closed trajectories exceed the CSV limit of " +
                            std::to_string(kMaxCsvRows));

  std::ostringstream csv;
  csv << "period,primitive_period,is_primitive,det_I_minus_P";
  const int d = spec.transversal_dimension;
  for (int k = 0; k <= d; ++k) csv << ",trace_wedge_" << k;
  csv << "\n";
  for (const auto& r : spec.records) {
    std::ostringstream line;
    line << num(r.period) << ',' << num(r.primitive_period) << ',' << (r.is_primitive ? 1 : 0) << ','
         << num(r.det_I_minus_P);
    for (double w : r.wedge_traces) line << ',' << num(w);
    line << "\n";
    const std::string l = line.str();
    for (std::int64_t m = 0; m < r.multiplicity; ++m) csv << l;
  }
  ctx.write("orbits.csv", csv.str());

  json j;
  j["command"] = "orbits";
  j["rows"] = rows;
  j["horizon"] = spec.horizon;
  j["distinct_records"] = spec.records.size();
  if (!spec.records.empty()) {
    j["sign_q"] = determine_q(spec);
    const auto nd = nondegeneracy_check(spec);
    j["min_abs_det_I_minus_P"] = nd.min_abs_det;
  }
  ctx.write_json("orbits.json", j);
  return 0;
}

// ---------------------------------------------------------------------------
// zeta

inline int cmd_zeta(const Context& ctx) {
  const auto sys = require_suspension(ctx.cfg);
  const auto [nre, nim] = parse_grid(ctx.cfg.text("zeta", "grid"));
  const double re_min = ctx.cfg.number("zeta", "re_min", -1e3, 1e3);
  const double im_min = ctx.cfg.number("zeta", "im_min", -1e3, 1e3);
  const double re_max = nre > 1 ? ctx.cfg.number("zeta", "re_max", re_min, 1e3) : re_min;
  const double im_max = nim > 1 ? ctx.cfg.number("zeta", "im_max", im_min, 1e3) : im_min;
  const double tmax = ctx.cfg.number("zeta", "tmax", 1.0, 40.0);
  const double fit_lo = ctx.cfg.number("zeta", "fit_lo", 0.0, tmax);
  const double fit_hi = ctx.cfg.number("zeta", "fit_hi", fit_lo, tmax);
  const std::string fn = ctx.cfg.text("zeta", "function");
  int degree = 0;
  if (fn == "f_k")
    degree = static_cast<int>(ctx.cfg.integer("zeta", "degree", 0, 2));
  else if (fn != "log_zeta_R" && fn != "zeta_1")
    fail("ConfigError", "[zeta] function must be log_zeta_R, zeta_1 or f_k");

  const auto spec = attach_poincare(enumerate_orbits(sys, tmax), sys);
  const auto growth = fit_growth_law(spec, fit_lo, fit_hi);

  std::ostringstream csv;
  csv << "re,im,value_re,value_im,tail_bound\n";
  for (int i = 0; i < nre; ++i)
    for (int k = 0; k < nim; ++k) {
      const double re = nre > 1 ? re_min + (re_max - re_min) * i / (nre - 1) : re_min;
      const double im = nim > 1 ? im_min + (im_max - im_min) * k / (nim - 1) : im_min;
      const Complex l(re, im);
      const ZetaEvaluation ev = fn == "log_zeta_R" ? log_zeta_R(spec, growth, l, tmax)
                                : fn == "zeta_1"   ? zeta_1(spec, growth, l, tmax)
                                                   : f_k(spec, growth, degree, l, tmax);
      csv << num(re) << ',' << num(im) << ',' << num(ev.value.real()) << ',' << num(ev.value.imag()) << ','
          << num(ev.tail_bound) << "\n";
    }
  ctx.write("zeta.csv", csv.str());

  json j;
  j["command"] = "zeta";
  j["function"] = fn;
  j["growth_exponent"] = growth.exponent;
  j["growth_constant"] = growth.constant;
  if (sys.roof.is_constant()) {
    const auto oracle = continuation_oracle(sys);
    const double lo = std::min(re_min, 0.0), hi = std::max(re_max, kTwoPi) + 0.1;
    json sing = json::array();
    for (const auto& s : locate_singularities(oracle, lo, hi, -1.5, 1.5))
      sing.push_back({{"square_center", complex_json(s.center)}, {"square_side", 0.1}, {"winding", s.winding}, {"kind", s.winding > 0 ? "zero" : "pole"}});
    j["oracle"] = {{"singularities", sing}, {"window", {lo, hi, -1.5, 1.5}}};
  } else {
    j["oracle"] = nullptr;
  }
  ctx.write_json("zeta.json", j);
  return 0;
}

// ---------------------------------------------------------------------------
// trace

inline int cmd_trace(const Context& ctx) {
  const auto cat = config_cat_map(ctx.cfg);
  const int n = static_cast<int>(ctx.cfg.integer("trace", "n", 1, 20));
  const int grid = static_cast<int>(ctx.cfg.integer("trace", "grid", 8, 4096));
  const int degree = static_cast<int>(ctx.cfg.integer("trace", "degree", 0, 2));
  const auto eps = ctx.cfg.numbers("trace", "eps");
  for (double e : eps)
    if (!(e > 0.0 && e <= 1.0)) fail("OutOfRange", "[trace] eps values must lie in (0, 1]");
  check_eps_list(eps, grid);

  std::vector<std::pair<double, Complex>> values;
  json j;
  j["command"] = "trace";
  if (degree == 0) {
    const auto r = flat_trace(cat, n, grid, eps);
    values = r.values;
    j["extrapolated"] = complex_json(r.extrapolated);
    j["epsilon_exponent"] = r.epsilon_exponent;
    j["fitted_order"] = r.fitted_order;
    j["divergence_flag"] = r.divergence_flag;
  } else {
    std::vector<Complex> v;
    for (double e : eps) {
      values.emplace_back(e, flat_trace_forms_mollified(cat, n, degree, grid, e));
      v.push_back(values.back().second);
    }
    const auto [ex, order] = extrapolate_in_eps(v);
    j["extrapolated"] = complex_json(ex);
    j["fitted_order"] = order;
    j["divergence_flag"] = false;
  }
  j["orbit_sum_value"] = flat_trace_forms(cat, n, degree);
  j["lefschetz_number"] = lefschetz_number(cat, n);

  std::ostringstream csv;
  csv << "epsilon,trace_re,trace_im\n";
  for (const auto& [e, v] : values) csv << num(e) << ',' << num(v.real()) << ',' << num(v.imag()) << "\n";
  ctx.write("trace.csv", csv.str());
  ctx.write_json("trace.json", j);
  return 0;
}

// ---------------------------------------------------------------------------
// resonances

inline int cmd_resonances(const Context& ctx) {
  const auto cat = config_cat_map(ctx.cfg);
  const int K = static_cast<int>(ctx.cfg.integer("resonances", "trunc", 4, kMaxTruncation));
  const double s = ctx.cfg.number("resonances", "weight_s", 0.0, 8.0);
  const double delta = ctx.cfg.number("resonances", "perturb_delta", 0.0, 0.1);
  const double r = ctx.cfg.number("resonances", "radius", 0.0, 1.0);
  const double width = ctx.cfg.number("resonances", "width", 1e-6, std::numbers::pi / 2);
  std::vector<int> Ks;
  for (double k : ctx.cfg.numbers("resonances", "stability_trunc")) {
    if (k != std::floor(k) || k < 4 || k > kMaxTruncation)
      fail("OutOfRange", "[resonances] stability_trunc entries must be integers in [4, 32]");
    Ks.push_back(static_cast<int>(k));
  }

  const auto weight = conjugacy_escape_weight(codirection_map(cat), width, s);
  const auto sys = shear_perturbation(cat, delta);
  const auto sp = spectrum(assemble_operator(sys, weight, K), r);

  std::ostringstream csv;
  csv << "re,im,modulus\n";
  for (const Complex z : sp.eigenvalues) csv << num(z.real()) << ',' << num(z.imag()) << ',' << num(std::abs(z)) << "\n";
  ctx.write("resonances.csv", csv.str());

  json j;
  j["command"] = "resonances";
  j["method"] = sp.method;
  j["eigenvalue_count"] = sp.eigenvalues.size();
  j["essential_count"] = sp.essential_count;
  j["max_essential_modulus"] = sp.essential_count < 0 ? json(nullptr) : json(sp.max_essential_modulus);
  j["max_residual"] = sp.max_residual;
  const auto rep = truncation_stability(sys, weight, Ks, r);
  json per = json::array();
  for (std::size_t i = 0; i < rep.Ks.size(); ++i) {
    json ev = json::array();
    for (const Complex z : rep.spectra[i].eigenvalues)
      if (std::abs(z) >= r) ev.push_back(complex_json(z));
    per.push_back({{"K", rep.Ks[i]}, {"method", rep.spectra[i].method}, {"eigenvalues", ev}});
  }
  j["stability"] = {{"truncations", per}, {"movement", rep.movement}, {"max_movement", rep.max_movement}};
  ctx.write_json("resonances.json", j);
  return 0;
}

// ---------------------------------------------------------------------------
// recurrence

inline int cmd_recurrence(const Context& ctx) {
  const auto sys = require_suspension(ctx.cfg);
  const auto eps = ctx.cfg.numbers("recurrence", "eps");
  for (double e : eps)
    if (!(e > 0.0 && e <= 0.5)) fail("OutOfRange", "[recurrence] eps values must lie in (0, 0.5]");
  const double te = ctx.cfg.number("recurrence", "te");
  const double T = ctx.cfg.number("recurrence", "T");
  if (T > 40.0) fail("OutOfRange", "[recurrence] T must be <= 40");
  const auto samples = ctx.cfg.integer("recurrence", "samples", kMinRecurrenceSamples, 100'000'000);
  const auto seed = ctx.cfg.integer("recurrence", "seed", 0, std::numeric_limits<std::int64_t>::max());
  const double L = estimate_L(sys, {2.0, 4.0, 6.0, 8.0});

  const auto rep =
      recurrence_report(sys, eps, te, T, samples, static_cast<std::uint64_t>(seed), L, ctx.workers);
  json est = json::array();
  for (const auto& m : rep.measure_estimates)
    est.push_back({{"epsilon", m.epsilon}, {"estimate", m.estimate}, {"standard_error", m.standard_error}});
  json j;
  j["command"] = "recurrence";
  j["epsilon_grid"] = rep.epsilon_grid;
  j["T_window"] = {rep.t_e, rep.T};
  j["measure_estimates"] = est;
  j["fitted_eps_exponent"] = rep.fitted_eps_exponent ? json(*rep.fitted_eps_exponent) : json(nullptr);
  j["L_used"] = rep.L_used;
  j["samples"] = rep.samples;
  j["seed"] = rep.seed;
  j["metric"] = rep.metric;
  j["rng"] = "splitmix64 counter stream";
  j["monotone_in_eps"] = rep.monotone;
  ctx.write_json("recurrence.json", j);
  return 0;
}

// ---------------------------------------------------------------------------
// escape

inline int cmd_escape(const Context& ctx) {
  const auto cat = config_cat_map(ctx.cfg);
  const double width = ctx.cfg.number("escape", "width", 1e-6, std::numbers::pi / 2);
  const int window = static_cast<int>(ctx.cfg.integer("escape", "window", 1, 200));
  const int f1_window = static_cast<int>(ctx.cfg.integer("escape", "f1_window", 1, 200));
  const double cone = ctx.cfg.number("escape", "cone", 1e-6, std::numbers::pi / 2);
  const int probe_K = static_cast<int>(ctx.cfg.integer("escape", "probe_trunc", 4, 64));
  const double probe_s = ctx.cfg.number("escape", "probe_s", 0.0, 8.0);

  const auto codir = codirection_map(cat);
  const auto conj = conjugacy_escape_weight(codir, width, 1.0);
  const auto avg = build_escape_m_G(codir, width, window);
  const auto f1 = build_escape_f1(codir, cone, f1_window);
  const auto probe = sign_convention_probe(conj.with_s(probe_s), probe_K);
  const auto mc = check_monotonicity(conj), ma = check_monotonicity(avg);

  std::ostringstream csv;
  csv << "theta,m_G,m_G_averaged\n";
  const auto gc = conj.grid_values(), ga = avg.grid_values();
  for (int i = 0; i < kDirectionGrid; ++i)
    csv << num(kTwoPi * i / kDirectionGrid) << ',' << num(gc[static_cast<std::size_t>(i)]) << ','
        << num(ga[static_cast<std::size_t>(i)]) << "\n";
  ctx.write("escape.csv", csv.str());

  json j;
  j["command"] = "escape";
  j["source_direction"] = codir.source_direction;
  j["sink_direction"] = codir.sink_direction;
  j["expansion_constant"] = codir.expansion_constant;
  j["monotonicity"] = {{"conjugacy", {{"violations", mc.violations}, {"worst_excess", mc.worst_excess}}},
                       {"averaged", {{"violations", ma.violations}, {"worst_excess", ma.worst_excess}}}};
  j["f1"] = {{"decay_c", f1.decay_c}, {"norm_c", f1.norm_c}};
  j["sign_probe"] = {{"s", probe.s},
                     {"K", probe.Ks},
                     {"correct", probe.correct},
                     {"flipped", probe.flipped},
                     {"correct_max", probe.correct_max},
                     {"flipped_exponent", probe.flipped_exponent}};
  ctx.write_json("escape.json", j);
  return 0;
}

// ---------------------------------------------------------------------------
// selftest

struct SelfCheck {
  std::string name;
  std::function<std::string()> run;  // empty string on success, else detail
};

inline std::vector<SelfCheck> selftest_checks() {
  const auto cat = std::make_shared<CatMapSystem>(default_cat_map());
  const auto sys = std::make_shared<SuspensionSystem>(unit_suspension(*cat));
  auto spec = std::make_shared<OrbitSpectrum>();
  auto ensure_spec = [cat, sys, spec]() -> const OrbitSpectrum& {
    if (spec->records.empty()) *spec = attach_poincare(enumerate_orbits(*sys, 20.0), *sys);
    return *spec;
  };
  auto fmtd = [](double v) { return num(v); };
  std::vector<SelfCheck> c;

  c.push_back({"systems: cat map is hyperbolic with entropy log lambda_u", [cat, fmtd] {
                 const double mu = (3.0 + std::sqrt(5.0)) / 2.0;
                 return std::abs(cat->entropy - std::log(mu)) <= 1e-14 ? "" : "entropy " + fmtd(cat->entropy);
               }});
  c.push_back({"systems: doubling the roof halves L", [cat, fmtd] {
                 const double l1 = estimate_L(unit_suspension(*cat), {2, 4, 6, 8});
                 const double l2 = estimate_L(build_suspension(*cat, TrigPolynomial{2.0, {}}), {2, 4, 6, 8});
                 return std::abs(l2 - 0.5 * l1) <= 1e-6 * l1 ? "" : "L = " + fmtd(l1) + ", " + fmtd(l2);
               }});
  c.push_back({"orbits: fixed-point counts equal brute-force enumeration for n <= 6", [cat] {
                 for (int n = 1; n <= 6; ++n) {
                   const IntMatrix2 m = cat->matrix.pow(n) - IntMatrix2::identity();
                   const std::int64_t D = checked_abs(m.det());
                   std::int64_t count = 0;
                   for (std::int64_t a = 0; a < D; ++a)
                     for (std::int64_t b = 0; b < D; ++b) {
                       const std::int64_t u = m(0, 0) * a + m(0, 1) * b, v = m(1, 0) * a + m(1, 1) * b;
                       if (mod_floor(u, D) == 0 && mod_floor(v, D) == 0) ++count;
                     }
                   if (count != count_fixed_points(*cat, n)) return "mismatch at n = " + std::to_string(n);
                 }
                 return std::string();
               }});
  c.push_back({"orbits: sum_{p|n} p N_p = #Fix(A^n) for n <= 20", [cat] {
                 const auto np = primitive_orbit_counts(*cat, 20);
                 for (int n = 1; n <= 20; ++n) {
                   std::int64_t s = 0;
                   for (int p = 1; p <= n; ++p)
                     if (n % p == 0) s += p * np.at(p);
                   if (s != count_fixed_points(*cat, n)) return "mismatch at n = " + std::to_string(n);
                 }
                 return std::string();
               }});
  c.push_back({"poincare: alternating wedge sum equals det(I - P) on the census", [ensure_spec] {
                 for (const auto& r : ensure_spec().records)
                   if (std::abs(alternating_wedge_sum(r.wedge_traces) - r.det_I_minus_P) > 1e-9 * r.abs_det)
                     return "period " + num(r.period);
                 return std::string();
               }});
  c.push_back({"poincare: sign of det(I - P) is constant with q = 1", [ensure_spec] {
                 return determine_q(ensure_spec()) == 1 ? "" : "q != 1";
               }});
  c.push_back({"zeta: zeta_1 equals 1 - e^{i lambda} on the 20x5 grid", [ensure_spec, fmtd] {
                 const auto& s = ensure_spec();
                 const auto g = fit_growth_law(s, 6.0, 12.0);
                 double worst = 0.0;
                 for (int i = 0; i < 20; ++i)
                   for (int k = 0; k < 5; ++k) {
                     const Complex l(-std::numbers::pi + kTwoPi * i / 19.0, 3.0 + k);
                     worst = std::max(worst, std::abs(zeta_1(s, g, l, 20.0).value - (1.0 - std::exp(Complex(0, 1) * l))));
                   }
                 return worst <= 1e-6 ? "" : "sup error " + fmtd(worst);
               }});
  c.push_back({"zeta: Dirichlet series matches the closed form of zeta_R", [ensure_spec, sys, fmtd] {
                 const auto& s = ensure_spec();
                 const auto g = fit_growth_law(s, 6.0, 12.0);
                 const auto oracle = continuation_oracle(*sys);
                 const Complex l(0.7, 3.0);
                 const double e = std::abs(std::exp(log_zeta_R(s, g, l, 20.0).value) - oracle.zeta_R(l));
                 return e <= 1e-6 ? "" : "error " + fmtd(e);
               }});
  c.push_back({"zeta: double pole at 0 and zeros at +-i h", [sys] {
                 const auto sing = locate_singularities(continuation_oracle(*sys), -0.5, 0.5, -1.5, 1.5);
                 int poles = 0, zeros = 0;
                 for (const auto& s : sing) {
                   if (s.winding == -2 && std::abs(s.center) < 1e-9) ++poles;
                   if (s.winding == 1) ++zeros;
                 }
                 return poles == 1 && zeros == 2 ? "" : "unexpected singularity set";
               }});
  c.push_back({"zeta: residue of f_0 at 0 equals 1", [sys, fmtd] {
                 const auto r = residue_check_f0(continuation_oracle(*sys), 0.0);
                 return std::abs(r.residue - 1.0) <= 1e-6 ? "" : "residue " + fmtd(r.residue);
               }});
  c.push_back({"flattrace: orbit-sum trace of U^n equals 1 and k-form sums equal 2 - tr A^n", [cat] {
                 for (int n = 1; n <= 6; ++n) {
                   if (flat_trace_forms(*cat, n, 0) != 1.0) return "k = 0 at n = " + std::to_string(n);
                   const double alt = flat_trace_forms(*cat, n, 0) - flat_trace_forms(*cat, n, 1) + flat_trace_forms(*cat, n, 2);
                   if (alt != lefschetz_number(*cat, n)) return "Lefschetz at n = " + std::to_string(n);
                 }
                 return std::string();
               }});
  c.push_back({"flattrace: mollified trace of U approximates 1", [cat, fmtd] {
                 const double v = mollified_trace(koopman_operator(*cat, 1, 256), build_mollifier(256, 1.0 / 16));
                 return std::abs(v - 1.0) <= 0.05 ? "" : "value " + fmtd(v);
               }});
  c.push_back({"flattrace: identity operator raises the divergence flag", [fmtd] {
                 const auto r = flat_trace(identity_operator(128), {1.0 / 8, 1.0 / 16, 1.0 / 32});
                 return r.divergence_flag && r.epsilon_exponent <= -1.8 ? "" : "exponent " + fmtd(r.epsilon_exponent);
               }});
  c.push_back({"anisotropic: forward codirection iterates converge to the sink", [cat] {
                 const auto cd = codirection_map(*cat);
                 for (int i = 0; i < 1000; ++i) {
                   double t = kTwoPi * (i + 0.5) / 1000;
                   if (cd.distance_to_source(t) <= 1e-3) continue;
                   for (int k = 0; k < 80; ++k) t = cd.B(t);
                   if (cd.distance_to_sink(t) > 1e-6) return "direction " + num(kTwoPi * (i + 0.5) / 1000);
                 }
                 return std::string();
               }});
  c.push_back({"anisotropic: m_G(B theta) <= m_G(theta) + 1e-12 on 10^4 directions", [cat] {
                 const auto m = check_monotonicity(conjugacy_escape_weight(codirection_map(*cat), 0.15));
                 return m.violations == 0 ? "" : std::to_string(m.violations) + " violations";
               }});
  c.push_back({"anisotropic: linear spectrum is {1} for K in {8, 16}, s in {1, 2, 4}", [cat] {
                 const auto cd = codirection_map(*cat);
                 for (double s : {1.0, 2.0, 4.0})
                   for (int K : {8, 16}) {
                     const auto sp = spectrum(assemble_operator(shear_perturbation(*cat, 0.0),
                                                                conjugacy_escape_weight(cd, 0.15, s), K), 0.0);
                     if (sp.eigenvalues.size() != 1 || std::abs(sp.eigenvalues[0] - 1.0) > 1e-10 ||
                         sp.max_essential_modulus > 1e-10)
                       return "K = " + std::to_string(K) + ", s = " + num(s);
                   }
                 return std::string();
               }});
  c.push_back({"anisotropic: sign convention probe", [cat, fmtd] {
                 const auto p = sign_convention_probe(*cat, 2.0, 16);
                 return p.correct_max <= 1.5 && p.flipped_exponent >= 1.5
                            ? ""
                            : "correct " + fmtd(p.correct_max) + ", flipped exponent " + fmtd(p.flipped_exponent);
               }});
  c.push_back({"recurrence: identical seed gives bit-identical estimates", [sys] {
                 const auto a = near_recurrence_measure(*sys, 0.03, 0.5, 2.5, 20000, 7, 1);
                 const auto b = near_recurrence_measure(*sys, 0.03, 0.5, 2.5, 20000, 7, 2);
                 return a.estimate == b.estimate ? "" : "estimates differ";
               }});
  c.push_back({"recurrence: periodic points are delta lambda^-n separated with delta >= 0.1", [cat, fmtd] {
                 const auto r = separation_constant(*cat, 6);
                 return r.delta >= 0.1 ? "" : "delta " + fmtd(r.delta);
               }});
  c.push_back({"recurrence: min |det(I - P)| over the census is 1", [ensure_spec, fmtd] {
                 const auto r = nondegeneracy_check(ensure_spec());
                 return r.min_abs_det == 1.0 ? "" : "min " + fmtd(r.min_abs_det);
               }});
  return c;
}

inline int cmd_selftest(const Context& ctx) {
  json results = json::array();
  int failed = 0;
  for (const auto& check : selftest_checks()) {
    std::string detail;
    try {
      detail = check.run();
    } catch (const std::exception& e) {
      detail = e.what();
    }
    const bool ok = detail.empty();
    if (!ok) ++failed;
    ctx.out << (ok ? "PASS " : "FAIL ") << check.name << (ok ? "" : ": " + detail) << "\n";
    results.push_back({{"name", check.name}, {"passed", ok}, {"detail", detail}});
  }
  json j;
  j["command"] = "selftest";
  j["checks"] = results;
  j["failed"] = failed;
  ctx.write_json("selftest.json", j);
  return failed == 0 ? 0 : 3;
}

// ---------------------------------------------------------------------------
// Entry point

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Closed orbits, zeta functions, flat traces and resonances of Anosov model systems"};
  app.require_subcommand(1);
  std::string config_path, out_dir, workers;
  app.add_option("--config", config_path, "run configuration file");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--workers", workers, "worker threads");

  struct Override {
    CLI::App* sub;
    CLI::Option* opt;
    std::string section, key;
    std::shared_ptr<std::string> value;
  };
  std::vector<Override> overrides;
  auto bind = [&](CLI::App* sub, const std::string& flag, const std::string& section, const std::string& key) {
    auto v = std::make_shared<std::string>();
    overrides.push_back({sub, sub->add_option(flag, *v), section, key, v});
  };

  std::vector<std::pair<CLI::App*, std::function<int(const Context&)>>> commands;
  auto* orbits = app.add_subcommand("orbits", "closed-orbit census with Poincare data (CSV)");
  bind(orbits, "--tmax", "orbits", "tmax");
  bind(orbits, "--max-word-length", "orbits", "max_word_length");
  commands.emplace_back(orbits, cmd_orbits);

  auto* zeta = app.add_subcommand("zeta", "zeta functions on a grid of lambda");
  for (const auto& [flag, key] : std::vector<std::pair<std::string, std::string>>{{"--re-min", "re_min"},
                                                                                 {"--re-max", "re_max"},
                                                                                 {"--im-min", "im_min"},
                                                                                 {"--im-max", "im_max"},
                                                                                 {"--grid", "grid"},
                                                                                 {"--tmax", "tmax"},
                                                                                 {"--function", "function"},
                                                                                 {"--degree", "degree"},
                                                                                 {"--fit-lo", "fit_lo"},
                                                                                 {"--fit-hi", "fit_hi"}})
    bind(zeta, flag, "zeta", key);
  commands.emplace_back(zeta, cmd_zeta);

  auto* trace = app.add_subcommand("trace", "mollified flat traces of Koopman powers");
  for (const auto& [flag, key] : std::vector<std::pair<std::string, std::string>>{
           {"--n", "n"}, {"--eps", "eps"}, {"--grid", "grid"}, {"--degree", "degree"}})
    bind(trace, flag, "trace", key);
  commands.emplace_back(trace, cmd_trace);

  auto* res = app.add_subcommand("resonances", "spectrum of the weighted truncated transfer operator");
  for (const auto& [flag, key] : std::vector<std::pair<std::string, std::string>>{{"--trunc", "trunc"},
                                                                                 {"--weight-s", "weight_s"},
                                                                                 {"--perturb-delta", "perturb_delta"},
                                                                                 {"--radius", "radius"},
                                                                                 {"--width", "width"},
                                                                                 {"--stability-trunc", "stability_trunc"}})
    bind(res, flag, "resonances", key);
  commands.emplace_back(res, cmd_resonances);

  auto* rec = app.add_subcommand("recurrence", "near-recurrence measure estimates (JSON)");
  for (const auto& [flag, key] : std::vector<std::pair<std::string, std::string>>{
           {"--eps", "eps"}, {"--te", "te"}, {"--T", "T"}, {"--samples", "samples"}, {"--seed", "seed"}})
    bind(rec, flag, "recurrence", key);
  commands.emplace_back(rec, cmd_recurrence);

  auto* esc = app.add_subcommand("escape", "escape functions on the codirection circle");
  for (const auto& [flag, key] : std::vector<std::pair<std::string, std::string>>{{"--width", "width"},
                                                                                 {"--window", "window"},
                                                                                 {"--f1-window", "f1_window"},
                                                                                 {"--cone", "cone"},
                                                                                 {"--probe-trunc", "probe_trunc"},
                                                                                 {"--probe-s", "probe_s"}})
    bind(esc, flag, "escape", key);
  commands.emplace_back(esc, cmd_escape);

  auto* self = app.add_subcommand("selftest", "run the invariant suite");
  commands.emplace_back(self, cmd_selftest);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    RunConfig cfg;
    if (!config_path.empty())
      cfg = load_config(config_path);
    else if (!self->parsed())
      fail("MissingParameter", "--config is required");
    for (const auto& o : overrides)
      if (o.sub->parsed() && o.opt->count() > 0) cfg.set(o.section, o.key, split_list(*o.value));
    if (!out_dir.empty()) cfg.set("run", "out", {out_dir});
    if (!workers.empty()) cfg.set("run", "workers", {workers});
    if (!cfg.has("run", "out")) cfg.set("run", "out", {"out"});
    if (!cfg.has("run", "workers")) cfg.set("run", "workers", {"1"});
    const int nworkers = static_cast<int>(cfg.integer("run", "workers", 1, 256));
    // [run] is left out of the embedded config.
    const std::filesystem::path dir = cfg.text("run", "out");
    RunConfig embedded;
    for (const auto& [sec, keys] : cfg.values())
      for (const auto& [k, v] : keys)
        if (!(sec == "run")) embedded.set(sec, k, v);
    Context ctx{embedded, dir, nworkers, out};
    for (const auto& [sub, fn] : commands)
      if (sub->parsed()) return fn(ctx);
    return 2;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.kind() == ErrorKind::Contract ? 3 : 2;
  } catch (const std::exception& e) {
    err << "error: Internal: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace anosov::cli

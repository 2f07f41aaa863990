#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "qnls/config.hpp"
#include "qnls/diagonalization.hpp"
#include "qnls/energy.hpp"
#include "qnls/report.hpp"
#include "qnls/solver.hpp"

using namespace qnls;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr int kPass = 0;
constexpr int kFail = 1;
constexpr int kInvalid = 2;

struct Common {
  std::string config;
  std::string out;
  long long seed = -1;
  int jobs = 1;
};

RunConfig load(const Common& o) {
  std::ifstream in(o.config);
  if (!in) throw ConfigError("/", "cannot open " + o.config);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("/", std::string("parse error: ") + e.what());
  }
  if (o.seed >= 0) {
    if (!j.is_object()) throw ConfigError("/", "expected an object");
    j["solver"]["seed"] = o.seed;
  }
  return parse_config(j);
}

fs::path out_dir(const Common& o, const RunConfig& c) { return o.out.empty() ? fs::path(c.output_dir) : fs::path(o.out); }

bool wants(const RunConfig& c, const std::string& fmt) {
  return std::find(c.formats.begin(), c.formats.end(), fmt) != c.formats.end();
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

void write_json(const fs::path& p, const json& j) {
  auto os = open_output(p);
  os << j.dump(2) << "\n";
}

json meta_json(const Meta& m) {
  json j;
  for (const auto& [k, v] : m) j[k] = v;
  return j;
}

void print_warnings(const RunConfig& c) {
  for (const std::string& w : c.warnings) std::cerr << "warning: " << w << "\n";
}

SchemeOptions scheme_options(const RunConfig& c) {
  SchemeOptions o;
  o.s0 = c.s0;
  o.s = c.s > 0.0 ? c.s : c.default_s();
  o.T_guess = c.T_guess;
  o.dt = c.dt;
  o.max_iterations = c.max_iterations;
  o.max_halvings = c.max_halvings;
  o.cut = c.cutoff();
  return o;
}

// ---------------------------------------------------------------- check

int cmd_check(const Common& o) {
  const RunConfig c = load(o);
  print_warnings(c);
  const HamiltonianModel m = c.model();
  const TorusGrid g = c.grid(m);
  const DoubledField U0 = c.initial_data(g);

  const auto jets = ellipticity_jets(c.d, &U0, c.ellipticity_radius, 256, c.seed);
  const EllipticityReport rep = check_ellipticity(m, jets, unit_directions(c.d, 16));

  json j;
  j["meta"] = meta_json(run_meta(c, g));
  j["ellipticity"]["constant"] = rep.constant;
  j["ellipticity"]["elliptic"] = rep.elliptic;
  j["ellipticity"]["samples"] = rep.samples;
  j["ellipticity"]["radius"] = c.ellipticity_radius;
  j["ellipticity"]["worst_xi"] = std::vector<double>(rep.worst_xi.begin(), rep.worst_xi.begin() + c.d);
  json wj = json::array();
  for (cplx y : rep.worst_jet) wj.push_back({y.real(), y.imag()});
  j["ellipticity"]["worst_jet"] = wj;
  j["structure"]["degree"] = m.F().degree();
  j["structure"]["real"] = m.F().is_real(1e-12);
  j["structure"]["special_form"] = m.is_special();
  j["structure"]["dealiasing_points"] = dealiasing_points(m, c.N);
  j["structure"]["s"] = c.s > 0.0 ? c.s : c.default_s();
  j["warnings"] = c.warnings;
  const bool pass = rep.elliptic && m.F().is_real(1e-12);
  j["pass"] = pass;

  if (wants(c, "json")) write_json(out_dir(o, c) / "check.json", j);
  std::cout << j.dump(2) << "\n";
  return pass ? kPass : kFail;
}

// ---------------------------------------------------------- diagnostics

Symbol x_times_xi1(const TorusGrid& g, const std::string& id, const CVec& f) {
  PolyTerm t;
  t.alpha = {1, 0, 0};
  t.coeff = f;
  return Symbol::polynomial(g, 1.0, Parity::Odd, id, {t});
}

int cmd_diagnostics(const Common& o) {
  const RunConfig c = load(o);
  print_warnings(c);
  const HamiltonianModel m = c.model();
  const TorusGrid g = c.grid(m);
  const CutoffSpec cut = c.cutoff();
  const DoubledField U0 = c.initial_data(g);
  const Meta meta = run_meta(c, g);
  const fs::path dir = out_dir(o, c);
  const double s_eval = c.s > 0.0 ? c.s : c.default_s();

  json j;
  j["meta"] = meta_json(meta);
  bool hard_fail = false;

  // quantization of constants and multipliers
  {
    const cplx k(0.7, -0.2);
    const ParaOperator C = opbw_assemble(Symbol::constant(g, k), cut);
    const double e_const =
        (C.matrix() - k * Eigen::MatrixXcd::Identity(C.matrix().rows(), C.matrix().cols())).cwiseAbs().maxCoeff();
    const int d = g.dim();
    auto w = [d](const Xi& xi) { return cplx(xi_norm_sq(xi, d) + xi[0], 0.0); };
    const ParaOperator W = opbw_assemble(Symbol::multiplier(g, 2.0, Parity::None, "w", w), cut);
    double e_mult = 0.0;
    for (std::size_t a = 0; a < g.lattice_size(); ++a)
      for (std::size_t b = 0; b < g.lattice_size(); ++b) {
        const Index ja = g.lattice_point(a);
        const Xi xa{double(ja[0]), double(ja[1]), double(ja[2])};
        const cplx want = a == b ? w(xa) : cplx(0.0);
        e_mult = std::max(e_mult, std::abs(W.matrix()(a, b) - want));
      }
    j["quantization"] = {{"constant_error", e_const}, {"multiplier_error", e_mult}};
  }

  // paraproduct and composition remainders on fixed smooth factors
  std::vector<SlopeRow> rows;
  {
    const SpectralField f = smooth_random_field(g, c.seed + 11, 1.0, 1.0);
    const SpectralField h = smooth_random_field(g, c.seed + 12, 1.0, 1.0);
    rows.push_back({"paraproduct", frequency_growth(
                                       [&](const SpectralField& u) { return paraproduct_remainder(f, u, cut); }, g)});
    const CVec fx = to_physical(f), hx = to_physical(h);
    const Symbol a = x_times_xi1(g, "f_xi", fx), b = x_times_xi1(g, "h_xi", hx);
    for (double rho : {1.0, 2.0}) {
      const CompositionRemainder R = composition_remainder(a, b, rho, cut);
      rows.push_back({"composition_rho" + meta_number(rho),
                      frequency_growth([&](const SpectralField& u) { return R.apply(u); }, g)});
    }
  }

  // action ratio of the principal symbol on random fields
  std::optional<DiagonalizationPack> pack;
  try {
    pack = build_pack(m, U0);
  } catch (const EllipticityError& e) {
    j["ellipticity_error"] = e.what();
    hard_fail = true;
  }

  if (pack) {
    const ParaOperator A2 = opbw_assemble(pack->a2, cut);
    std::vector<double> ratios;
    for (int t = 0; t < 50; ++t) {
      const SpectralField u = smooth_random_field(g, c.seed + 100 + t, 1.0, 0.2);
      ratios.push_back(sobolev_norm(A2.apply(u), c.s0 - 2.0) / sobolev_norm(u, c.s0));
    }
    j["action"] = {{"sup_ratio", *std::max_element(ratios.begin(), ratios.end())},
                   {"seminorm", seminorm(pack->a2, 2.0, c.s0, 2)}};
    if (wants(c, "csv")) {
      auto os = open_output(dir / "action.csv");
      for (const auto& [k, v] : meta) os << "# " << k << "=" << v << "\n";
      os << "trial,ratio\n" << std::setprecision(12);
      for (std::size_t t = 0; t < ratios.size(); ++t) os << t << "," << ratios[t] << "\n";
    }
  }

  if (pack) {
    const auto ops = std::make_shared<const PackOperators>(assemble_pack(*pack, cut));
    rows.push_back({"parametrix_with_star", doubled_growth(parametrix_residual(*ops, true), g)});
    rows.push_back({"parametrix_without_star", doubled_growth(parametrix_residual(*ops, false), g)});
    rows.push_back({"offdiag_undiagonalized",
                    offdiagonal_growth([&](const DoubledField& V) { return ops->EA.apply(V); }, g)});
    rows.push_back({"offdiag_residual", offdiagonal_growth(principal_residual(*ops), g)});
    rows.push_back({"offdiag_before_corrector", offdiagonal_growth(
                                                    [&](const DoubledField& V) {
                                                      return ops->principal.apply(V) + ops->D1.apply(V);
                                                    },
                                                    g)});
    rows.push_back({"offdiag_after_corrector",
                    offdiagonal_growth([&](const DoubledField& V) { return ops->corrected(V); }, g)});

    const ModifiedEnergy E(*pack, ops, c.sigma, cut);
    const EquivalenceResult eq = equivalence_check(E, c.trials, c.seed);
    const GardingResult ga = garding_check(E, c.trials, c.seed + 1);
    j["equivalence"] = {{"C_r", finite_or_null(eq.C_r)}, {"pass", eq.pass}, {"trials", eq.trials.size()}};
    j["garding"] = {{"C_r", finite_or_null(ga.C_r)},
                    {"C_theta", finite_or_null(ga.C_theta)},
                    {"pass", ga.pass},
                    {"failure", ga.failure},
                    {"trials", ga.trials.size()}};
    hard_fail = hard_fail || !eq.pass || !ga.pass;
    if (wants(c, "csv")) {
      auto e1 = open_output(dir / "equivalence.csv");
      write_trials_csv(e1, eq.trials, eq.C_r, 0.0, meta);
      auto e2 = open_output(dir / "garding.csv");
      write_trials_csv(e2, ga.trials, ga.C_r, ga.C_theta, meta);
    }
  } else {
    j["garding"] = {{"pass", false}, {"failure", "ellipticity lost on the background"}};
    j["equivalence"] = {{"pass", false}};
  }

  for (const SlopeRow& r : rows) j["slopes"][r.label] = slope_json(r.fit);
  j["s"] = s_eval;
  j["pass"] = !hard_fail;
  if (wants(c, "csv")) {
    auto os = open_output(dir / "slopes.csv");
    write_slopes_csv(os, rows, meta);
  }
  if (wants(c, "json")) write_json(dir / "diagnostics.json", j);
  std::cout << j.dump(2) << "\n";
  return hard_fail ? kFail : kPass;
}

// ---------------------------------------------------------------- solve

void write_contraction_csv(std::ostream& os, const SchemeResult& s, const Meta& meta) {
  for (const auto& [k, v] : meta) os << "# " << k << "=" << v << "\n";
  os << "m,difference,ratio,bound\n" << std::setprecision(12);
  for (std::size_t k = 0; k < s.differences.size(); ++k) {
    os << k + 1 << "," << s.differences[k] << ",";
    if (k > 0) os << s.ratios[k - 1];
    os << "," << std::ldexp(s.r, -int(k + 1)) << "\n";
  }
}

int cmd_solve(const Common& o) {
  const RunConfig c = load(o);
  print_warnings(c);
  const HamiltonianModel m = c.model();
  const TorusGrid g = c.grid(m);
  const DoubledField U0 = c.initial_data(g);
  Meta meta = run_meta(c, g);
  const fs::path dir = out_dir(o, c);

  const auto jets = ellipticity_jets(c.d, &U0, 1.0, 0, c.seed);
  if (!check_ellipticity(m, jets, unit_directions(c.d, 16)).elliptic) {
    std::cerr << "solve: model is not elliptic along the initial data\n";
    return kFail;
  }

  NonlinearResult res;
  try {
    res = nonlinear_solve(m, U0, scheme_options(c));
  } catch (const SolverError& e) {
    std::cerr << "solve: " << e.what() << "\n";
    return kFail;
  } catch (const EllipticityError& e) {
    std::cerr << "solve: " << e.what() << "\n";
    return kFail;
  }
  SolveReport& rep = res.report;
  rep.certificates["r"] = res.scheme.r;
  rep.certificates["theta"] = res.scheme.bounds.theta;
  rep.certificates["initial_norm_s"] = sobolev_norm(U0.plus, scheme_options(c).s);
  if (c.model_kind == "linear")
    rep.certificates["exact_flow_error"] =
        relative_l2(res.inviscid.iterates.back().back(), exact_linear_flow(U0, res.scheme.certified_T));

  if (wants(c, "csv")) {
    auto os = open_output(dir / "trajectory.csv");
    rep.write_csv(os, meta);
    auto cs = open_output(dir / "contraction.csv");
    write_contraction_csv(cs, res.scheme, meta);
  }
  std::ostringstream js;
  rep.write_json(js, meta);
  json j = json::parse(js.str());
  j["ratios"] = res.scheme.ratios;
  j["differences"] = res.scheme.differences;
  j["warnings"] = c.warnings;
  if (wants(c, "json")) write_json(dir / "summary.json", j);
  std::cout << j.dump(2) << "\n";
  return res.scheme.certified ? kPass : kFail;
}

// ---------------------------------------------------------------- sweep

struct SweepPoint {
  double amplitude = 0.0;
  double norm = 0.0;
  double T = 0.0;
  double max_ratio = 0.0;
  double oracle = 0.0;
  double drift = 0.0;
  bool certified = false;
  std::string error;
};

int cmd_sweep(const Common& o, std::vector<double> scales) {
  const RunConfig c = load(o);
  print_warnings(c);
  const HamiltonianModel m = c.model();
  const TorusGrid g = c.grid(m);
  const Meta meta = run_meta(c, g);
  const fs::path dir = out_dir(o, c);
  const SchemeOptions so = scheme_options(c);

  std::vector<SweepPoint> pts(scales.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < pts.size();) {
      SweepPoint& p = pts[i];
      RunConfig ci = c;
      ci.amplitude = c.amplitude * scales[i];
      p.amplitude = ci.amplitude;
      const TorusGrid gi = ci.grid(m);
      const DoubledField U0 = ci.initial_data(gi);
      p.norm = sobolev_norm(U0.plus, c.s0 + 3.0);
      try {
        const NonlinearResult r = nonlinear_solve(m, U0, so);
        p.T = r.scheme.certified_T;
        p.certified = r.scheme.certified;
        p.oracle = r.oracle_error;
        p.drift = r.hamiltonian_drift;
        for (std::size_t k = 1; k < r.scheme.ratios.size(); ++k) p.max_ratio = std::max(p.max_ratio, r.scheme.ratios[k]);
      } catch (const std::exception& e) {
        p.error = e.what();
      }
    }
  };
  const int jobs = std::max(1, std::min<int>(o.jobs, int(pts.size())));
  std::vector<std::thread> pool;
  for (int t = 1; t < jobs; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  // viscosity sweep for the problem linearized at the initial data
  const DoubledField U0 = c.initial_data(g);
  LinearProblem lp = make_linear_problem(m, Trajectory::constant(U0, c.T), c.s0, 0.0, c.cutoff());
  SolveOptions opt;
  opt.T = c.T;
  opt.dt = c.dt;
  opt.sigmas = c.sigmas;
  const ViscosityLimit v = viscosity_limit(lp, U0, c.visc_eps, opt, c.sigma);

  json j;
  j["meta"] = meta_json(meta);
  for (const SweepPoint& p : pts)
    j["amplitude"].push_back({{"amplitude", p.amplitude},
                              {"norm_s0_plus_3", p.norm},
                              {"certified_T", p.T},
                              {"certified", p.certified},
                              {"max_ratio", p.max_ratio},
                              {"oracle_error", p.oracle},
                              {"hamiltonian_drift", p.drift},
                              {"error", p.error}});
  j["viscosity"]["eps"] = v.eps;
  j["viscosity"]["differences"] = v.differences;
  j["viscosity"]["per_halving"] = v.per_halving;
  j["viscosity"]["cauchy"] = v.cauchy;
  for (const GrowthFit& f : v.growth) j["viscosity"]["growth"].push_back({{"C_r", f.C_r}, {"C_theta", f.C_theta}});

  if (wants(c, "csv")) {
    auto os = open_output(dir / "sweep_amplitude.csv");
    for (const auto& [k, val] : meta) os << "# " << k << "=" << val << "\n";
    os << "amplitude,norm_s0_plus_3,certified_T,certified,max_ratio,oracle_error,hamiltonian_drift\n"
       << std::setprecision(12);
    for (const SweepPoint& p : pts)
      os << p.amplitude << "," << p.norm << "," << p.T << "," << (p.certified ? 1 : 0) << "," << p.max_ratio << ","
         << p.oracle << "," << p.drift << "\n";
    auto vs = open_output(dir / "sweep_viscosity.csv");
    for (const auto& [k, val] : meta) vs << "# " << k << "=" << val << "\n";
    vs << "eps,C_r,C_theta,difference,per_halving\n" << std::setprecision(12);
    for (std::size_t k = 0; k < v.eps.size(); ++k) {
      vs << v.eps[k] << "," << v.growth[k].C_r << "," << v.growth[k].C_theta << ",";
      if (k < v.differences.size()) vs << v.differences[k];
      vs << ",";
      if (k < v.per_halving.size()) vs << v.per_halving[k];
      vs << "\n";
    }
  }
  if (wants(c, "json")) write_json(dir / "sweep.json", j);
  std::cout << j.dump(2) << "\n";
  bool ok = true;
  for (const SweepPoint& p : pts) ok = ok && p.certified && p.error.empty();
  return ok ? kPass : kFail;
}

void add_common(CLI::App* sub, Common& o) {
  sub->add_option("--config", o.config, "Run configuration (JSON)")->required()->check(CLI::ExistingFile);
  sub->add_option("--out", o.out, "Output directory (default: outputs.directory)");
  sub->add_option("--seed", o.seed, "Override solver.seed")->check(CLI::NonNegativeNumber);
  sub->add_option("--jobs", o.jobs, "Parallel jobs for sweeps")->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Paradifferential toolkit for quasilinear Schroedinger equations on the torus"};
  app.require_subcommand(1);
  Common o;
  std::vector<double> scales{1.0, 2.0, 4.0, 8.0};

  auto* check = app.add_subcommand("check", "Ellipticity and structure checks");
  auto* diag = app.add_subcommand("diagnostics", "Remainder slopes, parametrix and energy certificates");
  auto* solve = app.add_subcommand("solve", "Iterative scheme with oracle comparison");
  auto* sweep = app.add_subcommand("sweep", "Amplitude and viscosity sweeps");
  for (auto* s : {check, diag, solve, sweep}) add_common(s, o);
  sweep->add_option("--scales", scales, "Amplitude multipliers");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kInvalid;
  }

  try {
    if (*check) return cmd_check(o);
    if (*diag) return cmd_diagnostics(o);
    if (*solve) return cmd_solve(o);
    if (*sweep) return cmd_sweep(o, scales);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kInvalid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFail;
  }
  return kInvalid;
}

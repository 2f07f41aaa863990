#include "qnls/solver.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <json.hpp>
#include <ostream>

namespace qnls {

Trajectory Trajectory::constant(const DoubledField& U, double T) {
  Trajectory tr(0.0, T);
  tr.push(U);
  return tr;
}

DoubledField Trajectory::at(double t) const {
  if (samples_.empty()) throw std::logic_error("Trajectory::at: empty trajectory");
  const std::size_t n = samples_.size();
  if (n == 1) return samples_[0];
  const double x = (t - t0_) / dt_;
  const double xr = std::round(x);
  if (std::abs(x - xr) < 1e-9 && xr >= 0.0 && xr <= double(n - 1))
    return samples_[std::size_t(xr)];
  const std::size_t k = std::min<std::size_t>(4, n);
  const long i = long(std::floor(x));
  const long start = std::clamp<long>(i - 1, 0, long(n - k));
  DoubledField out = DoubledField::zero(samples_[0].grid());
  for (std::size_t a = 0; a < k; ++a) {
    double w = 1.0;
    for (std::size_t b = 0; b < k; ++b)
      if (b != a) w *= (x - double(start + long(b))) / double(long(a) - long(b));
    out += cplx(w) * samples_[start + a];
  }
  return out;
}

double sup_norm(const Trajectory& U, double s) {
  double m = 0.0;
  for (std::size_t i = 0; i < U.size(); ++i) m = std::max(m, sobolev_norm(U[i].plus, s));
  return m;
}

double sup_distance(const Trajectory& A, const Trajectory& B, double s) {
  const std::size_t n = std::min(A.size(), B.size());
  double m = 0.0;
  for (std::size_t i = 0; i < n; ++i) m = std::max(m, sobolev_norm(A[i].plus - B[i].plus, s));
  return m;
}

BackgroundBounds measure_bounds(const Trajectory& U, double s0) {
  BackgroundBounds b;
  double top = 0.0, dt_norm = 0.0;
  for (std::size_t i = 0; i < U.size(); ++i) {
    b.r = std::max(b.r, sobolev_norm(U[i].plus, s0 + 1.0));
    top = std::max(top, sobolev_norm(U[i].plus, s0 + 3.0));
    if (i > 0)
      dt_norm = std::max(dt_norm, sobolev_norm(U[i].plus - U[i - 1].plus, s0 + 1.0) / U.dt());
  }
  b.theta = top + dt_norm;
  return b;
}

Forcing sampled_forcing(Trajectory R) {
  return [R = std::move(R)](double t, const DoubledOperator&) { return R.at(t); };
}

LinearProblem make_linear_problem(const HamiltonianModel& m, Trajectory background, double s0,
                                  double visc_eps, const CutoffSpec& cut) {
  LinearProblem p;
  p.model = m;
  p.bounds = measure_bounds(background, s0);
  p.background = std::move(background);
  p.visc_eps = visc_eps;
  p.s0 = s0;
  p.cut = cut;
  return p;
}

GrowthFit fit_growth(const std::vector<double>& t, const std::vector<double>& norms) {
  GrowthFit f;
  if (t.size() < 2 || norms.empty() || norms[0] <= 0.0) return f;
  std::vector<double> rho(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) rho[i] = std::log(norms[i] / norms[0]);
  double mt = 0.0, mr = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    mt += t[i];
    mr += rho[i];
  }
  mt /= double(t.size());
  mr /= double(t.size());
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    sxy += (t[i] - mt) * (rho[i] - mr);
    sxx += (t[i] - mt) * (t[i] - mt);
  }
  f.C_theta = sxx > 0.0 ? std::max(0.0, sxy / sxx) : 0.0;
  double lead = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) lead = std::max(lead, rho[i] - f.C_theta * t[i]);
  f.C_r = std::exp(lead);
  return f;
}

// ---------------------------------------------------------------------------

namespace {

void record(SolveReport& rep, double t, const DoubledField& U, const HamiltonianModel* energy_model) {
  rep.times.push_back(t);
  std::vector<double> row;
  for (double s : rep.sigmas) row.push_back(sobolev_norm(U.plus, s));
  for (double v : row)
    if (!std::isfinite(v)) throw SolverError("non-finite norm at t = " + std::to_string(t));
  rep.norms.push_back(std::move(row));
  if (energy_model) rep.energy.push_back(hamiltonian(*energy_model, U.plus));
  rep.trajectory.push(U);
}

DoubledOperator step_operator(const HamiltonianModel& m, const DoubledField& Ub, const CutoffSpec& cut) {
  return paralinear_operator(build_matrices(build_symbols(m, Ub)), cut);
}

void check_cfl(const TorusGrid& g, double dt, double cfl) {
  const double N = g.freq_cut();
  if (!(dt > 0.0) || dt * g.dim() * N * N > cfl)
    throw SolverError("time step violates dt * d * N^2 <= " + std::to_string(cfl));
}

int step_count(double T, double dt) {
  const double n = T / dt;
  const long r = std::lround(n);
  return int(std::abs(n - double(r)) < 1e-6 ? r : long(std::ceil(n)));
}

}  // namespace

SolveReport linear_flow(const LinearProblem& p, const DoubledField& U0, const SolveOptions& opt) {
  const TorusGrid& g = U0.grid();
  check_cfl(g, opt.dt, p.cfl);
  const int steps = step_count(opt.T, opt.dt);
  const double h = opt.T / steps;
  const double eps = p.visc_eps;
  const bool frozen = p.background.size() == 1;

  SolveReport rep;
  rep.sigmas = opt.sigmas;
  rep.trajectory = Trajectory(0.0, h);
  const HamiltonianModel* em = opt.track_energy ? &p.model : nullptr;
  record(rep, 0.0, U0, em);

  auto visc = [&](double tau, const DoubledField& V) {
    return eps > 0.0 ? viscous_semigroup(tau, eps, V) : V;
  };

  DoubledOperator P;
  if (frozen) P = step_operator(p.model, p.background[0], p.cut);
  DoubledField U = U0;
  for (int n = 0; n < steps; ++n) {
    const double t = n * h;
    if (!frozen) P = step_operator(p.model, p.background.at(t + 0.5 * h), p.cut);
    auto f = [&](double tau, const DoubledField& V) {
      DoubledField r = P.apply(V);
      if (p.forcing) r += p.forcing(tau, P);
      return r;
    };
    const DoubledField k1 = f(t, U);
    const DoubledField k2 = f(t + 0.5 * h, visc(0.5 * h, U + cplx(0.5 * h) * k1));
    const DoubledField k3 = f(t + 0.5 * h, visc(0.5 * h, U) + cplx(0.5 * h) * k2);
    const DoubledField k4 = f(t + h, visc(h, U) + cplx(h) * visc(0.5 * h, k3));
    DoubledField incr = visc(h, k1) + cplx(2.0) * visc(0.5 * h, k2 + k3) + k4;
    U = visc(h, U) + cplx(h / 6.0) * incr;
    record(rep, t + h, U, em);
  }
  rep.certificates["visc_eps"] = eps;
  rep.certificates["T"] = opt.T;
  rep.certificates["dt"] = h;
  return rep;
}

SolveReport linear_inhomogeneous(const LinearProblem& p, const DoubledField& U0,
                                 const SolveOptions& opt) {
  return linear_flow(p, U0, opt);
}

ViscosityLimit viscosity_limit(const LinearProblem& p, const DoubledField& U0,
                               const std::vector<double>& eps_list, const SolveOptions& opt,
                               double sigma) {
  if (eps_list.size() < 2) throw std::invalid_argument("viscosity_limit: need at least two eps");
  for (std::size_t k = 1; k < eps_list.size(); ++k)
    if (!(eps_list[k] < eps_list[k - 1]) || eps_list[k] < 0.0)
      throw std::invalid_argument("viscosity_limit: eps list must decrease to a value >= 0");
  ViscosityLimit out;
  out.eps = eps_list;
  for (double e : eps_list) {
    LinearProblem q = p;
    q.visc_eps = e;
    out.runs.push_back(linear_flow(q, smooth_data(e, U0), opt));
    const SolveReport& r = out.runs.back();
    std::vector<double> ns;
    const auto it = std::find(r.sigmas.begin(), r.sigmas.end(), sigma);
    for (std::size_t i = 0; i < r.times.size(); ++i)
      ns.push_back(it != r.sigmas.end() ? r.norms[i][it - r.sigmas.begin()]
                                        : sobolev_norm(r.trajectory[i].plus, sigma));
    out.growth.push_back(fit_growth(r.times, ns));
  }
  for (std::size_t k = 0; k + 1 < out.runs.size(); ++k)
    out.differences.push_back(
        sup_distance(out.runs[k].trajectory, out.runs[k + 1].trajectory, sigma));
  out.cauchy = true;
  for (std::size_t k = 0; k + 1 < out.differences.size(); ++k) {
    const double gap0 = eps_list[k] - eps_list[k + 1];
    const double gap1 = eps_list[k + 1] - eps_list[k + 2];
    const double halvings = std::log2(gap0 / gap1);
    const double ratio = out.differences[k] / out.differences[k + 1];
    const double per = std::pow(ratio, 1.0 / halvings);
    out.per_halving.push_back(per);
    if (!(per >= 2.0)) out.cauchy = false;
  }
  // linear extrapolation in eps from the two smallest values
  const std::size_t a = eps_list.size() - 1, b = a - 1;
  const Trajectory& Ta = out.runs[a].trajectory;
  const Trajectory& Tb = out.runs[b].trajectory;
  const double w = eps_list[a] / (eps_list[b] - eps_list[a]);
  out.extrapolated = Trajectory(0.0, Ta.dt());
  for (std::size_t i = 0; i < std::min(Ta.size(), Tb.size()); ++i)
    out.extrapolated.push(Ta[i] + cplx(w) * (Ta[i] - Tb[i]));
  return out;
}

// ---------------------------------------------------------------------------

double contraction_index(const HamiltonianModel& m, double s0) {
  return m.is_special() ? s0 : s0 + 1.0;
}

namespace {

double default_viscosity(const TorusGrid& g, double dt) {
  const double N = g.freq_cut();
  return std::min(1e-3, dt * N * N * 1e-2);
}

// One step of the scheme: background U^{n-1}, forcing full_rhs(U^{n-1}) - P U^{n-1}.
SolveReport scheme_step(const HamiltonianModel& m, const Trajectory& prev, const DoubledField& U0,
                        double T, double visc_eps, const SchemeOptions& opt) {
  LinearProblem p;
  p.model = m;
  p.background = prev;
  p.visc_eps = visc_eps;
  p.s0 = opt.s0;
  p.cut = opt.cut;
  p.forcing = [&m, &prev](double t, const DoubledOperator& P) {
    const DoubledField Ub = prev.at(t);
    return full_rhs(m, Ub) - P.apply(Ub);
  };
  SolveOptions so;
  so.T = T;
  so.dt = opt.dt;
  so.sigmas = {0.0, contraction_index(m, opt.s0), opt.s};
  return linear_flow(p, U0, so);
}

}  // namespace

SchemeResult run_iterations(const HamiltonianModel& m, const DoubledField& U0, double T,
                            double visc_eps, const SchemeOptions& opt) {
  SchemeResult res;
  res.certified_T = T;
  res.visc_eps = visc_eps;
  const double idx = contraction_index(m, opt.s0);
  res.r = sobolev_norm(U0.plus, idx);
  const int steps = step_count(T, opt.dt);
  // U^0(t) = U0, sampled on the step grid so iterates share their sample times
  Trajectory prev(0.0, T / steps);
  for (int i = 0; i <= steps; ++i) prev.push(U0);
  res.certified = true;
  for (int it = 1; it <= opt.max_iterations; ++it) {
    const BackgroundBounds b = measure_bounds(prev, opt.s0);
    res.bounds.theta = std::max(res.bounds.theta, b.theta);
    res.bounds.r = std::max(res.bounds.r, b.r);
    SolveReport rep = scheme_step(m, prev, U0, T, visc_eps, opt);
    const double diff = sup_distance(rep.trajectory, prev, idx);
    res.differences.push_back(diff);
    if (res.differences.size() > 1) {
      const double before = res.differences[res.differences.size() - 2];
      res.ratios.push_back(before > 0.0 ? diff / before : 0.0);
    }
    if (diff > std::ldexp(res.r, -it)) res.certified = false;
    res.iterations = it;
    prev = rep.trajectory;
    res.report = std::move(rep);
    if (diff <= opt.tolerance * std::max(res.r, 1e-300)) break;
  }
  res.iterates = {prev};
  res.report.certificates["iterations"] = res.iterations;
  res.report.certificates["r"] = res.r;
  res.report.certificates["theta"] = res.bounds.theta;
  res.report.certificates["certified_T"] = T;
  res.report.certificates["visc_eps"] = visc_eps;
  res.report.certificates["last_difference"] = res.differences.back();
  double worst = 0.0;
  for (std::size_t k = 1; k < res.ratios.size(); ++k) worst = std::max(worst, res.ratios[k]);
  res.report.certificates["max_ratio_m_ge_2"] = worst;
  res.report.flags["contraction"] = res.certified;
  return res;
}

SchemeResult iterate_scheme(const HamiltonianModel& m, const DoubledField& U0,
                            const SchemeOptions& opt) {
  const double visc = opt.visc_eps < 0.0 ? default_viscosity(U0.grid(), opt.dt) : opt.visc_eps;
  double T = opt.T_guess;
  SchemeResult res;
  for (int h = 0; h <= opt.max_halvings; ++h) {
    res = run_iterations(m, U0, T, visc, opt);
    res.halvings = h;
    if (res.certified) return res;
    T *= 0.5;
  }
  return res;
}

SolveReport reference_solver(const HamiltonianModel& m, const DoubledField& U0,
                             const SolveOptions& opt) {
  const int steps = step_count(opt.T, opt.dt);
  const double h = opt.T / steps;
  SolveReport rep;
  rep.sigmas = opt.sigmas;
  rep.trajectory = Trajectory(0.0, h);
  const HamiltonianModel* em = opt.track_energy ? &m : nullptr;
  record(rep, 0.0, U0, em);
  const double start = std::max(sobolev_norm(U0.plus, 0.0), 1e-300);
  DoubledField U = U0;
  for (int n = 0; n < steps; ++n) {
    const DoubledField k1 = full_rhs(m, U);
    const DoubledField k2 = full_rhs(m, U + cplx(0.5 * h) * k1);
    const DoubledField k3 = full_rhs(m, U + cplx(0.5 * h) * k2);
    const DoubledField k4 = full_rhs(m, U + cplx(h) * k3);
    U += cplx(h / 6.0) * (k1 + cplx(2.0) * (k2 + k3) + k4);
    record(rep, (n + 1) * h, U, em);
    if (sobolev_norm(U.plus, 0.0) > 10.0 * start)
      throw SolverError("reference solver: L2 norm grew tenfold by t = " + std::to_string((n + 1) * h));
  }
  return rep;
}

NonlinearResult nonlinear_solve(const HamiltonianModel& m, const DoubledField& U0,
                                const SchemeOptions& opt) {
  NonlinearResult out;
  out.scheme = iterate_scheme(m, U0, opt);
  const double T = out.scheme.certified_T;
  out.inviscid = run_iterations(m, U0, T, 0.0, opt);
  SolveOptions so;
  so.T = T;
  so.dt = opt.dt;
  so.sigmas = {0.0, contraction_index(m, opt.s0), opt.s};
  out.reference = reference_solver(m, U0, so);
  const Trajectory& lim = out.inviscid.iterates.back();
  out.oracle_error = relative_l2(lim.back().plus, out.reference.trajectory.back().plus);

  out.report = out.inviscid.report;
  out.report.energy.clear();
  const double H0 = hamiltonian(m, U0.plus);
  for (std::size_t i = 0; i < lim.size(); ++i) {
    const double H = hamiltonian(m, lim[i].plus);
    out.report.energy.push_back(H);
    out.hamiltonian_drift = std::max(out.hamiltonian_drift, std::abs(H - H0) / std::abs(H0));
  }
  auto& c = out.report.certificates;
  c["certified_T"] = T;
  c["halvings"] = out.scheme.halvings;
  c["scheme_visc_eps"] = out.scheme.visc_eps;
  c["oracle_error"] = out.oracle_error;
  c["hamiltonian_drift"] = out.hamiltonian_drift;
  double worst = 0.0;
  for (std::size_t k = 1; k < out.scheme.ratios.size(); ++k) worst = std::max(worst, out.scheme.ratios[k]);
  c["scheme_max_ratio_m_ge_2"] = worst;
  out.report.flags["contraction"] = out.scheme.certified;
  out.report.flags["oracle_agreement"] = out.oracle_error <= 1e-5;
  out.report.flags["hamiltonian_conserved"] = out.hamiltonian_drift <= 1e-4;
  return out;
}

DoubledField exact_linear_flow(const DoubledField& U0, double t) {
  const int d = U0.grid().dim();
  const SpectralField u = multiplier_apply(
      [d, t](const Index& j) { return std::polar(1.0, index_norm_sq(j, d) * t); }, U0.plus);
  return DoubledField::from_plus(u);
}

// ---------------------------------------------------------------------------

void SolveReport::write_csv(std::ostream& os, const std::map<std::string, std::string>& meta) const {
  for (const auto& [k, v] : meta) os << "# " << k << "=" << v << "\n";
  os << "t";
  for (double s : sigmas) os << ",norm_s" << s;
  if (!energy.empty()) os << ",H";
  os << "\n" << std::setprecision(12);
  for (std::size_t i = 0; i < times.size(); ++i) {
    os << times[i];
    for (double v : norms[i]) os << "," << v;
    if (i < energy.size()) os << "," << energy[i];
    os << "\n";
  }
}

void SolveReport::write_json(std::ostream& os, const std::map<std::string, std::string>& meta) const {
  nlohmann::json j;
  for (const auto& [k, v] : meta) j["meta"][k] = v;
  for (const auto& [k, v] : certificates) j["certificates"][k] = std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
  for (const auto& [k, v] : flags) j["flags"][k] = v;
  j["steps"] = times.empty() ? 0 : times.size() - 1;
  j["final_time"] = times.empty() ? 0.0 : times.back();
  os << j.dump(2) << "\n";
}

}  // namespace qnls

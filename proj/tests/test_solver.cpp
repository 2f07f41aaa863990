#include <doctest.h>

#include <sstream>

#include <json.hpp>

#include "oracles/oracles.hpp"
#include "qnls/solver.hpp"

using namespace qnls;

namespace {

// exp((i |n|^2 - eps |n|^4) t) u(n)
DoubledField damped_flow(const DoubledField& U0, double t, double eps) {
  const int d = U0.grid().dim();
  return DoubledField::from_plus(multiplier_apply(
      [=](const Index& j) {
        const double r2 = index_norm_sq(j, d);
        return std::exp(cplx(-eps * r2 * r2 * t, r2 * t));
      },
      U0.plus));
}

}  // namespace

TEST_CASE("trajectory interpolation is exact on cubics") {
  const TorusGrid g = TorusGrid::with_min_points(1, 4);
  const SpectralField base = smooth_random_field(g, 1, 1.0, 0.5);
  auto f = [](double t) { return 1.0 + 2.0 * t - t * t + 0.5 * t * t * t; };
  Trajectory tr(0.0, 0.1);
  for (int i = 0; i <= 10; ++i) tr.push(DoubledField::from_plus(cplx(f(0.1 * i)) * base));
  for (double t : {0.03, 0.47, 0.95}) {
    const DoubledField v = tr.at(t);
    CHECK(relative_l2(v.plus, cplx(f(t)) * base) < 1e-12);
  }
  CHECK(tr.final_time() == doctest::Approx(1.0));
  const Trajectory c = Trajectory::constant(DoubledField::from_plus(base), 3.0);
  CHECK(relative_l2(c.at(1.7).plus, base) == 0.0);
  CHECK(sup_norm(tr, 0.0) == doctest::Approx(f(1.0) * sobolev_norm(base, 0.0)));
}

TEST_CASE("growth envelope fit") {
  std::vector<double> t, v;
  for (int i = 0; i <= 20; ++i) {
    t.push_back(0.05 * i);
    v.push_back(2.0 * std::exp(0.7 * t.back()));
  }
  v[0] = 2.0;
  const GrowthFit fit = fit_growth(t, v);
  CHECK(fit.C_theta == doctest::Approx(0.7).epsilon(1e-10));
  CHECK(fit.C_r == doctest::Approx(1.0).epsilon(1e-10));
  const GrowthFit flat = fit_growth({0.0, 1.0}, {1.0, 0.5});
  CHECK(flat.C_theta == 0.0);
}

TEST_CASE("viscous linear flow against the exact damped phase") {
  const HamiltonianModel m = oracle::laplacian_model(1);
  const TorusGrid g = TorusGrid::with_min_points(1, 16);
  const DoubledField U0 = DoubledField::from_plus(smooth_random_field(g, 2, 1.0, 0.4));
  SolveOptions opt;
  opt.T = 0.05;
  opt.dt = 1e-4;
  for (double eps : {0.0, 1e-3}) {
    const LinearProblem p = make_linear_problem(m, Trajectory::constant(U0, opt.T), 1.0, eps);
    const SolveReport r = linear_flow(p, U0, opt);
    CHECK(relative_l2(r.trajectory.back(), damped_flow(U0, opt.T, eps)) < 1e-9);
    CHECK(r.times.size() == 501);
  }
}

TEST_CASE("inhomogeneous linear flow with a constant forcing") {
  // u_t = i|n|^2 u + f has the closed form e^{i|n|^2 t} u0 + (e^{i|n|^2 t} - 1)/(i|n|^2) f
  const HamiltonianModel m = oracle::laplacian_model(1);
  const TorusGrid g = TorusGrid::with_min_points(1, 8);
  const DoubledField U0 = DoubledField::from_plus(smooth_random_field(g, 3, 1.0, 0.4));
  const DoubledField Fv = DoubledField::from_plus(smooth_random_field(g, 4, 0.5, 0.4));
  LinearProblem p = make_linear_problem(m, Trajectory::constant(U0, 0.1), 1.0);
  p.forcing = [&](double, const DoubledOperator&) { return Fv; };
  SolveOptions opt;
  opt.T = 0.1;
  opt.dt = 1e-4;
  const SolveReport r = linear_inhomogeneous(p, U0, opt);
  const double T = opt.T;
  const SpectralField want = multiplier_apply(
      [&](const Index& j) { return std::exp(cplx(0.0, double(j[0]) * j[0] * T)); }, U0.plus);
  const SpectralField fpart = multiplier_apply(
      [&](const Index& j) {
        const double w = double(j[0]) * j[0];
        return w == 0.0 ? cplx(T) : (std::exp(cplx(0.0, w * T)) - 1.0) / cplx(0.0, w);
      },
      Fv.plus);
  CHECK(relative_l2(r.trajectory.back().plus, want + fpart) < 1e-9);
}

TEST_CASE("time-step restriction") {
  const HamiltonianModel m = oracle::laplacian_model(1);
  const TorusGrid g = TorusGrid::with_min_points(1, 16);
  const DoubledField U0 = DoubledField::from_plus(smooth_random_field(g, 2, 1.0, 0.4));
  SolveOptions opt;
  opt.dt = 0.01;
  const LinearProblem p = make_linear_problem(m, Trajectory::constant(U0, 0.1), 1.0);
  CHECK_THROWS_AS(linear_flow(p, U0, opt), SolverError);
}

TEST_CASE("viscosity limit on the linear model") {
  const HamiltonianModel m = oracle::laplacian_model(1);
  const TorusGrid g = TorusGrid::with_min_points(1, 8);
  const DoubledField U0 = DoubledField::from_plus(smooth_random_field(g, 5, 1.0, 0.4));
  SolveOptions opt;
  opt.T = 0.05;
  opt.dt = 1e-4;
  const LinearProblem p = make_linear_problem(m, Trajectory::constant(U0, opt.T), 1.0);
  const ViscosityLimit v = viscosity_limit(p, U0, {1e-2, 1e-3, 1e-4}, opt, 1.0);
  REQUIRE(v.differences.size() == 2);
  CHECK(v.differences[1] < v.differences[0]);
  for (const GrowthFit& f : v.growth) CHECK(f.C_r <= 1.0 + 1e-9);
  CHECK(v.runs.size() == 3);
}

TEST_CASE("iterative scheme") {
  SUBCASE("linear model converges in one step to the exact flow") {
    const HamiltonianModel m = oracle::laplacian_model(1);
    const TorusGrid g = TorusGrid::with_min_points(1, 16);
    const DoubledField U0 = DoubledField::from_plus(smooth_random_field(g, 3, 1.0, 0.5));
    SchemeOptions o;
    o.max_iterations = 3;
    o.dt = 1e-4;
    const SchemeResult r = run_iterations(m, U0, 0.05, 0.0, o);
    CHECK(relative_l2(r.iterates.back().back(), exact_linear_flow(U0, 0.05)) < 1e-9);
    REQUIRE(r.differences.size() >= 2);
    CHECK(r.differences[1] < 1e-10 * r.differences[0]);
  }
  SUBCASE("small-data quartic model contracts") {
    const HamiltonianModel m = oracle::quartic_d1();
    const TorusGrid g(1, 16, dealiasing_points(m, 16));
    const DoubledField U0 = DoubledField::from_plus(smooth_random_field(g, 3, 0.1, 1.0));
    SchemeOptions o;
    o.T_guess = 0.05;
    o.dt = 1e-3;
    const NonlinearResult r = nonlinear_solve(m, U0, o);
    CHECK(r.scheme.certified);
    for (std::size_t k = 1; k < r.scheme.ratios.size(); ++k) CHECK(r.scheme.ratios[k] <= 0.5);
    CHECK(r.oracle_error < 1e-6);
    CHECK(r.hamiltonian_drift < 1e-6);
    CHECK(r.report.flags.at("contraction"));
    std::stringstream js;
    r.report.write_json(js, {{"config_hash", "abc"}});
    const auto j = nlohmann::json::parse(js.str());
    CHECK(j["meta"]["config_hash"] == "abc");
    CHECK(j["certificates"].contains("certified_T"));
  }
  CHECK(contraction_index(oracle::quartic_d1(), 1.0) == 2.0);
  SpecialForm sf;
  sf.h = {0.0, 1.0};
  CHECK(contraction_index(HamiltonianModel::special_form(1, sf), 1.0) == 1.0);
}

TEST_CASE("reference solver") {
  const HamiltonianModel m = oracle::laplacian_model(1);
  const TorusGrid g = TorusGrid::with_min_points(1, 16);
  const DoubledField U0 = DoubledField::from_plus(smooth_random_field(g, 8, 1.0, 0.5));
  SolveOptions opt;
  opt.T = 0.05;
  opt.dt = 1e-4;
  opt.track_energy = true;
  const SolveReport r = reference_solver(m, U0, opt);
  CHECK(relative_l2(r.trajectory.back(), exact_linear_flow(U0, opt.T)) < 1e-9);
  REQUIRE(r.energy.size() == r.times.size());
  CHECK(std::abs(r.energy.back() - r.energy.front()) < 1e-9 * std::abs(r.energy.front()));
  std::stringstream csv;
  r.write_csv(csv, {{"config_hash", "abc"}});
  CHECK(csv.str().find("# config_hash=abc\nt,norm_s0,norm_s1,H\n") == 0);
}

#pragma once

#include <functional>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "qnls/fourier.hpp"
#include "qnls/nls_model.hpp"
#include "qnls/paradiff.hpp"

namespace qnls {

class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Uniformly sampled doubled trajectory; values between samples by cubic Lagrange interpolation.
class Trajectory {
 public:
  Trajectory() = default;
  Trajectory(double t0, double dt) : t0_(t0), dt_(dt) {}
  static Trajectory constant(const DoubledField& U, double T);

  void push(const DoubledField& U) { samples_.push_back(U); }
  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }
  double dt() const { return dt_; }
  double time(std::size_t i) const { return t0_ + dt_ * double(i); }
  double final_time() const { return time(samples_.size() - 1); }
  const DoubledField& operator[](std::size_t i) const { return samples_[i]; }
  const DoubledField& back() const { return samples_.back(); }
  DoubledField at(double t) const;

 private:
  double t0_ = 0.0, dt_ = 0.0;
  std::vector<DoubledField> samples_;
};

// sup_t ||U(t)||_s on the plus component.
double sup_norm(const Trajectory& U, double s);
// sup_t ||A(t) - B(t)||_s over common samples.
double sup_distance(const Trajectory& A, const Trajectory& B, double s);

struct BackgroundBounds {
  double theta = 0.0;  // sup ||U||_{s0+3} + sup ||dU/dt||_{s0+1}
  double r = 0.0;      // sup ||U||_{s0+1}
};
BackgroundBounds measure_bounds(const Trajectory& U, double s0);

using Forcing = std::function<DoubledField(double t, const DoubledOperator& step_op)>;
Forcing sampled_forcing(Trajectory R);

struct LinearProblem {
  HamiltonianModel model;
  Trajectory background;
  // R(t) given the step operator iE Op(A2 + A1); empty means no forcing
  Forcing forcing;
  double visc_eps = 0.0;
  double s0 = 1.0;
  CutoffSpec cut;
  double cfl = 1.0;
  BackgroundBounds bounds;
};

LinearProblem make_linear_problem(const HamiltonianModel& m, Trajectory background, double s0,
                                  double visc_eps = 0.0, const CutoffSpec& cut = {});

struct GrowthFit {
  double C_r = 1.0;
  double C_theta = 0.0;
};
// Envelope ||U(t)||_s <= C_r e^{C_theta t} ||U(0)||_s fitted to a norm history.
GrowthFit fit_growth(const std::vector<double>& t, const std::vector<double>& norms);

struct SolveReport {
  Trajectory trajectory;
  std::vector<double> times;
  std::vector<double> sigmas;
  std::vector<std::vector<double>> norms;  // per step, per sigma
  std::vector<double> energy;              // Hamiltonian per step when tracked
  std::map<std::string, double> certificates;
  std::map<std::string, bool> flags;

  void write_csv(std::ostream& os, const std::map<std::string, std::string>& meta = {}) const;
  void write_json(std::ostream& os, const std::map<std::string, std::string>& meta = {}) const;
};

struct SolveOptions {
  double T = 0.1;
  double dt = 1e-4;
  std::vector<double> sigmas{0.0, 1.0};
  bool track_energy = false;
};

// dU/dt = iE Op(A2 + A1)(U_b) U + R - eps Lap^2 U, integrating-factor RK4, operator
// frozen per step at the midpoint background.
SolveReport linear_flow(const LinearProblem& p, const DoubledField& U0, const SolveOptions& opt);
SolveReport linear_inhomogeneous(const LinearProblem& p, const DoubledField& U0,
                                 const SolveOptions& opt);

struct ViscosityLimit {
  std::vector<double> eps;
  std::vector<SolveReport> runs;
  std::vector<double> differences;  // sup_t ||U^eps_k - U^eps_{k+1}||_sigma
  std::vector<double> per_halving;  // decrease factor normalized to one halving of eps
  std::vector<GrowthFit> growth;
  bool cauchy = false;
  Trajectory extrapolated;
};
ViscosityLimit viscosity_limit(const LinearProblem& p, const DoubledField& U0,
                               const std::vector<double>& eps_list, const SolveOptions& opt,
                               double sigma = 1.0);

struct SchemeOptions {
  double s0 = 1.0;
  double s = 4.0;
  double T_guess = 0.1;
  double dt = 1e-4;
  int max_iterations = 12;
  int max_halvings = 8;
  double tolerance = 1e-12;
  // negative: min(1e-3, dt N^2 1e-2)
  double visc_eps = -1.0;
  CutoffSpec cut;
};

// Norm index for the contraction certificate: s0 + 1, or s0 for special-form models.
double contraction_index(const HamiltonianModel& m, double s0);

struct SchemeResult {
  // last two iterates
  std::vector<Trajectory> iterates;
  int iterations = 0;
  std::vector<double> differences;  // ||U^m - U^{m-1}||_{L^inf H^{index}}, m >= 1
  std::vector<double> ratios;       // differences[m] / differences[m-1]
  double certified_T = 0.0;
  double r = 0.0;
  double visc_eps = 0.0;
  int halvings = 0;
  bool certified = false;
  BackgroundBounds bounds;
  SolveReport report;
};

// Iterates dU^n/dt = iE Op(A(U^{n-1})) U^n + full_rhs(U^{n-1}) - iE Op(A(U^{n-1})) U^{n-1},
// halving T until ||U^m - U^{m-1}|| <= 2^{-m} r for every computed m.
SchemeResult iterate_scheme(const HamiltonianModel& m, const DoubledField& U0,
                            const SchemeOptions& opt);
// Fixed T, fixed viscosity; no bisection.
SchemeResult run_iterations(const HamiltonianModel& m, const DoubledField& U0, double T,
                            double visc_eps, const SchemeOptions& opt);

// Pseudospectral RK4 on the full nonlinearity.
SolveReport reference_solver(const HamiltonianModel& m, const DoubledField& U0,
                             const SolveOptions& opt);

struct NonlinearResult {
  SchemeResult scheme;
  SchemeResult inviscid;
  SolveReport reference;
  double oracle_error = 0.0;     // relative L2 at T against the reference
  double hamiltonian_drift = 0.0;  // max |H(t) - H(0)| / |H(0)| along the limit
  SolveReport report;
};
NonlinearResult nonlinear_solve(const HamiltonianModel& m, const DoubledField& U0,
                                const SchemeOptions& opt);

// Exact flow of F = |grad u|^2: u_n(t) = exp(i|n|^2 t) u_n(0).
DoubledField exact_linear_flow(const DoubledField& U0, double t);

}  // namespace qnls

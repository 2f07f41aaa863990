#pragma once

#include <optional>
#include <random>
#include <string>
#include <vector>

#include "qnls/fourier.hpp"
#include "qnls/paradiff.hpp"
#include "qnls/symbols.hpp"

namespace qnls {

// Monomial coeff * prod y_i^{e_i} * prod conj(y_i)^{e_{d+1+i}} over y_0..y_d.
struct Monomial {
  cplx coeff;
  std::vector<int> exps;
};

// Polynomial in y_0..y_d and their conjugates, treated as independent variables.
class WirtingerPolynomial {
 public:
  WirtingerPolynomial() = default;
  WirtingerPolynomial(int d, std::vector<Monomial> terms);

  int dim() const { return d_; }
  int num_vars() const { return 2 * (d_ + 1); }
  const std::vector<Monomial>& terms() const { return terms_; }
  int degree() const;
  bool is_zero() const { return terms_.empty(); }

  // Variable index: y_i -> i, conj(y_i) -> d + 1 + i.
  int var_y(int i) const { return i; }
  int var_ybar(int i) const { return d_ + 1 + i; }

  WirtingerPolynomial derive(int var) const;
  // Swap y and conj(y), conjugate coefficients.
  WirtingerPolynomial conjugate() const;
  bool is_real(double tol = 0.0) const;

  // F at y with conj(y) substituted.
  cplx eval(const std::vector<cplx>& y) const;
  // Pointwise over fields y_0..y_d given as physical values.
  CVec eval_fields(const std::vector<CVec>& y) const;

  WirtingerPolynomial operator+(const WirtingerPolynomial& o) const;
  WirtingerPolynomial scaled(cplx s) const;

 private:
  int d_ = 0;
  std::vector<Monomial> terms_;
};

WirtingerPolynomial monomial_poly(int d, cplx coeff, std::vector<int> exps);

// gamma |grad u|^2 + |grad h(|u|^2)|^2 with real h(z) = sum_k h[k] z^k.
struct SpecialForm {
  double gradient_coefficient = 1.0;
  std::vector<double> h;
  // h'(z)^2 as coefficients in z
  std::vector<double> g() const;
  double h_prime(double z) const;
  double g_at(double z) const;
};

class HamiltonianModel {
 public:
  HamiltonianModel() = default;
  static HamiltonianModel polynomial(WirtingerPolynomial F);
  static HamiltonianModel special_form(int d, SpecialForm sf);

  int dim() const { return F_.dim(); }
  const WirtingerPolynomial& F() const { return F_; }
  bool is_special() const { return special_.has_value(); }
  const SpecialForm& special() const { return *special_; }

  // Second Wirtinger derivatives, j,k in 1..d stored 0-based.
  const WirtingerPolynomial& A(int j, int k) const { return A_[j * dim() + k]; }  // d_{ybar_k} d_{y_j} F
  const WirtingerPolynomial& B(int j, int k) const { return B_[j * dim() + k]; }  // d_{ybar_k} d_{ybar_j} F
  // d_{ybar_0} d_{y_j} F - d_{y_0} d_{ybar_j} F
  const WirtingerPolynomial& P(int j) const { return P_[j]; }
  const WirtingerPolynomial& dF_ybar0() const { return dybar0_; }
  const WirtingerPolynomial& dF_ybar(int j) const { return dybar_[j]; }

 private:
  void derive_all();
  WirtingerPolynomial F_;
  std::optional<SpecialForm> special_;
  std::vector<WirtingerPolynomial> A_, B_, P_, dybar_;
  WirtingerPolynomial dybar0_;
};

// Ellipticity quantity sum xi_j xi_k A_jk - |sum xi_j xi_k B_jk| at one jet and unit xi.
double ellipticity_quantity(const HamiltonianModel& m, const std::vector<cplx>& jet, const Xi& xi);

struct EllipticityReport {
  double constant = 0.0;
  bool elliptic = false;
  std::vector<cplx> worst_jet;
  Xi worst_xi{0, 0, 0};
  std::size_t samples = 0;
};

// Unit directions: {+1,-1} in d=1, equispaced circle in d=2, spiral points in d=3.
std::vector<Xi> unit_directions(int d, int count);
// Zero jet, the jets of U at every node, and uniform draws with |y_i| <= radius.
std::vector<std::vector<cplx>> ellipticity_jets(int d, const DoubledField* U, double radius,
                                                std::size_t random_count, std::uint64_t seed);
EllipticityReport check_ellipticity(const HamiltonianModel& m,
                                    const std::vector<std::vector<cplx>>& jets,
                                    const std::vector<Xi>& directions);

// Physical jets (u, d_1 u, ..., d_d u) at the nodes.
std::vector<CVec> physical_jet(const SpectralField& u);

// Coefficient fields of the paralinearization at one background.
struct QuasilinearCoefficients {
  TorusGrid grid;
  std::vector<CVec> jet;
  std::vector<CVec> A;   // d x d, a_2 = sum A_jk xi_j xi_k
  std::vector<CVec> B;   // d x d, b_2 = sum B_jk xi_j xi_k
  std::vector<CVec> a1;  // d, a_1 = sum a1_j xi_j
  const CVec& Ajk(int j, int k) const { return A[j * grid.dim() + k]; }
  const CVec& Bjk(int j, int k) const { return B[j * grid.dim() + k]; }
};

// Generic path through the Wirtinger derivatives.
QuasilinearCoefficients quasilinear_coefficients(const HamiltonianModel& m, const DoubledField& U);
// Closed form for special-form models.
QuasilinearCoefficients special_form_coefficients(const HamiltonianModel& m, const DoubledField& U);
// Dispatches on the model class.
QuasilinearCoefficients coefficients_for(const HamiltonianModel& m, const DoubledField& U);

struct ParalinearSymbols {
  Symbol a2, b2, a1;
};
ParalinearSymbols build_symbols(const QuasilinearCoefficients& q);
ParalinearSymbols build_symbols(const HamiltonianModel& m, const DoubledField& U);

struct ParalinearMatrices {
  MatrixSymbol A2, A1;
};
ParalinearMatrices build_matrices(const ParalinearSymbols& s);

// E = diag(1, -1)
DoubledField apply_E(const DoubledField& U);

// N(u) = (d_ybar F)(u, grad u) - sum_j d_j [(d_{ybar_j} F)(u, grad u)], truncated to the lattice.
SpectralField nonlinearity_full(const HamiltonianModel& m, const SpectralField& u);
// Right-hand side of the doubled system: i E (N(u), conj N(u)).
DoubledField full_rhs(const HamiltonianModel& m, const DoubledField& U);
// i E Op(A2 + A1) as an assembled operator.
DoubledOperator paralinear_operator(const ParalinearMatrices& mats, const CutoffSpec& cut);
// full_rhs(U) - i E Op(A2 + A1) U
DoubledField paralinear_remainder(const HamiltonianModel& m, const DoubledField& U,
                                  const CutoffSpec& cut);

// Integral of F(u, grad u) by grid quadrature.
double hamiltonian(const HamiltonianModel& m, const SpectralField& u);

// Minimum grid points per axis for exact products at the model's degree.
int dealiasing_points(const HamiltonianModel& m, int N);

}  // namespace qnls

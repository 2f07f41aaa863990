#pragma once

#include <array>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "qnls/fourier.hpp"

namespace qnls {

enum class Parity { Even, Odd, None };

Parity parity_product(Parity a, Parity b);
Parity parity_sum(Parity a, Parity b);
const char* parity_name(Parity p);

// Values a(x_k, xi) at the physical nodes for one fixed xi.
using Samples = CVec;

// coeff(x) * xi^alpha
struct PolyTerm {
  Index alpha{0, 0, 0};
  Samples coeff;
};

// A symbol a(x, xi): closure over background fields, evaluated one xi at a time.
class Symbol {
 public:
  using Eval = std::function<Samples(const Xi&)>;
  using Grad = std::function<std::vector<Samples>(const Xi&)>;
  using Weight = std::function<cplx(const Xi&)>;

  Symbol() = default;
  Symbol(const TorusGrid& g, double order, Parity parity, std::string id, Eval eval,
         Grad grad = {});

  static Symbol polynomial(const TorusGrid& g, double order, Parity parity, std::string id,
                           std::vector<PolyTerm> terms);
  // x-independent w(xi); assembles to an exact diagonal.
  static Symbol multiplier(const TorusGrid& g, double order, Parity parity, std::string id,
                           Weight w);
  static Symbol of_x(const TorusGrid& g, std::string id, Samples f);
  static Symbol constant(const TorusGrid& g, cplx c);

  bool valid() const { return bool(impl_); }
  const TorusGrid& grid() const;
  double order() const;
  Parity parity() const;
  const std::string& id() const;

  Samples eval(const Xi& xi) const;
  // d/dxi_i for i < d: analytic when supplied, else a five-point central stencil.
  std::vector<Samples> grad_xi(const Xi& xi) const;
  // d/dx_i for i < d by spectral differentiation of eval(xi).
  std::vector<Samples> grad_x(const Xi& xi) const;
  bool has_analytic_grad() const;

  const std::vector<PolyTerm>* poly() const;
  const Weight* weight() const;

  Symbol renamed(std::string id) const;
  Symbol with_order(double order) const;
  Symbol with_parity(Parity p) const;

 private:
  struct Impl;
  std::shared_ptr<const Impl> impl_;
};

Symbol operator+(const Symbol& a, const Symbol& b);
Symbol operator-(const Symbol& a, const Symbol& b);
Symbol operator*(const Symbol& a, const Symbol& b);
Symbol operator*(cplx s, const Symbol& a);
// conj a(x, -xi)
Symbol conj_reflect(const Symbol& a);
// Pointwise f(a) for a scalar map; gradient by finite differences.
Symbol pointwise_map(const Symbol& a, const std::function<cplx(cplx)>& f, double order,
                     Parity parity, std::string id);

// {a,b} = grad_xi a . grad_x b - grad_x a . grad_xi b
Symbol poisson_bracket(const Symbol& a, const Symbol& b);
// a #_rho b: ab for rho in (0,1], ab + (1/2i){a,b} for rho in (1,2].
Symbol sharp_compose(const Symbol& a, const Symbol& b, double rho);

// Step used for xi finite differences at xi.
double xi_fd_step(const Xi& xi, int d);
// Dyadic shells |xi| in {0,1,2,4,...,2N}, 2d+1 directions each.
std::vector<Xi> xi_sample_set(int d, int N);
// |a|_{m,s,n} over xi_sample_set(d, N); n <= 3.
double seminorm(const Symbol& a, double m, double s, int n);
// max over samples of |a(x,-xi) -/+ a(x,xi)| relative to the sup of |a|, per declared parity.
double parity_defect(const Symbol& a, const std::vector<Xi>& samples);

// 2x2 matrix symbol, entries row-major (00, 01, 10, 11).
using MatrixSamples = std::array<Samples, 4>;

enum class Structure { Reality, None };

class MatrixSymbol {
 public:
  using Eval = std::function<MatrixSamples(const Xi&)>;

  MatrixSymbol() = default;
  MatrixSymbol(const TorusGrid& g, double order, std::string id, Structure s, Eval eval);
  static MatrixSymbol from_entries(std::array<Symbol, 4> entries, std::string id, Structure s);

  bool valid() const { return bool(impl_); }
  const TorusGrid& grid() const;
  double order() const;
  const std::string& id() const;
  Structure structure() const;
  MatrixSamples eval(const Xi& xi) const;
  // Present when built from entries; null entries are identically zero.
  const std::array<Symbol, 4>* entries() const;
  Symbol entry(int r, int c) const;
  // max |lower row - conj-reflected upper row| over samples, relative to the sup of the entries.
  double structure_defect(const std::vector<Xi>& samples) const;

 private:
  struct Impl;
  std::shared_ptr<const Impl> impl_;
};

MatrixSymbol operator+(const MatrixSymbol& a, const MatrixSymbol& b);
MatrixSymbol operator-(const MatrixSymbol& a, const MatrixSymbol& b);
MatrixSymbol operator*(const MatrixSymbol& a, const MatrixSymbol& b);

// Pointwise 2x2 helpers on sample arrays.
MatrixSamples mat_mul(const MatrixSamples& a, const MatrixSamples& b);
MatrixSamples mat_add(const MatrixSamples& a, const MatrixSamples& b);
MatrixSamples mat_scale(cplx s, const MatrixSamples& a);
MatrixSamples mat_zero(std::size_t n);
MatrixSamples mat_identity(std::size_t n);

}  // namespace qnls

#include "qnls/symbols.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace qnls {

Parity parity_product(Parity a, Parity b) {
  if (a == Parity::None || b == Parity::None) return Parity::None;
  return a == b ? Parity::Even : Parity::Odd;
}

Parity parity_sum(Parity a, Parity b) { return a == b ? a : Parity::None; }

static Parity parity_flip(Parity a) {
  if (a == Parity::Even) return Parity::Odd;
  if (a == Parity::Odd) return Parity::Even;
  return Parity::None;
}

const char* parity_name(Parity p) {
  switch (p) {
    case Parity::Even: return "even";
    case Parity::Odd: return "odd";
    default: return "none";
  }
}

namespace {

double xi_power(const Xi& xi, const Index& alpha, int d) {
  double r = 1.0;
  for (int i = 0; i < d; ++i)
    for (int k = 0; k < alpha[i]; ++k) r *= xi[i];
  return r;
}

Samples zeros(const TorusGrid& g) { return Samples(g.grid_size(), 0.0); }

void axpy(Samples& y, cplx a, const Samples& x) {
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
}

Samples mul(const Samples& a, const Samples& b) {
  Samples r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] * b[i];
  return r;
}

std::vector<PolyTerm> merge_terms(std::vector<PolyTerm> terms, int d) {
  std::vector<PolyTerm> out;
  for (auto& t : terms) {
    auto it = std::find_if(out.begin(), out.end(), [&](const PolyTerm& o) {
      for (int i = 0; i < d; ++i)
        if (o.alpha[i] != t.alpha[i]) return false;
      return true;
    });
    if (it == out.end())
      out.push_back(std::move(t));
    else
      axpy(it->coeff, 1.0, t.coeff);
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------

struct Symbol::Impl {
  TorusGrid grid;
  double order = 0.0;
  Parity parity = Parity::None;
  std::string id;
  Eval eval;
  Grad grad;
  std::optional<std::vector<PolyTerm>> poly;
  std::optional<Weight> weight;
};

Symbol::Symbol(const TorusGrid& g, double order, Parity parity, std::string id, Eval eval,
               Grad grad) {
  auto impl = std::make_shared<Impl>();
  impl->grid = g;
  impl->order = order;
  impl->parity = parity;
  impl->id = std::move(id);
  impl->eval = std::move(eval);
  impl->grad = std::move(grad);
  impl_ = impl;
}

Symbol Symbol::polynomial(const TorusGrid& g, double order, Parity parity, std::string id,
                          std::vector<PolyTerm> terms) {
  const int d = g.dim();
  auto shared = std::make_shared<std::vector<PolyTerm>>(merge_terms(std::move(terms), d));
  for (const auto& t : *shared)
    if (t.coeff.size() != g.grid_size()) throw std::invalid_argument("polynomial: coeff size");
  Eval eval = [shared, g, d](const Xi& xi) {
    Samples r = zeros(g);
    for (const auto& t : *shared) axpy(r, xi_power(xi, t.alpha, d), t.coeff);
    return r;
  };
  Grad grad = [shared, g, d](const Xi& xi) {
    std::vector<Samples> out(d, zeros(g));
    for (const auto& t : *shared)
      for (int i = 0; i < d; ++i) {
        if (t.alpha[i] == 0) continue;
        Index a = t.alpha;
        a[i] -= 1;
        axpy(out[i], double(t.alpha[i]) * xi_power(xi, a, d), t.coeff);
      }
    return out;
  };
  Symbol s(g, order, parity, std::move(id), std::move(eval), std::move(grad));
  auto impl = std::make_shared<Impl>(*s.impl_);
  impl->poly = *shared;
  s.impl_ = impl;
  return s;
}

Symbol Symbol::multiplier(const TorusGrid& g, double order, Parity parity, std::string id,
                          Weight w) {
  Eval eval = [g, w](const Xi& xi) { return Samples(g.grid_size(), w(xi)); };
  Symbol s(g, order, parity, std::move(id), std::move(eval));
  auto impl = std::make_shared<Impl>(*s.impl_);
  impl->weight = std::move(w);
  s.impl_ = impl;
  return s;
}

Symbol Symbol::of_x(const TorusGrid& g, std::string id, Samples f) {
  std::vector<PolyTerm> terms;
  terms.push_back(PolyTerm{Index{0, 0, 0}, std::move(f)});
  return polynomial(g, 0.0, Parity::Even, std::move(id), std::move(terms));
}

Symbol Symbol::constant(const TorusGrid& g, cplx c) {
  return multiplier(g, 0.0, Parity::Even, "const", [c](const Xi&) { return c; });
}

const TorusGrid& Symbol::grid() const { return impl_->grid; }
double Symbol::order() const { return impl_->order; }
Parity Symbol::parity() const { return impl_->parity; }
const std::string& Symbol::id() const { return impl_->id; }
bool Symbol::has_analytic_grad() const { return bool(impl_->grad); }
const std::vector<PolyTerm>* Symbol::poly() const { return impl_->poly ? &*impl_->poly : nullptr; }
const Symbol::Weight* Symbol::weight() const { return impl_->weight ? &*impl_->weight : nullptr; }

Samples Symbol::eval(const Xi& xi) const { return impl_->eval(xi); }

double xi_fd_step(const Xi& xi, int d) {
  return std::max(0.05, 0.05 * std::sqrt(1.0 + xi_norm_sq(xi, d)));
}

std::vector<Samples> Symbol::grad_xi(const Xi& xi) const {
  if (impl_->grad) return impl_->grad(xi);
  const int d = grid().dim();
  const double h = xi_fd_step(xi, d);
  std::vector<Samples> out;
  out.reserve(d);
  for (int i = 0; i < d; ++i) {
    Xi p1 = xi, m1 = xi, p2 = xi, m2 = xi;
    p1[i] += h;
    m1[i] -= h;
    p2[i] += 2 * h;
    m2[i] -= 2 * h;
    Samples fp1 = eval(p1), fm1 = eval(m1), fp2 = eval(p2), fm2 = eval(m2);
    Samples g(fp1.size());
    for (std::size_t k = 0; k < g.size(); ++k)
      g[k] = (-fp2[k] + 8.0 * fp1[k] - 8.0 * fm1[k] + fm2[k]) / (12.0 * h);
    out.push_back(std::move(g));
  }
  return out;
}

std::vector<Samples> Symbol::grad_x(const Xi& xi) const {
  const int d = grid().dim();
  std::vector<Samples> out;
  if (const auto* p = poly()) {
    // differentiate the coefficients, then contract with xi
    out.assign(d, zeros(grid()));
    for (const auto& t : *p) {
      const double w = xi_power(xi, t.alpha, d);
      if (w == 0.0) continue;
      for (int i = 0; i < d; ++i) axpy(out[i], w, spectral_derivative(grid(), t.coeff, i));
    }
    return out;
  }
  if (weight()) return std::vector<Samples>(d, zeros(grid()));
  Samples v = eval(xi);
  for (int i = 0; i < d; ++i) out.push_back(spectral_derivative(grid(), v, i));
  return out;
}

Symbol Symbol::renamed(std::string id) const {
  Symbol s = *this;
  auto impl = std::make_shared<Impl>(*impl_);
  impl->id = std::move(id);
  s.impl_ = impl;
  return s;
}

Symbol Symbol::with_order(double order) const {
  Symbol s = *this;
  auto impl = std::make_shared<Impl>(*impl_);
  impl->order = order;
  s.impl_ = impl;
  return s;
}

Symbol Symbol::with_parity(Parity p) const {
  Symbol s = *this;
  auto impl = std::make_shared<Impl>(*impl_);
  impl->parity = p;
  s.impl_ = impl;
  return s;
}

// ---------------------------------------------------------------------------
// algebra

static void require_same_grid(const Symbol& a, const Symbol& b) {
  if (a.grid() != b.grid()) throw std::invalid_argument("symbol grid mismatch");
}

Symbol operator+(const Symbol& a, const Symbol& b) {
  require_same_grid(a, b);
  const double order = std::max(a.order(), b.order());
  const Parity par = parity_sum(a.parity(), b.parity());
  std::string id = "(" + a.id() + "+" + b.id() + ")";
  if (a.poly() && b.poly()) {
    std::vector<PolyTerm> t = *a.poly();
    t.insert(t.end(), b.poly()->begin(), b.poly()->end());
    return Symbol::polynomial(a.grid(), order, par, id, std::move(t));
  }
  if (a.weight() && b.weight()) {
    auto wa = *a.weight();
    auto wb = *b.weight();
    return Symbol::multiplier(a.grid(), order, par, id,
                              [wa, wb](const Xi& xi) { return wa(xi) + wb(xi); });
  }
  Symbol::Eval eval = [a, b](const Xi& xi) {
    Samples r = a.eval(xi);
    axpy(r, 1.0, b.eval(xi));
    return r;
  };
  Symbol::Grad grad = [a, b](const Xi& xi) {
    auto ga = a.grad_xi(xi);
    auto gb = b.grad_xi(xi);
    for (std::size_t i = 0; i < ga.size(); ++i) axpy(ga[i], 1.0, gb[i]);
    return ga;
  };
  return Symbol(a.grid(), order, par, id, eval, grad);
}

Symbol operator*(cplx s, const Symbol& a) {
  std::string id = "c*" + a.id();
  if (a.poly()) {
    std::vector<PolyTerm> t = *a.poly();
    for (auto& term : t)
      for (auto& v : term.coeff) v *= s;
    return Symbol::polynomial(a.grid(), a.order(), a.parity(), id, std::move(t));
  }
  if (a.weight()) {
    auto wa = *a.weight();
    return Symbol::multiplier(a.grid(), a.order(), a.parity(), id,
                              [wa, s](const Xi& xi) { return s * wa(xi); });
  }
  Symbol::Eval eval = [a, s](const Xi& xi) {
    Samples r = a.eval(xi);
    for (auto& v : r) v *= s;
    return r;
  };
  Symbol::Grad grad = [a, s](const Xi& xi) {
    auto g = a.grad_xi(xi);
    for (auto& c : g)
      for (auto& v : c) v *= s;
    return g;
  };
  return Symbol(a.grid(), a.order(), a.parity(), id, eval, grad);
}

Symbol operator-(const Symbol& a, const Symbol& b) { return a + cplx(-1.0) * b; }

Symbol operator*(const Symbol& a, const Symbol& b) {
  require_same_grid(a, b);
  const int d = a.grid().dim();
  const double order = a.order() + b.order();
  const Parity par = parity_product(a.parity(), b.parity());
  std::string id = a.id() + "*" + b.id();
  if (a.poly() && b.poly()) {
    std::vector<PolyTerm> t;
    for (const auto& ta : *a.poly())
      for (const auto& tb : *b.poly()) {
        PolyTerm p;
        for (int i = 0; i < d; ++i) p.alpha[i] = ta.alpha[i] + tb.alpha[i];
        p.coeff = mul(ta.coeff, tb.coeff);
        t.push_back(std::move(p));
      }
    return Symbol::polynomial(a.grid(), order, par, id, std::move(t));
  }
  if (a.weight() && b.weight()) {
    auto wa = *a.weight();
    auto wb = *b.weight();
    return Symbol::multiplier(a.grid(), order, par, id,
                              [wa, wb](const Xi& xi) { return wa(xi) * wb(xi); });
  }
  Symbol::Eval eval = [a, b](const Xi& xi) { return mul(a.eval(xi), b.eval(xi)); };
  Symbol::Grad grad = [a, b](const Xi& xi) {
    Samples va = a.eval(xi), vb = b.eval(xi);
    auto ga = a.grad_xi(xi);
    auto gb = b.grad_xi(xi);
    for (std::size_t i = 0; i < ga.size(); ++i)
      for (std::size_t k = 0; k < va.size(); ++k) ga[i][k] = ga[i][k] * vb[k] + va[k] * gb[i][k];
    return ga;
  };
  return Symbol(a.grid(), order, par, id, eval, grad);
}

Symbol conj_reflect(const Symbol& a) {
  const int d = a.grid().dim();
  std::string id = "conjR(" + a.id() + ")";
  if (a.poly()) {
    std::vector<PolyTerm> t = *a.poly();
    for (auto& term : t) {
      int deg = 0;
      for (int i = 0; i < d; ++i) deg += term.alpha[i];
      const double sign = (deg % 2 == 0) ? 1.0 : -1.0;
      for (auto& v : term.coeff) v = sign * std::conj(v);
    }
    return Symbol::polynomial(a.grid(), a.order(), a.parity(), id, std::move(t));
  }
  auto neg = [d](Xi xi) {
    for (int i = 0; i < d; ++i) xi[i] = -xi[i];
    return xi;
  };
  if (a.weight()) {
    auto wa = *a.weight();
    return Symbol::multiplier(a.grid(), a.order(), a.parity(), id,
                              [wa, neg](const Xi& xi) { return std::conj(wa(neg(xi))); });
  }
  Symbol::Eval eval = [a, neg](const Xi& xi) {
    Samples r = a.eval(neg(xi));
    for (auto& v : r) v = std::conj(v);
    return r;
  };
  Symbol::Grad grad = [a, neg](const Xi& xi) {
    auto g = a.grad_xi(neg(xi));
    for (auto& c : g)
      for (auto& v : c) v = -std::conj(v);
    return g;
  };
  return Symbol(a.grid(), a.order(), a.parity(), id, eval, grad);
}

Symbol pointwise_map(const Symbol& a, const std::function<cplx(cplx)>& f, double order,
                     Parity parity, std::string id) {
  Symbol::Eval eval = [a, f](const Xi& xi) {
    Samples r = a.eval(xi);
    for (auto& v : r) v = f(v);
    return r;
  };
  return Symbol(a.grid(), order, parity, std::move(id), eval);
}

Symbol poisson_bracket(const Symbol& a, const Symbol& b) {
  require_same_grid(a, b);
  const int d = a.grid().dim();
  Symbol::Eval eval = [a, b, d](const Xi& xi) {
    auto gxa = a.grad_x(xi);
    auto gxb = b.grad_x(xi);
    auto gka = a.grad_xi(xi);
    auto gkb = b.grad_xi(xi);
    Samples r(gxa[0].size(), 0.0);
    for (int i = 0; i < d; ++i)
      for (std::size_t k = 0; k < r.size(); ++k)
        r[k] += gka[i][k] * gxb[i][k] - gxa[i][k] * gkb[i][k];
    return r;
  };
  return Symbol(a.grid(), a.order() + b.order() - 1.0,
                parity_flip(parity_product(a.parity(), b.parity())),
                "{" + a.id() + "," + b.id() + "}", eval);
}

Symbol sharp_compose(const Symbol& a, const Symbol& b, double rho) {
  if (!(rho > 0.0 && rho <= 2.0)) throw std::invalid_argument("sharp_compose: rho must lie in (0,2]");
  Symbol ab = a * b;
  if (rho <= 1.0) return ab.renamed(a.id() + "#" + b.id());
  Symbol s = ab + cplx(0.0, -0.5) * poisson_bracket(a, b);
  return s.with_order(a.order() + b.order()).renamed(a.id() + "#2" + b.id());
}

// ---------------------------------------------------------------------------
// seminorms

std::vector<Xi> xi_sample_set(int d, int N) {
  std::vector<Xi> out;
  out.push_back(Xi{0, 0, 0});
  std::vector<Xi> dirs;
  for (int i = 0; i < d; ++i) {
    Xi e{0, 0, 0};
    e[i] = 1.0;
    dirs.push_back(e);
    e[i] = -1.0;
    dirs.push_back(e);
  }
  Xi diag{0, 0, 0};
  for (int i = 0; i < d; ++i) diag[i] = 1.0 / std::sqrt(double(d));
  dirs.push_back(diag);
  for (int r = 1; r <= 2 * N; r *= 2)
    for (const auto& e : dirs) {
      Xi xi{0, 0, 0};
      for (int i = 0; i < d; ++i) xi[i] = r * e[i];
      out.push_back(xi);
    }
  return out;
}

namespace {

std::vector<Index> multi_indices(int d, int n) {
  std::vector<Index> out;
  Index b{0, 0, 0};
  for (b[0] = 0; b[0] <= n; ++b[0])
    for (b[1] = 0; b[1] <= (d > 1 ? n : 0); ++b[1])
      for (b[2] = 0; b[2] <= (d > 2 ? n : 0); ++b[2])
        if (b[0] + b[1] + b[2] <= n) out.push_back(b);
  return out;
}

Samples xi_derivative(const Symbol& a, Index beta, const Xi& xi, double h, int d) {
  int axis = -1;
  for (int i = 0; i < d; ++i)
    if (beta[i] > 0) {
      axis = i;
      break;
    }
  if (axis < 0) return a.eval(xi);
  beta[axis] -= 1;
  Xi p = xi, m = xi;
  p[axis] += h;
  m[axis] -= h;
  Samples fp = xi_derivative(a, beta, p, h, d);
  Samples fm = xi_derivative(a, beta, m, h, d);
  for (std::size_t k = 0; k < fp.size(); ++k) fp[k] = (fp[k] - fm[k]) / (2.0 * h);
  return fp;
}

}  // namespace

double seminorm(const Symbol& a, double m, double s, int n) {
  if (n < 0 || n > 3) throw std::invalid_argument("seminorm: n must lie in [0,3]");
  const TorusGrid& g = a.grid();
  const int d = g.dim();
  double best = 0.0;
  for (const Xi& xi : xi_sample_set(d, g.freq_cut())) {
    const double jp = std::sqrt(1.0 + xi_norm_sq(xi, d));
    const double h = xi_fd_step(xi, d);
    for (const Index& beta : multi_indices(d, n)) {
      const int ord = beta[0] + beta[1] + beta[2];
      Samples v = xi_derivative(a, beta, xi, h, d);
      for (const auto& z : v)
        if (!std::isfinite(z.real()) || !std::isfinite(z.imag()))
          throw std::runtime_error("seminorm: symbol evaluation failure");
      const double val = std::pow(jp, ord - m) * physical_sobolev_norm(g, v, s);
      best = std::max(best, val);
    }
  }
  return best;
}

double parity_defect(const Symbol& a, const std::vector<Xi>& samples) {
  if (a.parity() == Parity::None) return 0.0;
  const int d = a.grid().dim();
  const double sign = a.parity() == Parity::Even ? -1.0 : 1.0;
  double worst = 0.0, scale = 0.0;
  for (const Xi& xi : samples) {
    Xi m = xi;
    for (int i = 0; i < d; ++i) m[i] = -m[i];
    Samples p = a.eval(xi), q = a.eval(m);
    for (std::size_t k = 0; k < p.size(); ++k) {
      worst = std::max(worst, std::abs(q[k] + sign * p[k]));
      scale = std::max(scale, std::abs(p[k]));
    }
  }
  return scale > 0.0 ? worst / scale : worst;
}

// ---------------------------------------------------------------------------
// matrix symbols

MatrixSamples mat_zero(std::size_t n) { return {Samples(n, 0.0), Samples(n, 0.0), Samples(n, 0.0), Samples(n, 0.0)}; }

MatrixSamples mat_identity(std::size_t n) {
  return {Samples(n, 1.0), Samples(n, 0.0), Samples(n, 0.0), Samples(n, 1.0)};
}

MatrixSamples mat_mul(const MatrixSamples& a, const MatrixSamples& b) {
  const std::size_t n = a[0].size();
  MatrixSamples r = mat_zero(n);
  for (std::size_t k = 0; k < n; ++k) {
    r[0][k] = a[0][k] * b[0][k] + a[1][k] * b[2][k];
    r[1][k] = a[0][k] * b[1][k] + a[1][k] * b[3][k];
    r[2][k] = a[2][k] * b[0][k] + a[3][k] * b[2][k];
    r[3][k] = a[2][k] * b[1][k] + a[3][k] * b[3][k];
  }
  return r;
}

MatrixSamples mat_add(const MatrixSamples& a, const MatrixSamples& b) {
  MatrixSamples r = a;
  for (int e = 0; e < 4; ++e) axpy(r[e], 1.0, b[e]);
  return r;
}

MatrixSamples mat_scale(cplx s, const MatrixSamples& a) {
  MatrixSamples r = a;
  for (auto& e : r)
    for (auto& v : e) v *= s;
  return r;
}

struct MatrixSymbol::Impl {
  TorusGrid grid;
  double order = 0.0;
  std::string id;
  Structure structure = Structure::None;
  Eval eval;
  std::optional<std::array<Symbol, 4>> entries;
};

MatrixSymbol::MatrixSymbol(const TorusGrid& g, double order, std::string id, Structure s,
                           Eval eval) {
  auto impl = std::make_shared<Impl>();
  impl->grid = g;
  impl->order = order;
  impl->id = std::move(id);
  impl->structure = s;
  impl->eval = std::move(eval);
  impl_ = impl;
}

MatrixSymbol MatrixSymbol::from_entries(std::array<Symbol, 4> entries, std::string id,
                                        Structure s) {
  TorusGrid g;
  double order = -1e300;
  for (const auto& e : entries)
    if (e.valid()) {
      g = e.grid();
      order = std::max(order, e.order());
    }
  if (g.dim() == 0) throw std::invalid_argument("MatrixSymbol: all entries empty");
  Eval eval = [entries, g](const Xi& xi) {
    MatrixSamples r;
    for (int k = 0; k < 4; ++k)
      r[k] = entries[k].valid() ? entries[k].eval(xi) : Samples(g.grid_size(), 0.0);
    return r;
  };
  MatrixSymbol m(g, order, std::move(id), s, eval);
  auto impl = std::make_shared<Impl>(*m.impl_);
  impl->entries = entries;
  m.impl_ = impl;
  return m;
}

const TorusGrid& MatrixSymbol::grid() const { return impl_->grid; }
double MatrixSymbol::order() const { return impl_->order; }
const std::string& MatrixSymbol::id() const { return impl_->id; }
Structure MatrixSymbol::structure() const { return impl_->structure; }
MatrixSamples MatrixSymbol::eval(const Xi& xi) const { return impl_->eval(xi); }
const std::array<Symbol, 4>* MatrixSymbol::entries() const {
  return impl_->entries ? &*impl_->entries : nullptr;
}

Symbol MatrixSymbol::entry(int r, int c) const {
  const int k = 2 * r + c;
  if (const auto* e = entries()) {
    if ((*e)[k].valid()) return (*e)[k];
    return Symbol::constant(grid(), 0.0);
  }
  MatrixSymbol self = *this;
  return Symbol(grid(), order(), Parity::None, id() + "[" + std::to_string(r) + std::to_string(c) + "]",
                [self, k](const Xi& xi) { return self.eval(xi)[k]; });
}

double MatrixSymbol::structure_defect(const std::vector<Xi>& samples) const {
  const int d = grid().dim();
  double worst = 0.0, scale = 0.0;
  for (const Xi& xi : samples) {
    Xi m = xi;
    for (int i = 0; i < d; ++i) m[i] = -m[i];
    MatrixSamples p = eval(xi), q = eval(m);
    for (std::size_t k = 0; k < p[0].size(); ++k) {
      worst = std::max(worst, std::abs(p[2][k] - std::conj(q[1][k])));
      worst = std::max(worst, std::abs(p[3][k] - std::conj(q[0][k])));
      for (int e = 0; e < 4; ++e) scale = std::max(scale, std::abs(p[e][k]));
    }
  }
  return scale > 0.0 ? worst / scale : worst;
}

static Symbol add_entries(const Symbol& a, const Symbol& b) {
  if (!a.valid()) return b;
  if (!b.valid()) return a;
  return a + b;
}

static Symbol mul_entries(const Symbol& a, const Symbol& b) {
  if (!a.valid() || !b.valid()) return Symbol();
  return a * b;
}

MatrixSymbol operator+(const MatrixSymbol& a, const MatrixSymbol& b) {
  const Structure s = a.structure() == b.structure() ? a.structure() : Structure::None;
  std::string id = "(" + a.id() + "+" + b.id() + ")";
  if (a.entries() && b.entries()) {
    std::array<Symbol, 4> e;
    for (int k = 0; k < 4; ++k) e[k] = add_entries((*a.entries())[k], (*b.entries())[k]);
    return MatrixSymbol::from_entries(e, id, s);
  }
  return MatrixSymbol(a.grid(), std::max(a.order(), b.order()), id, s,
                      [a, b](const Xi& xi) { return mat_add(a.eval(xi), b.eval(xi)); });
}

MatrixSymbol operator-(const MatrixSymbol& a, const MatrixSymbol& b) {
  const Structure s = a.structure() == b.structure() ? a.structure() : Structure::None;
  std::string id = "(" + a.id() + "-" + b.id() + ")";
  if (a.entries() && b.entries()) {
    std::array<Symbol, 4> e;
    for (int k = 0; k < 4; ++k) {
      const Symbol& y = (*b.entries())[k];
      e[k] = add_entries((*a.entries())[k], y.valid() ? cplx(-1.0) * y : Symbol());
    }
    return MatrixSymbol::from_entries(e, id, s);
  }
  return MatrixSymbol(a.grid(), std::max(a.order(), b.order()), id, s, [a, b](const Xi& xi) {
    return mat_add(a.eval(xi), mat_scale(-1.0, b.eval(xi)));
  });
}

MatrixSymbol operator*(const MatrixSymbol& a, const MatrixSymbol& b) {
  const Structure s = (a.structure() == Structure::Reality && b.structure() == Structure::Reality)
                          ? Structure::Reality
                          : Structure::None;
  std::string id = a.id() + "*" + b.id();
  if (a.entries() && b.entries()) {
    const auto& x = *a.entries();
    const auto& y = *b.entries();
    std::array<Symbol, 4> e;
    e[0] = add_entries(mul_entries(x[0], y[0]), mul_entries(x[1], y[2]));
    e[1] = add_entries(mul_entries(x[0], y[1]), mul_entries(x[1], y[3]));
    e[2] = add_entries(mul_entries(x[2], y[0]), mul_entries(x[3], y[2]));
    e[3] = add_entries(mul_entries(x[2], y[1]), mul_entries(x[3], y[3]));
    bool any = false;
    for (const auto& q : e) any = any || q.valid();
    if (any) return MatrixSymbol::from_entries(e, id, s);
  }
  return MatrixSymbol(a.grid(), a.order() + b.order(), id, s,
                      [a, b](const Xi& xi) { return mat_mul(a.eval(xi), b.eval(xi)); });
}

}  // namespace qnls

#include "qnls/nls_model.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <map>
#include <stdexcept>

namespace qnls {

namespace {

std::vector<Monomial> merge_monomials(std::vector<Monomial> terms) {
  std::map<std::vector<int>, cplx> acc;
  for (auto& t : terms) acc[t.exps] += t.coeff;
  std::vector<Monomial> out;
  for (auto& [e, c] : acc)
    if (c != cplx(0.0)) out.push_back(Monomial{c, e});
  return out;
}

cplx ipow(cplx z, int e) {
  cplx r = 1.0;
  for (int k = 0; k < e; ++k) r *= z;
  return r;
}

}  // namespace

WirtingerPolynomial::WirtingerPolynomial(int d, std::vector<Monomial> terms) : d_(d) {
  if (d < 1 || d > kMaxDim) throw std::invalid_argument("WirtingerPolynomial: d out of range");
  for (const auto& t : terms) {
    if (int(t.exps.size()) != num_vars())
      throw std::invalid_argument("WirtingerPolynomial: exponent vector must have 2(d+1) entries");
    for (int e : t.exps)
      if (e < 0) throw std::invalid_argument("WirtingerPolynomial: negative exponent");
  }
  terms_ = merge_monomials(std::move(terms));
}

WirtingerPolynomial monomial_poly(int d, cplx coeff, std::vector<int> exps) {
  return WirtingerPolynomial(d, {Monomial{coeff, std::move(exps)}});
}

int WirtingerPolynomial::degree() const {
  int deg = 0;
  for (const auto& t : terms_) {
    int s = 0;
    for (int e : t.exps) s += e;
    deg = std::max(deg, s);
  }
  return deg;
}

WirtingerPolynomial WirtingerPolynomial::derive(int var) const {
  if (var < 0 || var >= num_vars()) throw std::out_of_range("derive: unknown variable index");
  std::vector<Monomial> out;
  for (const auto& t : terms_) {
    if (t.exps[var] == 0) continue;
    Monomial m = t;
    m.coeff *= double(t.exps[var]);
    m.exps[var] -= 1;
    out.push_back(std::move(m));
  }
  return WirtingerPolynomial(d_, std::move(out));
}

WirtingerPolynomial WirtingerPolynomial::conjugate() const {
  std::vector<Monomial> out;
  for (const auto& t : terms_) {
    Monomial m;
    m.coeff = std::conj(t.coeff);
    m.exps.resize(t.exps.size());
    for (int i = 0; i <= d_; ++i) {
      m.exps[i] = t.exps[d_ + 1 + i];
      m.exps[d_ + 1 + i] = t.exps[i];
    }
    out.push_back(std::move(m));
  }
  return WirtingerPolynomial(d_, std::move(out));
}

bool WirtingerPolynomial::is_real(double tol) const {
  const WirtingerPolynomial diff = *this + conjugate().scaled(-1.0);
  double scale = 0.0;
  for (const auto& t : terms_) scale = std::max(scale, std::abs(t.coeff));
  for (const auto& t : diff.terms_)
    if (std::abs(t.coeff) > tol * std::max(scale, 1.0)) return false;
  return true;
}

cplx WirtingerPolynomial::eval(const std::vector<cplx>& y) const {
  if (int(y.size()) != d_ + 1) throw std::invalid_argument("eval: expected d+1 values");
  cplx acc = 0.0;
  for (const auto& t : terms_) {
    cplx m = t.coeff;
    for (int i = 0; i <= d_; ++i) m *= ipow(y[i], t.exps[i]) * ipow(std::conj(y[i]), t.exps[d_ + 1 + i]);
    acc += m;
  }
  return acc;
}

CVec WirtingerPolynomial::eval_fields(const std::vector<CVec>& y) const {
  if (int(y.size()) != d_ + 1) throw std::invalid_argument("eval_fields: expected d+1 fields");
  const std::size_t n = y[0].size();
  CVec out(n, 0.0);
  for (const auto& t : terms_) {
    for (std::size_t k = 0; k < n; ++k) {
      cplx m = t.coeff;
      for (int i = 0; i <= d_; ++i) {
        if (t.exps[i]) m *= ipow(y[i][k], t.exps[i]);
        if (t.exps[d_ + 1 + i]) m *= ipow(std::conj(y[i][k]), t.exps[d_ + 1 + i]);
      }
      out[k] += m;
    }
  }
  return out;
}

WirtingerPolynomial WirtingerPolynomial::operator+(const WirtingerPolynomial& o) const {
  if (is_zero()) return o;
  if (o.is_zero()) return *this;
  if (o.d_ != d_) throw std::invalid_argument("WirtingerPolynomial: dimension mismatch");
  std::vector<Monomial> t = terms_;
  t.insert(t.end(), o.terms_.begin(), o.terms_.end());
  return WirtingerPolynomial(d_, std::move(t));
}

WirtingerPolynomial WirtingerPolynomial::scaled(cplx s) const {
  std::vector<Monomial> t = terms_;
  for (auto& m : t) m.coeff *= s;
  return WirtingerPolynomial(d_, std::move(t));
}

// ---------------------------------------------------------------------------

std::vector<double> SpecialForm::g() const {
  std::vector<double> hp;
  for (std::size_t k = 1; k < h.size(); ++k) hp.push_back(double(k) * h[k]);
  std::vector<double> sq(hp.empty() ? 0 : 2 * hp.size() - 1, 0.0);
  for (std::size_t a = 0; a < hp.size(); ++a)
    for (std::size_t b = 0; b < hp.size(); ++b) sq[a + b] += hp[a] * hp[b];
  return sq;
}

double SpecialForm::h_prime(double z) const {
  double r = 0.0, p = 1.0;
  for (std::size_t k = 1; k < h.size(); ++k) {
    r += double(k) * h[k] * p;
    p *= z;
  }
  return r;
}

double SpecialForm::g_at(double z) const {
  const double hp = h_prime(z);
  return hp * hp;
}

HamiltonianModel HamiltonianModel::polynomial(WirtingerPolynomial F) {
  if (!F.is_real(1e-14)) throw std::invalid_argument("Hamiltonian density is not real-valued");
  HamiltonianModel m;
  m.F_ = std::move(F);
  m.derive_all();
  return m;
}

HamiltonianModel HamiltonianModel::special_form(int d, SpecialForm sf) {
  const int nv = 2 * (d + 1);
  auto var_y = [](int i) { return i; };
  auto var_yb = [d](int i) { return d + 1 + i; };
  std::vector<Monomial> terms;
  for (int j = 1; j <= d; ++j) {
    std::vector<int> e(nv, 0);
    e[var_y(j)] = 1;
    e[var_yb(j)] = 1;
    terms.push_back(Monomial{sf.gradient_coefficient, e});
  }
  const auto g = sf.g();
  for (std::size_t m = 0; m < g.size(); ++m) {
    if (g[m] == 0.0) continue;
    for (int j = 1; j <= d; ++j) {
      std::vector<int> base(nv, 0);
      base[var_y(0)] = int(m);
      base[var_yb(0)] = int(m);
      auto t1 = base, t2 = base, t3 = base;
      t1[var_yb(0)] += 2;
      t1[var_y(j)] += 2;
      t2[var_y(0)] += 1;
      t2[var_yb(0)] += 1;
      t2[var_y(j)] += 1;
      t2[var_yb(j)] += 1;
      t3[var_y(0)] += 2;
      t3[var_yb(j)] += 2;
      terms.push_back(Monomial{g[m], t1});
      terms.push_back(Monomial{2.0 * g[m], t2});
      terms.push_back(Monomial{g[m], t3});
    }
  }
  HamiltonianModel model = polynomial(WirtingerPolynomial(d, std::move(terms)));
  model.special_ = std::move(sf);
  return model;
}

void HamiltonianModel::derive_all() {
  const int d = F_.dim();
  A_.clear();
  B_.clear();
  P_.clear();
  dybar_.clear();
  for (int j = 1; j <= d; ++j)
    for (int k = 1; k <= d; ++k) {
      A_.push_back(F_.derive(F_.var_y(j)).derive(F_.var_ybar(k)));
      B_.push_back(F_.derive(F_.var_ybar(j)).derive(F_.var_ybar(k)));
    }
  for (int j = 1; j <= d; ++j) {
    const auto p = F_.derive(F_.var_y(j)).derive(F_.var_ybar(0));
    const auto q = F_.derive(F_.var_ybar(j)).derive(F_.var_y(0));
    P_.push_back(p + q.scaled(-1.0));
    dybar_.push_back(F_.derive(F_.var_ybar(j)));
  }
  dybar0_ = F_.derive(F_.var_ybar(0));
}

// ---------------------------------------------------------------------------

double ellipticity_quantity(const HamiltonianModel& m, const std::vector<cplx>& jet, const Xi& xi) {
  const int d = m.dim();
  double a = 0.0;
  cplx b = 0.0;
  for (int j = 0; j < d; ++j)
    for (int k = 0; k < d; ++k) {
      a += (xi[j] * xi[k] * m.A(j, k).eval(jet)).real();
      b += xi[j] * xi[k] * m.B(j, k).eval(jet);
    }
  return a - std::abs(b);
}

std::vector<Xi> unit_directions(int d, int count) {
  std::vector<Xi> out;
  if (d == 1) return {Xi{1, 0, 0}, Xi{-1, 0, 0}};
  if (d == 2) {
    for (int k = 0; k < count; ++k) {
      const double t = 2.0 * kPi * k / count;
      out.push_back(Xi{std::cos(t), std::sin(t), 0});
    }
    return out;
  }
  const double golden = kPi * (3.0 - std::sqrt(5.0));
  for (int k = 0; k < count; ++k) {
    const double z = 1.0 - 2.0 * (k + 0.5) / count;
    const double r = std::sqrt(1.0 - z * z);
    out.push_back(Xi{r * std::cos(golden * k), r * std::sin(golden * k), z});
  }
  return out;
}

std::vector<CVec> physical_jet(const SpectralField& u) {
  const TorusGrid& g = u.grid();
  std::vector<CVec> jet;
  jet.push_back(to_physical(u));
  for (int i = 0; i < g.dim(); ++i) jet.push_back(spectral_derivative(g, jet[0], i));
  return jet;
}

std::vector<std::vector<cplx>> ellipticity_jets(int d, const DoubledField* U, double radius,
                                                std::size_t random_count, std::uint64_t seed) {
  std::vector<std::vector<cplx>> jets;
  jets.emplace_back(d + 1, cplx(0.0));
  if (U) {
    const auto jet = physical_jet(U->plus);
    for (std::size_t k = 0; k < jet[0].size(); ++k) {
      std::vector<cplx> y(d + 1);
      for (int i = 0; i <= d; ++i) y[i] = jet[i][k];
      jets.push_back(std::move(y));
    }
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (std::size_t n = 0; n < random_count; ++n) {
    std::vector<cplx> y(d + 1);
    for (auto& v : y) v = std::polar(radius * std::sqrt(unif(rng)), 2.0 * kPi * unif(rng));
    jets.push_back(std::move(y));
  }
  return jets;
}

EllipticityReport check_ellipticity(const HamiltonianModel& m,
                                    const std::vector<std::vector<cplx>>& jets,
                                    const std::vector<Xi>& directions) {
  EllipticityReport rep;
  rep.constant = std::numeric_limits<double>::infinity();
  for (const auto& jet : jets)
    for (const auto& xi : directions) {
      const double q = ellipticity_quantity(m, jet, xi);
      ++rep.samples;
      if (q < rep.constant) {
        rep.constant = q;
        rep.worst_jet = jet;
        rep.worst_xi = xi;
      }
    }
  if (rep.samples == 0) rep.constant = 0.0;
  rep.elliptic = rep.constant > 0.0;
  return rep;
}

// ---------------------------------------------------------------------------

QuasilinearCoefficients quasilinear_coefficients(const HamiltonianModel& m, const DoubledField& U) {
  const TorusGrid& g = U.grid();
  const int d = g.dim();
  if (d != m.dim()) throw std::invalid_argument("model and grid dimensions differ");
  QuasilinearCoefficients q;
  q.grid = g;
  q.jet = physical_jet(U.plus);
  for (int j = 0; j < d; ++j)
    for (int k = 0; k < d; ++k) {
      q.A.push_back(m.A(j, k).eval_fields(q.jet));
      q.B.push_back(m.B(j, k).eval_fields(q.jet));
    }
  for (int j = 0; j < d; ++j) {
    CVec p = m.P(j).eval_fields(q.jet);
    for (auto& v : p) v *= cplx(0.0, 0.5);
    q.a1.push_back(std::move(p));
  }
  return q;
}

QuasilinearCoefficients special_form_coefficients(const HamiltonianModel& m, const DoubledField& U) {
  if (!m.is_special()) throw std::invalid_argument("model has no special form");
  const TorusGrid& g = U.grid();
  const int d = g.dim();
  const SpecialForm& sf = m.special();
  QuasilinearCoefficients q;
  q.grid = g;
  q.jet = physical_jet(U.plus);
  const std::size_t n = g.grid_size();
  CVec diagA(n), diagB(n);
  std::vector<double> G(n);
  for (std::size_t k = 0; k < n; ++k) {
    const cplx u = q.jet[0][k];
    const double z = std::norm(u);
    G[k] = sf.g_at(z);
    diagA[k] = sf.gradient_coefficient + 2.0 * G[k] * z;
    diagB[k] = 2.0 * G[k] * u * u;
  }
  for (int j = 0; j < d; ++j)
    for (int k = 0; k < d; ++k) {
      q.A.push_back(j == k ? diagA : CVec(n, 0.0));
      q.B.push_back(j == k ? diagB : CVec(n, 0.0));
    }
  for (int j = 0; j < d; ++j) {
    CVec a(n);
    for (std::size_t k = 0; k < n; ++k)
      a[k] = 2.0 * G[k] * std::imag(q.jet[0][k] * std::conj(q.jet[1 + j][k]));
    q.a1.push_back(std::move(a));
  }
  return q;
}

QuasilinearCoefficients coefficients_for(const HamiltonianModel& m, const DoubledField& U) {
  return m.is_special() ? special_form_coefficients(m, U) : quasilinear_coefficients(m, U);
}

ParalinearSymbols build_symbols(const QuasilinearCoefficients& q) {
  const TorusGrid& g = q.grid;
  const int d = g.dim();
  std::vector<PolyTerm> ta, tb, t1;
  for (int j = 0; j < d; ++j) {
    for (int k = 0; k < d; ++k) {
      Index alpha{0, 0, 0};
      alpha[j] += 1;
      alpha[k] += 1;
      ta.push_back(PolyTerm{alpha, q.Ajk(j, k)});
      tb.push_back(PolyTerm{alpha, q.Bjk(j, k)});
    }
    Index e{0, 0, 0};
    e[j] = 1;
    t1.push_back(PolyTerm{e, q.a1[j]});
  }
  ParalinearSymbols s;
  s.a2 = Symbol::polynomial(g, 2.0, Parity::Even, "a2", std::move(ta));
  s.b2 = Symbol::polynomial(g, 2.0, Parity::Even, "b2", std::move(tb));
  s.a1 = Symbol::polynomial(g, 1.0, Parity::Odd, "a1", std::move(t1));
  return s;
}

ParalinearSymbols build_symbols(const HamiltonianModel& m, const DoubledField& U) {
  return build_symbols(coefficients_for(m, U));
}

ParalinearMatrices build_matrices(const ParalinearSymbols& s) {
  ParalinearMatrices out;
  out.A2 = MatrixSymbol::from_entries({s.a2, s.b2, conj_reflect(s.b2), s.a2}, "A2",
                                      Structure::Reality);
  out.A1 = MatrixSymbol::from_entries({s.a1, Symbol(), Symbol(), conj_reflect(s.a1)}, "A1",
                                      Structure::Reality);
  return out;
}

DoubledField apply_E(const DoubledField& U) { return DoubledField{U.plus, cplx(-1.0) * U.minus}; }

int dealiasing_points(const HamiltonianModel& m, int N) {
  return std::max(4 * N + 2, m.F().degree() * N + 1);
}

SpectralField nonlinearity_full(const HamiltonianModel& m, const SpectralField& u) {
  const TorusGrid& g = u.grid();
  const int d = g.dim();
  if (g.points() < dealiasing_points(m, g.freq_cut()))
    std::cerr << "warning: grid too coarse for exact products at degree " << m.F().degree() << "\n";
  const auto jet = physical_jet(u);
  CVec acc = m.dF_ybar0().is_zero() ? CVec(g.grid_size(), 0.0) : m.dF_ybar0().eval_fields(jet);
  for (int j = 0; j < d; ++j) {
    if (m.dF_ybar(j).is_zero()) continue;
    const CVec flux = m.dF_ybar(j).eval_fields(jet);
    const CVec div = spectral_derivative(g, flux, j);
    for (std::size_t k = 0; k < acc.size(); ++k) acc[k] -= div[k];
  }
  return from_physical(g, acc);
}

DoubledField full_rhs(const HamiltonianModel& m, const DoubledField& U) {
  const SpectralField N = nonlinearity_full(m, U.plus);
  return DoubledField{cplx(0.0, 1.0) * N, cplx(0.0, -1.0) * N.conjugate()};
}

DoubledOperator paralinear_operator(const ParalinearMatrices& mats, const CutoffSpec& cut) {
  const DoubledOperator A = opbw_assemble(mats.A2 + mats.A1, cut);
  std::array<std::optional<ParaOperator>, 4> blocks;
  for (int k = 0; k < 4; ++k) {
    const auto& b = A.block(k / 2, k % 2);
    if (!b) continue;
    const cplx f = k < 2 ? cplx(0.0, 1.0) : cplx(0.0, -1.0);
    blocks[k] = ParaOperator(A.grid(), f * b->matrix(), b->order(), "iE*" + b->id());
  }
  return DoubledOperator(A.grid(), std::move(blocks), "iE(A2+A1)");
}

DoubledField paralinear_remainder(const HamiltonianModel& m, const DoubledField& U,
                                  const CutoffSpec& cut) {
  const auto mats = build_matrices(build_symbols(m, U));
  return full_rhs(m, U) - paralinear_operator(mats, cut).apply(U);
}

double hamiltonian(const HamiltonianModel& m, const SpectralField& u) {
  const TorusGrid& g = u.grid();
  const CVec f = m.F().eval_fields(physical_jet(u));
  double s = 0.0;
  for (const auto& v : f) s += v.real();
  return s * g.cell_volume();
}

}  // namespace qnls

#include "qnls/diagonalization.hpp"

#include <cmath>
#include <map>
#include <sstream>

namespace qnls {

struct PackData {
  TorusGrid grid;
  int d = 0;
  std::size_t n = 0;
  std::vector<CVec> A, B, a1;
  std::vector<CVec> dA, dB;  // index (i * d + j) * d + k: d/dx_i of A_jk
  bool isotropic = false;
  // special-form model: the first-order part is diagonal and C vanishes
  bool special = false;
  PhiCutoff phi;
};

double PhiCutoff::operator()(const Xi& xi, int d) const {
  const double r = std::sqrt(xi_norm_sq(xi, d));
  return 1.0 - plateau_cutoff(r, lo, hi);
}

namespace {

using Data = std::shared_ptr<const PackData>;

Jet zero_jet(std::size_t n, int d) {
  return Jet{Samples(n, 0.0), std::vector<Samples>(d, Samples(n, 0.0)),
             std::vector<Samples>(d, Samples(n, 0.0))};
}

// Quadratic form sum F_jk xi_j xi_k with its gradients.
Jet quadratic_jet(const PackData& p, const std::vector<CVec>& F, const std::vector<CVec>& dF,
                  const Xi& xi) {
  const int d = p.d;
  Jet q = zero_jet(p.n, d);
  for (int j = 0; j < d; ++j)
    for (int k = 0; k < d; ++k) {
      const double w = xi[j] * xi[k];
      const CVec& f = F[j * d + k];
      for (std::size_t x = 0; x < p.n; ++x) {
        q.v[x] += w * f[x];
        q.dxi[j][x] += xi[k] * f[x];
        q.dxi[k][x] += xi[j] * f[x];
      }
      for (int i = 0; i < d; ++i) {
        const CVec& df = dF[(i * d + j) * d + k];
        for (std::size_t x = 0; x < p.n; ++x) q.dx[i][x] += w * df[x];
      }
    }
  return q;
}

// Q / |xi|^2; at xi = 0 the unit-sphere average tr(F)/d.
Jet tilde_jet(const PackData& p, const std::vector<CVec>& F, const std::vector<CVec>& dF,
              const Xi& xi) {
  const int d = p.d;
  const double r2 = xi_norm_sq(xi, d);
  if (r2 == 0.0) {
    Jet t = zero_jet(p.n, d);
    for (int j = 0; j < d; ++j) {
      for (std::size_t x = 0; x < p.n; ++x) t.v[x] += F[j * d + j][x] / double(d);
      for (int i = 0; i < d; ++i)
        for (std::size_t x = 0; x < p.n; ++x) t.dx[i][x] += dF[(i * d + j) * d + j][x] / double(d);
    }
    return t;
  }
  Jet t = quadratic_jet(p, F, dF, xi);
  for (std::size_t x = 0; x < p.n; ++x) t.v[x] /= r2;
  for (int i = 0; i < d; ++i)
    for (std::size_t x = 0; x < p.n; ++x) {
      t.dxi[i][x] = p.isotropic ? 0.0 : (t.dxi[i][x] - 2.0 * xi[i] * t.v[x]) / r2;
      t.dx[i][x] /= r2;
    }
  return t;
}

EigenJets eigen_jets(const PackData& p, const Xi& xi) {
  const int d = p.d;
  EigenJets e;
  e.a_t = tilde_jet(p, p.A, p.dA, xi);
  e.b_t = tilde_jet(p, p.B, p.dB, xi);
  e.lambda = zero_jet(p.n, d);
  e.s1 = zero_jet(p.n, d);
  e.s2 = zero_jet(p.n, d);
  for (std::size_t x = 0; x < p.n; ++x) {
    const double a = e.a_t.v[x].real();
    const cplx b = e.b_t.v[x];
    const double disc = a * a - std::norm(b);
    if (!(disc > 0.0) || !(a > 0.0)) {
      std::ostringstream os;
      os << "eigenvalue undefined at node " << x << ": a=" << a << " |b|=" << std::abs(b);
      throw EllipticityError(os.str(), p.grid.node(x), xi);
    }
    const double lam = std::sqrt(disc);
    const double s1 = std::sqrt((a + lam) / (2.0 * lam));
    const double kap = 1.0 / std::sqrt(2.0 * lam * (a + lam));
    e.lambda.v[x] = lam;
    e.s1.v[x] = s1;
    e.s2.v[x] = -b * kap;
    auto derive = [&](const cplx& da_c, const cplx& db, cplx& dl_out, cplx& ds1_out, cplx& ds2_out) {
      const double da = da_c.real();
      const double dl = (a * da - (std::conj(b) * db).real()) / lam;
      const double ds1 = (lam * da - a * dl) / (4.0 * lam * lam * s1);
      const double dk = -kap * kap * kap * ((a + 2.0 * lam) * dl + lam * da);
      dl_out = dl;
      ds1_out = ds1;
      ds2_out = -(db * kap + b * dk);
    };
    for (int i = 0; i < d; ++i) {
      derive(e.a_t.dxi[i][x], e.b_t.dxi[i][x], e.lambda.dxi[i][x], e.s1.dxi[i][x], e.s2.dxi[i][x]);
      derive(e.a_t.dx[i][x], e.b_t.dx[i][x], e.lambda.dx[i][x], e.s1.dx[i][x], e.s2.dx[i][x]);
    }
  }
  return e;
}

// Per-node 2x2 algebra; entries row-major.
using M2 = std::array<cplx, 4>;

M2 mm(const M2& a, const M2& b) {
  return {a[0] * b[0] + a[1] * b[2], a[0] * b[1] + a[1] * b[3], a[2] * b[0] + a[3] * b[2],
          a[2] * b[1] + a[3] * b[3]};
}
M2 madd(const M2& a, const M2& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]}; }
M2 msub(const M2& a, const M2& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2], a[3] - b[3]}; }
M2 mscale(cplx s, const M2& a) { return {s * a[0], s * a[1], s * a[2], s * a[3]}; }

struct NodeJet {
  cplx v;
  std::array<cplx, kMaxDim> dxi{}, dx{};
};

NodeJet node_jet(const Jet& j, std::size_t x) {
  NodeJet n;
  n.v = j.v[x];
  for (std::size_t i = 0; i < j.dxi.size(); ++i) {
    n.dxi[i] = j.dxi[i][x];
    n.dx[i] = j.dx[i][x];
  }
  return n;
}

NodeJet nconj(NodeJet n) {
  n.v = std::conj(n.v);
  for (auto& z : n.dxi) z = std::conj(z);
  for (auto& z : n.dx) z = std::conj(z);
  return n;
}

NodeJet nneg(NodeJet n) {
  n.v = -n.v;
  for (auto& z : n.dxi) z = -z;
  for (auto& z : n.dx) z = -z;
  return n;
}

cplx nbracket(const NodeJet& f, const NodeJet& g, int d) {
  cplx r = 0.0;
  for (int i = 0; i < d; ++i) r += f.dxi[i] * g.dx[i] - f.dx[i] * g.dxi[i];
  return r;
}

struct MJ {
  M2 v;
  std::array<M2, kMaxDim> dxi, dx;
};

MJ mj(const NodeJet& a, const NodeJet& b, const NodeJet& c, const NodeJet& e, int d) {
  MJ m;
  m.v = {a.v, b.v, c.v, e.v};
  for (int i = 0; i < d; ++i) {
    m.dxi[i] = {a.dxi[i], b.dxi[i], c.dxi[i], e.dxi[i]};
    m.dx[i] = {a.dx[i], b.dx[i], c.dx[i], e.dx[i]};
  }
  return m;
}

MJ mj_mul(const MJ& P, const MJ& Q, int d) {
  MJ r;
  r.v = mm(P.v, Q.v);
  for (int i = 0; i < d; ++i) {
    r.dxi[i] = madd(mm(P.dxi[i], Q.v), mm(P.v, Q.dxi[i]));
    r.dx[i] = madd(mm(P.dx[i], Q.v), mm(P.v, Q.dx[i]));
  }
  return r;
}

// sum_i d_xi P d_x Q - d_x P d_xi Q
M2 mj_bracket(const MJ& P, const MJ& Q, int d) {
  M2 r{};
  for (int i = 0; i < d; ++i) r = madd(r, msub(mm(P.dxi[i], Q.dx[i]), mm(P.dx[i], Q.dxi[i])));
  return r;
}

const cplx kInv2i = 1.0 / cplx(0.0, 2.0);

// (1/2i) [[{s2,s2c}, 2{s1,s2}], [-2{s1,s2c}(-xi), {s2,s2c}(-xi)]] S, using evenness of s1, s2.
M2 s_star_node(const NodeJet& s1, const NodeJet& s2, int d) {
  const NodeJet s2c = nconj(s2);
  const cplx b22 = nbracket(s2, s2c, d);
  const cplx b12 = nbracket(s1, s2, d);
  const cplx b1c = nbracket(s1, s2c, d);
  const M2 M{b22, 2.0 * b12, 2.0 * b1c, -b22};
  const M2 S{s1.v, s2.v, s2c.v, s1.v};
  return mscale(kInv2i, mm(M, S));
}

MatrixSamples s_star_at(const PackData& p, const EigenJets& e) {
  MatrixSamples out = mat_zero(p.n);
  if (p.isotropic) return out;
  for (std::size_t x = 0; x < p.n; ++x) {
    const M2 s = s_star_node(node_jet(e.s1, x), node_jet(e.s2, x), p.d);
    for (int k = 0; k < 4; ++k) out[k][x] = s[k];
  }
  return out;
}

MatrixSamples s_star_at(const PackData& p, const Xi& xi) {
  if (p.isotropic) return mat_zero(p.n);
  return s_star_at(p, eigen_jets(p, xi));
}

// (1/2i)({X, YZ} + X{Y, Z}) + X Y S* + X A1 S with X = S^{-1} E, Y = A2, Z = S.
MatrixSamples d1_at(const PackData& p, const Xi& xi, const EigenJets& e) {
  const int d = p.d;
  const Jet a2 = quadratic_jet(p, p.A, p.dA, xi);
  const Jet b2 = quadratic_jet(p, p.B, p.dB, xi);
  MatrixSamples out = mat_zero(p.n);
  for (std::size_t x = 0; x < p.n; ++x) {
    const NodeJet s1 = node_jet(e.s1, x), s2 = node_jet(e.s2, x), s2c = nconj(s2);
    const NodeJet A = node_jet(a2, x), B = node_jet(b2, x);
    const MJ X = mj(s1, s2, nneg(s2c), nneg(s1), d);
    const MJ Z = mj(s1, s2, s2c, s1, d);
    const MJ Y = mj(A, B, nconj(B), A, d);
    const MJ YZ = mj_mul(Y, Z, d);
    M2 r = mscale(kInv2i, madd(mj_bracket(X, YZ, d), mm(X.v, mj_bracket(Y, Z, d))));
    if (!p.isotropic) r = madd(r, mm(mm(X.v, Y.v), s_star_node(s1, s2, d)));
    cplx a1 = 0.0;
    for (int i = 0; i < d; ++i) a1 += xi[i] * p.a1[i][x];
    const M2 A1{a1, 0.0, 0.0, -std::conj(a1)};
    r = madd(r, mm(mm(X.v, A1), Z.v));
    for (int k = 0; k < 4; ++k) out[k][x] = r[k];
  }
  if (p.special) out[1] = out[2] = Samples(p.n, 0.0);
  return out;
}

MatrixSamples d1_at(const PackData& p, const Xi& xi) { return d1_at(p, xi, eigen_jets(p, xi)); }
Xi negate(Xi xi, int d) {
  for (int i = 0; i < d; ++i) xi[i] = -xi[i];
  return xi;
}

Samples lambda_values(const PackData& p, const Xi& xi) {
  Jet a = tilde_jet(p, p.A, p.dA, xi);
  Jet b = tilde_jet(p, p.B, p.dB, xi);
  Samples out(p.n);
  for (std::size_t x = 0; x < p.n; ++x) {
    const double disc = std::norm(a.v[x].real()) - std::norm(b.v[x]);
    if (!(disc > 0.0)) throw EllipticityError("eigenvalue undefined", p.grid.node(x), xi);
    out[x] = std::sqrt(disc);
  }
  return out;
}

Samples c_values(const PackData& p, const Xi& xi) {
  const double ph = p.phi(xi, p.d);
  if (ph == 0.0 || p.special) return Samples(p.n, 0.0);
  const MatrixSamples d1 = d1_at(p, xi);
  const Samples lam = lambda_values(p, xi);
  const double r2 = xi_norm_sq(xi, p.d);
  Samples c(p.n);
  for (std::size_t x = 0; x < p.n; ++x) c[x] = -ph * d1[1][x] / (lam[x] * r2);
  return c;
}

Symbol::Grad jet_grad(Data data, Jet EigenJets::*member) {
  return [data, member](const Xi& xi) { return (eigen_jets(*data, xi).*member).dxi; };
}

}  // namespace

EigenJets DiagonalizationPack::jets(const Xi& xi) const { return eigen_jets(*data, xi); }

MatrixSamples s_star_samples(const DiagonalizationPack& p, const Xi& xi) {
  return s_star_at(*p.data, xi);
}

MatrixSamples d1_samples(const DiagonalizationPack& p, const Xi& xi) { return d1_at(*p.data, xi); }

MatrixSamples principal_product_samples(const DiagonalizationPack& p, const Xi& xi) {
  const PackData& d = *p.data;
  const EigenJets e = eigen_jets(d, xi);
  Samples ms2c(d.n), ms1(d.n), s2c(d.n);
  for (std::size_t x = 0; x < d.n; ++x) {
    s2c[x] = std::conj(e.s2.v[x]);
    ms2c[x] = -s2c[x];
    ms1[x] = -e.s1.v[x];
  }
  const MatrixSamples X{e.s1.v, e.s2.v, ms2c, ms1};
  const MatrixSamples Z{e.s1.v, e.s2.v, s2c, e.s1.v};
  const Jet a2 = quadratic_jet(d, d.A, d.dA, xi);
  const Jet b2 = quadratic_jet(d, d.B, d.dB, xi);
  Samples b2c(d.n);
  for (std::size_t x = 0; x < d.n; ++x) b2c[x] = std::conj(b2.v[x]);
  const MatrixSamples Y{a2.v, b2.v, b2c, a2.v};
  return mat_mul(mat_mul(X, Y), Z);
}

Symbol DiagonalizationPack::weight_symbol(double sigma) const {
  Data dp = data;
  const int d = dp->d;
  return Symbol(grid(), 2.0 * sigma, Parity::Even, "lambda^s|xi|^2s", [dp, sigma, d](const Xi& xi) {
    Samples lam = lambda_values(*dp, xi);
    const double r2s = std::pow(xi_norm_sq(xi, d), sigma);
    for (auto& v : lam) v = std::pow(v.real(), sigma) * r2s;
    return lam;
  });
}

MatrixSymbol DiagonalizationPack::weight(double sigma) const {
  const Symbol w = weight_symbol(sigma);
  return MatrixSymbol::from_entries({w, Symbol(), Symbol(), w}, "W", Structure::Reality);
}

DiagonalizationPack build_pack(const HamiltonianModel& m, const DoubledField& background,
                               PhiCutoff phi, double ellipticity_floor) {
  const TorusGrid& g = background.grid();
  const int d = g.dim();
  const QuasilinearCoefficients q = coefficients_for(m, background);

  auto pd = std::make_shared<PackData>();
  pd->grid = g;
  pd->d = d;
  pd->n = g.grid_size();
  pd->A = q.A;
  pd->B = q.B;
  pd->a1 = q.a1;
  pd->phi = phi;
  pd->isotropic = m.is_special() || d == 1;
  pd->special = m.is_special();
  pd->dA.resize(d * d * d);
  pd->dB.resize(d * d * d);
  for (int i = 0; i < d; ++i)
    for (int jk = 0; jk < d * d; ++jk) {
      pd->dA[i * d * d + jk] = spectral_derivative(g, q.A[jk], i);
      pd->dB[i * d * d + jk] = spectral_derivative(g, q.B[jk], i);
    }

  // ellipticity margin at every node over unit directions
  std::vector<Xi> dirs = unit_directions(d, 64);
  dirs.push_back(Xi{0, 0, 0});
  for (const Xi& xi : dirs) {
    const Jet a = tilde_jet(*pd, pd->A, pd->dA, xi);
    const Jet b = tilde_jet(*pd, pd->B, pd->dB, xi);
    for (std::size_t x = 0; x < pd->n; ++x)
      if (a.v[x].real() - std::abs(b.v[x]) <= ellipticity_floor) {
        std::ostringstream os;
        os << "ellipticity fails: a~ - |b~| = " << a.v[x].real() - std::abs(b.v[x]) << " at node "
           << x;
        throw EllipticityError(os.str(), g.node(x), xi);
      }
  }

  DiagonalizationPack p;
  p.data = pd;
  p.background = background;
  p.isotropic = pd->isotropic;
  Data dp = pd;

  const ParalinearSymbols sym = build_symbols(q);
  p.a2 = sym.a2;
  p.b2 = sym.b2;
  p.a1 = sym.a1;
  const ParalinearMatrices mats = build_matrices(sym);
  p.A2 = mats.A2;
  p.A1 = mats.A1;

  p.a2_tilde = Symbol(g, 0.0, Parity::Even, "a2~",
                      [dp](const Xi& xi) { return tilde_jet(*dp, dp->A, dp->dA, xi).v; },
                      [dp](const Xi& xi) { return tilde_jet(*dp, dp->A, dp->dA, xi).dxi; });
  p.b2_tilde = Symbol(g, 0.0, Parity::Even, "b2~",
                      [dp](const Xi& xi) { return tilde_jet(*dp, dp->B, dp->dB, xi).v; },
                      [dp](const Xi& xi) { return tilde_jet(*dp, dp->B, dp->dB, xi).dxi; });
  p.lambda = Symbol(g, 0.0, Parity::Even, "lambda",
                    [dp](const Xi& xi) { return lambda_values(*dp, xi); },
                    jet_grad(dp, &EigenJets::lambda));
  p.lambda_xi2 = Symbol(g, 2.0, Parity::Even, "lambda|xi|^2", [dp](const Xi& xi) {
    Samples v = lambda_values(*dp, xi);
    const double r2 = xi_norm_sq(xi, dp->d);
    for (auto& z : v) z *= r2;
    return v;
  });
  p.s1 = Symbol(g, 0.0, Parity::Even, "s1", [dp](const Xi& xi) { return eigen_jets(*dp, xi).s1.v; },
                jet_grad(dp, &EigenJets::s1));
  p.s2 = Symbol(g, 0.0, Parity::Even, "s2", [dp](const Xi& xi) { return eigen_jets(*dp, xi).s2.v; },
                jet_grad(dp, &EigenJets::s2));

  p.S = MatrixSymbol(g, 0.0, "S", Structure::Reality, [dp](const Xi& xi) {
    const EigenJets e = eigen_jets(*dp, xi);
    Samples c(dp->n);
    for (std::size_t x = 0; x < dp->n; ++x) c[x] = std::conj(e.s2.v[x]);
    return MatrixSamples{e.s1.v, e.s2.v, c, e.s1.v};
  });
  p.S_inv = MatrixSymbol(g, 0.0, "S^-1", Structure::Reality, [dp](const Xi& xi) {
    const EigenJets e = eigen_jets(*dp, xi);
    Samples c(dp->n), m(dp->n);
    for (std::size_t x = 0; x < dp->n; ++x) {
      c[x] = -std::conj(e.s2.v[x]);
      m[x] = -e.s2.v[x];
    }
    return MatrixSamples{e.s1.v, m, c, e.s1.v};
  });
  p.S_star = MatrixSymbol(g, -1.0, "S*", Structure::Reality,
                          [dp](const Xi& xi) { return s_star_at(*dp, xi); });
  p.S_corrected = MatrixSymbol(g, 0.0, "S+S*", Structure::Reality, [dp, S = p.S](const Xi& xi) {
    return mat_add(S.eval(xi), s_star_at(*dp, xi));
  });
  p.s1_star = Symbol(g, -1.0, Parity::Odd, "s1*", [dp](const Xi& xi) { return s_star_at(*dp, xi)[0]; });
  p.s2_star = Symbol(g, -1.0, Parity::Odd, "s2*", [dp](const Xi& xi) { return s_star_at(*dp, xi)[1]; });

  p.D1 = MatrixSymbol(g, 1.0, "D1", Structure::None, [dp](const Xi& xi) { return d1_at(*dp, xi); });
  p.a1_plus = Symbol(g, 1.0, Parity::Odd, "a1+", [dp](const Xi& xi) { return d1_at(*dp, xi)[0]; });
  p.b1_plus = Symbol(g, 1.0, Parity::Odd, "b1+", [dp](const Xi& xi) { return d1_at(*dp, xi)[1]; });
  p.principal = MatrixSymbol::from_entries(
      {p.lambda_xi2, Symbol(), Symbol(), cplx(-1.0) * p.lambda_xi2}, "E*lambda|xi|^2", Structure::None);

  p.c = Symbol(g, -1.0, Parity::Odd, "c", [dp](const Xi& xi) { return c_values(*dp, xi); });
  p.C = MatrixSymbol(g, -1.0, "C", Structure::Reality, [dp](const Xi& xi) {
    const Samples up = c_values(*dp, xi);
    Samples lo = c_values(*dp, negate(xi, dp->d));
    for (auto& v : lo) v = std::conj(v);
    return MatrixSamples{Samples(dp->n, 0.0), up, lo, Samples(dp->n, 0.0)};
  });
  return p;
}

// ---------------------------------------------------------------------------

namespace {

DoubledOperator with_E(const DoubledOperator& A) {
  std::array<std::optional<ParaOperator>, 4> blocks;
  for (int k = 0; k < 4; ++k) {
    const auto& b = A.block(k / 2, k % 2);
    if (!b) continue;
    blocks[k] = k < 2 ? *b : ParaOperator(b->grid(), -b->matrix(), b->order(), "-" + b->id());
  }
  return DoubledOperator(A.grid(), std::move(blocks), "E*" + A.id());
}

}  // namespace

PackOperators assemble_pack(const DiagonalizationPack& p, const CutoffSpec& cut) {
  const PackData& pd = *p.data;
  const TorusGrid& g = p.grid();
  const std::size_t n = pd.n;
  const int d = pd.d;

  // c(xi) values kept until the mirrored midpoint consumes them
  using Key = std::array<long, kMaxDim>;
  auto key = [d](const Xi& xi) {
    Key k{};
    for (int i = 0; i < d; ++i) k[i] = std::lround(2.0 * xi[i]);
    return k;
  };
  std::map<Key, Samples> c_cache;
  auto take = [&](const Xi& xi, auto&& compute) {
    auto it = c_cache.find(key(xi));
    if (it == c_cache.end()) return compute();
    Samples v = std::move(it->second);
    c_cache.erase(it);
    return v;
  };

  // S 0-3, S^-1 4-7, S* 8-11, D1 12-15, principal 16-17, C 18-19
  const auto blocks = assemble_blocks(g, cut, 20, [&](const Xi& xi) {
    std::vector<Samples> out(20);
    const EigenJets e = eigen_jets(pd, xi);
    Samples s2c(n), ms2(n), ms2c(n);
    for (std::size_t x = 0; x < n; ++x) {
      s2c[x] = std::conj(e.s2.v[x]);
      ms2[x] = -e.s2.v[x];
      ms2c[x] = -s2c[x];
    }
    out[0] = e.s1.v;
    out[1] = e.s2.v;
    out[2] = s2c;
    out[3] = e.s1.v;
    out[4] = e.s1.v;
    out[5] = ms2;
    out[6] = ms2c;
    out[7] = e.s1.v;
    if (!pd.isotropic) {
      MatrixSamples st = s_star_at(pd, e);
      for (int k = 0; k < 4; ++k) out[8 + k] = std::move(st[k]);
    }
    const MatrixSamples d1 = d1_at(pd, xi, e);
    for (int k = 0; k < 4; ++k) out[12 + k] = d1[k];
    const double r2 = xi_norm_sq(xi, d);
    Samples pr(n), mpr(n);
    for (std::size_t x = 0; x < n; ++x) {
      pr[x] = e.lambda.v[x] * r2;
      mpr[x] = -pr[x];
    }
    out[16] = std::move(pr);
    out[17] = std::move(mpr);
    if (pd.phi(xi, d) != 0.0 && !pd.special) {
      const Xi mxi = negate(xi, d);
      const bool mirror_done = c_cache.count(key(mxi)) > 0 || c_cache.count(key(xi)) > 0;
      Samples up = take(xi, [&] {
        const double ph = pd.phi(xi, d);
        Samples c(n);
        for (std::size_t x = 0; x < n; ++x) c[x] = -ph * d1[1][x] / (e.lambda.v[x] * r2);
        return c;
      });
      Samples lo = take(mxi, [&] { return c_values(pd, mxi); });
      if (!mirror_done && key(xi) != key(mxi)) {
        c_cache[key(xi)] = up;
        c_cache[key(mxi)] = lo;
      }
      for (auto& v : lo) v = std::conj(v);
      out[18] = std::move(up);
      out[19] = std::move(lo);
    }
    return out;
  });

  auto block_op = [&](int first, std::array<int, 4> slots, double order, const std::string& id) {
    std::array<std::optional<ParaOperator>, 4> b;
    for (int k = 0; k < 4; ++k)
      if (slots[k] >= 0) b[k] = ParaOperator(g, blocks[first + slots[k]], order, id);
    return DoubledOperator(g, std::move(b), id);
  };

  PackOperators ops;
  ops.S = block_op(0, {0, 1, 2, 3}, 0.0, "S");
  ops.S_inv = block_op(4, {0, 1, 2, 3}, 0.0, "S^-1");
  ops.S_star = pd.isotropic ? DoubledOperator(g, {}, "S*") : block_op(8, {0, 1, 2, 3}, -1.0, "S*");
  ops.D1 = block_op(12, {0, 1, 2, 3}, 1.0, "D1");
  ops.principal = block_op(16, {0, -1, -1, 1}, 2.0, "E*lambda|xi|^2");
  ops.C = pd.special ? DoubledOperator(g, {}, "C") : block_op(18, {-1, 0, 1, -1}, -1.0, "C");
  ops.EA = with_E(opbw_assemble(p.A2 + p.A1, cut));
  return ops;
}

DoubledField PackOperators::parametrix(const DoubledField& V, bool with_star) const {
  const DoubledField W = S_inv.apply(V);
  DoubledField out = S.apply(W);
  if (with_star) out += S_star.apply(W);
  return out;
}

DoubledField PackOperators::conjugated(const DoubledField& V) const {
  DoubledField W = S.apply(V) + S_star.apply(V);
  return S_inv.apply(EA.apply(W));
}

DoubledField PackOperators::corrected(const DoubledField& V) const {
  const DoubledField W = principal.apply(V) + D1.apply(V);
  return W - C.apply(W);
}

DoubledField PackOperators::modified(const DoubledField& V) const {
  const DoubledField W = S_inv.apply(V);
  return W - C.apply(W);
}

LinearMap parametrix_residual(const PackOperators& ops, bool with_star) {
  return [&ops, with_star](const DoubledField& V) { return ops.parametrix(V, with_star) - V; };
}

LinearMap principal_residual(const PackOperators& ops) {
  return [&ops](const DoubledField& V) {
    return ops.conjugated(V) - ops.principal.apply(V) - ops.D1.apply(V);
  };
}

SlopeFit offdiagonal_growth(const LinearMap& map, const TorusGrid& g) {
  const auto ns = sweep_frequencies(g.freq_cut());
  std::vector<double> v;
  for (int n : ns) {
    DoubledField probe{probe_mode(g, n), SpectralField(g)};
    v.push_back(sobolev_norm(map(probe).minus, 0.0));
  }
  return fit_slope(ns, v);
}

SlopeFit doubled_growth(const LinearMap& map, const TorusGrid& g) {
  return frequency_growth(map, g);
}

}  // namespace qnls

#include "qnls/paradiff.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace qnls {

namespace {

// Visits every integer point of the box [lo, hi] (first d components).
template <class F>
void for_box(int d, const Index& lo, const Index& hi, F&& f) {
  for (int i = 0; i < d; ++i)
    if (lo[i] > hi[i]) return;
  Index p = lo;
  for (int i = d; i < kMaxDim; ++i) p[i] = 0;
  while (true) {
    f(p);
    int i = d - 1;
    while (i >= 0 && p[i] == hi[i]) {
      p[i] = lo[i];
      --i;
    }
    if (i < 0) return;
    ++p[i];
  }
}

double midpoint_japanese(const Index& sigma, int d) { return japanese(sigma, d); }

// Calls f(j, k, p, weight) for each pair with j + k = sigma inside the cutoff support.
template <class F>
void for_band_pairs(const TorusGrid& g, const CutoffSpec& cut, const Index& sigma, F&& f) {
  const int d = g.dim(), N = g.freq_cut();
  Index lo{0, 0, 0}, hi{0, 0, 0};
  for (int i = 0; i < d; ++i) {
    lo[i] = std::max(-N, sigma[i] - N);
    hi[i] = std::min(N, sigma[i] + N);
  }
  const double js = midpoint_japanese(sigma, d);
  for_box(d, lo, hi, [&](const Index& j) {
    Index k{0, 0, 0}, p{0, 0, 0};
    for (int i = 0; i < d; ++i) {
      k[i] = sigma[i] - j[i];
      p[i] = j[i] - k[i];
    }
    const double w = cut.chi_eps(std::sqrt(index_norm_sq(p, d)) / js);
    if (w != 0.0) f(j, k, p, w);
  });
}

template <class F>
void for_midpoints(const TorusGrid& g, F&& f) {
  const int d = g.dim(), N = g.freq_cut();
  Index lo{0, 0, 0}, hi{0, 0, 0};
  for (int i = 0; i < d; ++i) {
    lo[i] = -2 * N;
    hi[i] = 2 * N;
  }
  for_box(d, lo, hi, f);
}

Xi half(const Index& sigma, int d) {
  Xi xi{0, 0, 0};
  for (int i = 0; i < d; ++i) xi[i] = 0.5 * sigma[i];
  return xi;
}

Eigen::MatrixXcd assemble_diagonal(const TorusGrid& g, const Symbol::Weight& w) {
  const std::size_t L = g.lattice_size();
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(L, L);
  for (std::size_t f = 0; f < L; ++f) {
    const Index j = g.lattice_point(f);
    Xi xi{0, 0, 0};
    for (int i = 0; i < g.dim(); ++i) xi[i] = j[i];
    m(f, f) = w(xi);
  }
  return m;
}

Eigen::MatrixXcd assemble_polynomial(const TorusGrid& g, const std::vector<PolyTerm>& terms,
                                     const CutoffSpec& cut) {
  const int d = g.dim();
  const std::size_t L = g.lattice_size();
  std::vector<CVec> hats;
  hats.reserve(terms.size());
  for (const auto& t : terms) hats.push_back(mean_coefficients(g, t.coeff));
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(L, L);
  std::vector<double> powers(terms.size());
  for_midpoints(g, [&](const Index& sigma) {
    const Xi xi = half(sigma, d);
    for (std::size_t t = 0; t < terms.size(); ++t) {
      double r = 1.0;
      for (int i = 0; i < d; ++i)
        for (int e = 0; e < terms[t].alpha[i]; ++e) r *= xi[i];
      powers[t] = r;
    }
    for_band_pairs(g, cut, sigma, [&](const Index& j, const Index& k, const Index& p, double w) {
      const std::size_t s = g.slot(p);
      cplx acc = 0.0;
      for (std::size_t t = 0; t < terms.size(); ++t)
        if (powers[t] != 0.0) acc += powers[t] * hats[t][s];
      m(g.lattice_flat(j), g.lattice_flat(k)) = w * acc;
    });
  });
  return m;
}

// Generic path: one evaluation and one transform per midpoint; fills up to four blocks at once.
template <class EvalMany>
void assemble_generic(const TorusGrid& g, const CutoffSpec& cut, int count, EvalMany&& eval,
                      std::vector<Eigen::MatrixXcd*> out) {
  const int d = g.dim();
  for_midpoints(g, [&](const Index& sigma) {
    bool any = false;
    for_band_pairs(g, cut, sigma, [&](const Index&, const Index&, const Index&, double) { any = true; });
    if (!any) return;
    std::vector<Samples> vals = eval(half(sigma, d));
    std::vector<CVec> hats(count);
    for (int c = 0; c < count; ++c)
      if (out[c] && !vals[c].empty()) hats[c] = mean_coefficients(g, vals[c]);
    for_band_pairs(g, cut, sigma, [&](const Index& j, const Index& k, const Index& p, double w) {
      const std::size_t s = g.slot(p);
      const std::size_t r = g.lattice_flat(j), c0 = g.lattice_flat(k);
      for (int c = 0; c < count; ++c)
        if (out[c] && !hats[c].empty()) (*out[c])(r, c0) = w * hats[c][s];
    });
  });
}

}  // namespace

// ---------------------------------------------------------------------------

ParaOperator::ParaOperator(const TorusGrid& g, Eigen::MatrixXcd m, double order, std::string id)
    : grid_(g), m_(std::move(m)), order_(order), id_(std::move(id)) {
  if (m_.rows() != Eigen::Index(g.lattice_size()) || m_.cols() != m_.rows())
    throw std::invalid_argument("ParaOperator: matrix shape does not match lattice");
}

SpectralField ParaOperator::apply(const SpectralField& u) const {
  if (u.grid() != grid_) throw std::invalid_argument("ParaOperator::apply: grid mismatch");
  Eigen::Map<const Eigen::VectorXcd> x(u.coeffs().data(), u.size());
  SpectralField out(grid_);
  Eigen::Map<Eigen::VectorXcd> y(out.coeffs().data(), out.size());
  y.noalias() = m_ * x;
  return out;
}

DoubledOperator::DoubledOperator(const TorusGrid& g,
                                 std::array<std::optional<ParaOperator>, 4> blocks, std::string id)
    : grid_(g), blocks_(std::move(blocks)), id_(std::move(id)) {}

DoubledField DoubledOperator::apply(const DoubledField& U) const {
  if (U.grid() != grid_) throw std::invalid_argument("DoubledOperator::apply: grid mismatch");
  DoubledField out = DoubledField::zero(grid_);
  if (blocks_[0]) out.plus += blocks_[0]->apply(U.plus);
  if (blocks_[1]) out.plus += blocks_[1]->apply(U.minus);
  if (blocks_[2]) out.minus += blocks_[2]->apply(U.plus);
  if (blocks_[3]) out.minus += blocks_[3]->apply(U.minus);
  return out;
}

Eigen::MatrixXcd DoubledOperator::stacked() const {
  const Eigen::Index L = Eigen::Index(grid_.lattice_size());
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(2 * L, 2 * L);
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 2; ++c)
      if (blocks_[2 * r + c]) m.block(r * L, c * L, L, L) = blocks_[2 * r + c]->matrix();
  return m;
}

ParaOperator opbw_assemble(const Symbol& a, const CutoffSpec& cut) {
  const TorusGrid& g = a.grid();
  if (const auto* w = a.weight()) return ParaOperator(g, assemble_diagonal(g, *w), a.order(), a.id());
  if (const auto* p = a.poly())
    return ParaOperator(g, assemble_polynomial(g, *p, cut), a.order(), a.id());
  const std::size_t L = g.lattice_size();
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(L, L);
  assemble_generic(g, cut, 1, [&](const Xi& xi) { return std::vector<Samples>{a.eval(xi)}; },
                   {&m});
  return ParaOperator(g, std::move(m), a.order(), a.id());
}

DoubledOperator opbw_assemble(const MatrixSymbol& A, const CutoffSpec& cut) {
  const TorusGrid& g = A.grid();
  std::array<std::optional<ParaOperator>, 4> blocks;
  if (const auto* e = A.entries()) {
    for (int k = 0; k < 4; ++k)
      if ((*e)[k].valid()) blocks[k] = opbw_assemble((*e)[k], cut);
    return DoubledOperator(g, std::move(blocks), A.id());
  }
  const std::size_t L = g.lattice_size();
  std::array<Eigen::MatrixXcd, 4> m;
  for (auto& x : m) x = Eigen::MatrixXcd::Zero(L, L);
  assemble_generic(
      g, cut, 4,
      [&](const Xi& xi) {
        MatrixSamples s = A.eval(xi);
        return std::vector<Samples>(s.begin(), s.end());
      },
      {&m[0], &m[1], &m[2], &m[3]});
  for (int k = 0; k < 4; ++k)
    blocks[k] = ParaOperator(g, std::move(m[k]), A.order(), A.id() + "[" + std::to_string(k) + "]");
  return DoubledOperator(g, std::move(blocks), A.id());
}

std::vector<Eigen::MatrixXcd> assemble_blocks(const TorusGrid& g, const CutoffSpec& cut, int count,
                                              const MultiEval& eval) {
  const std::size_t L = g.lattice_size();
  std::vector<Eigen::MatrixXcd> m(count, Eigen::MatrixXcd::Zero(L, L));
  std::vector<Eigen::MatrixXcd*> out;
  for (auto& x : m) out.push_back(&x);
  assemble_generic(g, cut, count, eval, out);
  return m;
}

SpectralField opbw_apply(const Symbol& a, const SpectralField& u, const CutoffSpec& cut) {
  if (a.grid() != u.grid()) throw std::invalid_argument("opbw_apply: grid mismatch");
  return opbw_assemble(a, cut).apply(u);
}

DoubledField opbw_apply(const MatrixSymbol& A, const DoubledField& U, const CutoffSpec& cut) {
  if (A.grid() != U.grid()) throw std::invalid_argument("opbw_apply: grid mismatch");
  return opbw_assemble(A, cut).apply(U);
}

std::size_t band_pair_count(const TorusGrid& g, const CutoffSpec& cut) {
  std::size_t n = 0;
  for_midpoints(g, [&](const Index& sigma) {
    for_band_pairs(g, cut, sigma, [&](const Index&, const Index&, const Index&, double) { ++n; });
  });
  return n;
}

SpectralField paraproduct_remainder(const SpectralField& f, const SpectralField& g,
                                    const CutoffSpec& cut) {
  const TorusGrid& grid = f.grid();
  if (g.grid() != grid) throw std::invalid_argument("paraproduct_remainder: grid mismatch");
  if (grid.points() < 4 * grid.freq_cut() + 2)
    throw std::invalid_argument("paraproduct_remainder: insufficient dealiasing margin");
  const CVec pf = to_physical(f), pg = to_physical(g);
  CVec prod(pf.size());
  for (std::size_t i = 0; i < prod.size(); ++i) prod[i] = pf[i] * pg[i];
  SpectralField r = from_physical(grid, prod);
  r -= opbw_assemble(Symbol::of_x(grid, "f", pf), cut).apply(g);
  r -= opbw_assemble(Symbol::of_x(grid, "g", pg), cut).apply(f);
  return r;
}

SpectralField CompositionRemainder::apply(const SpectralField& u) const {
  return left.apply(right.apply(u)) - composed.apply(u);
}

Eigen::MatrixXcd CompositionRemainder::matrix() const {
  return left.matrix() * right.matrix() - composed.matrix();
}

CompositionRemainder composition_remainder(const Symbol& a, const Symbol& b, double rho,
                                           const CutoffSpec& cut) {
  Symbol ab = sharp_compose(a, b, rho);
  return CompositionRemainder{opbw_assemble(a, cut), opbw_assemble(b, cut), opbw_assemble(ab, cut)};
}

// ---------------------------------------------------------------------------

SlopeFit fit_slope(const std::vector<int>& ns, const std::vector<double>& values,
                   double reference_scale) {
  if (ns.size() != values.size() || ns.size() < 2)
    throw std::invalid_argument("fit_slope: need at least two matching samples");
  SlopeFit fit;
  fit.ns = ns;
  fit.values = values;
  const double floor = 1e-12 * reference_scale;
  fit.vanishing = true;
  for (double v : values)
    if (v > floor) fit.vanishing = false;
  const double n = double(ns.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < ns.size(); ++i) {
    const double x = std::log(double(ns[i]));
    const double y = std::log(std::max(values[i], std::numeric_limits<double>::min()));
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  fit.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  fit.intercept = (sy - fit.slope * sx) / n;
  return fit;
}

std::vector<int> sweep_frequencies(int N) {
  std::vector<int> ns;
  for (int n = 4; n <= N / 2; n *= 2) ns.push_back(n);
  return ns;
}

SpectralField probe_mode(const TorusGrid& g, int n) {
  Index j{0, 0, 0};
  j[0] = n;
  return SpectralField::mode(g, j);
}

DoubledField probe_doubled(const TorusGrid& g, int n) {
  return DoubledField::from_plus(probe_mode(g, n));
}

SlopeFit frequency_growth(const FieldMap& map, const TorusGrid& g) {
  const auto ns = sweep_frequencies(g.freq_cut());
  std::vector<double> v;
  for (int n : ns) v.push_back(sobolev_norm(map(probe_mode(g, n)), 0.0));
  return fit_slope(ns, v);
}

SlopeFit frequency_growth(const LinearMap& map, const TorusGrid& g) {
  const auto ns = sweep_frequencies(g.freq_cut());
  std::vector<double> v;
  for (int n : ns) v.push_back(sobolev_norm(map(probe_doubled(g, n)), 0.0));
  return fit_slope(ns, v);
}

void write_operator_csv(std::ostream& os, const ParaOperator& op, const CutoffSpec& cut,
                        const std::map<std::string, std::string>& meta) {
  const TorusGrid& g = op.grid();
  const int d = g.dim();
  os << "# d=" << d << "\n# M=" << g.points() << "\n# N=" << g.freq_cut() << "\n";
  os << "# order=" << op.order() << "\n# symbol=" << op.id() << "\n# cutoff_eps=" << cut.eps << "\n";
  for (const auto& [k, v] : meta) os << "# " << k << "=" << v << "\n";
  for (int i = 0; i < d; ++i) os << "j" << i + 1 << ",";
  for (int i = 0; i < d; ++i) os << "k" << i + 1 << ",";
  os << "re,im\n";
  os.precision(17);
  const auto& m = op.matrix();
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (m(r, c) == cplx(0.0)) continue;
      const Index j = g.lattice_point(r), k = g.lattice_point(c);
      for (int i = 0; i < d; ++i) os << j[i] << ",";
      for (int i = 0; i < d; ++i) os << k[i] << ",";
      os << m(r, c).real() << "," << m(r, c).imag() << "\n";
    }
}

}  // namespace qnls

#include "qnls/fourier.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <mutex>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace qnls {

namespace {

std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

int wrap(int k, int M) {
  int r = k % M;
  return r < 0 ? r + M : r;
}

}  // namespace

double smooth_step(double t) {
  if (t <= 0.0) return 0.0;
  if (t >= 1.0) return 1.0;
  const double a = std::exp(-1.0 / t);
  const double b = std::exp(-1.0 / (1.0 - t));
  return a / (a + b);
}

double plateau_cutoff(double t, double lo, double hi) {
  if (t <= lo) return 1.0;
  if (t >= hi) return 0.0;
  return 1.0 - smooth_step((t - lo) / (hi - lo));
}

double index_norm_sq(const Index& j, int d) {
  double s = 0.0;
  for (int i = 0; i < d; ++i) s += double(j[i]) * j[i];
  return s;
}

double japanese(const Index& j, int d) { return std::sqrt(1.0 + index_norm_sq(j, d)); }

double xi_norm_sq(const Xi& xi, int d) {
  double s = 0.0;
  for (int i = 0; i < d; ++i) s += xi[i] * xi[i];
  return s;
}

// ---------------------------------------------------------------------------
// TorusGrid

struct TorusGrid::Plans {
  fftw_plan fwd = nullptr;
  fftw_plan bwd = nullptr;
  ~Plans() {
    std::lock_guard<std::mutex> lock(planner_mutex());
    if (fwd) fftw_destroy_plan(fwd);
    if (bwd) fftw_destroy_plan(bwd);
  }
};

TorusGrid::TorusGrid(int d, int N, int M) : d_(d), N_(N), M_(M) {
  if (d < 1 || d > kMaxDim) throw std::invalid_argument("TorusGrid: dimension must be 1, 2 or 3");
  if (N < 1) throw std::invalid_argument("TorusGrid: freq_cut must be positive");
  if (M < 4 * N + 2) throw std::invalid_argument("TorusGrid: need M >= 4N+2");
  lattice_size_ = 1;
  grid_size_ = 1;
  for (int i = 0; i < d; ++i) {
    lattice_size_ *= std::size_t(2 * N + 1);
    grid_size_ *= std::size_t(M);
  }
  plans_ = std::make_shared<Plans>();
  std::vector<int> dims(d, M);
  CVec a(grid_size_), b(grid_size_);
  auto* pa = reinterpret_cast<fftw_complex*>(a.data());
  auto* pb = reinterpret_cast<fftw_complex*>(b.data());
  std::lock_guard<std::mutex> lock(planner_mutex());
  plans_->fwd = fftw_plan_dft(d, dims.data(), pa, pb, FFTW_FORWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
  plans_->bwd = fftw_plan_dft(d, dims.data(), pa, pb, FFTW_BACKWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
}

Index TorusGrid::lattice_point(std::size_t flat) const {
  Index j{0, 0, 0};
  const std::size_t w = std::size_t(2 * N_ + 1);
  for (int i = d_ - 1; i >= 0; --i) {
    j[i] = int(flat % w) - N_;
    flat /= w;
  }
  return j;
}

std::size_t TorusGrid::lattice_flat(const Index& j) const {
  std::size_t flat = 0;
  const std::size_t w = std::size_t(2 * N_ + 1);
  for (int i = 0; i < d_; ++i) flat = flat * w + std::size_t(j[i] + N_);
  return flat;
}

bool TorusGrid::in_lattice(const Index& j) const {
  for (int i = 0; i < d_; ++i)
    if (j[i] < -N_ || j[i] > N_) return false;
  return true;
}

std::size_t TorusGrid::slot(const Index& k) const {
  std::size_t flat = 0;
  for (int i = 0; i < d_; ++i) flat = flat * std::size_t(M_) + std::size_t(wrap(k[i], M_));
  return flat;
}

Index TorusGrid::slot_frequency(std::size_t s) const {
  Index k{0, 0, 0};
  for (int i = d_ - 1; i >= 0; --i) {
    int r = int(s % std::size_t(M_));
    s /= std::size_t(M_);
    k[i] = (2 * r > M_) ? r - M_ : r;
  }
  return k;
}

Index TorusGrid::node(std::size_t flat) const {
  Index n{0, 0, 0};
  for (int i = d_ - 1; i >= 0; --i) {
    n[i] = int(flat % std::size_t(M_));
    flat /= std::size_t(M_);
  }
  return n;
}

void TorusGrid::forward(const cplx* in, cplx* out) const {
  if (in == out) {
    CVec tmp(in, in + grid_size_);
    fftw_execute_dft(plans_->fwd, reinterpret_cast<fftw_complex*>(tmp.data()),
                     reinterpret_cast<fftw_complex*>(out));
    return;
  }
  fftw_execute_dft(plans_->fwd, reinterpret_cast<fftw_complex*>(const_cast<cplx*>(in)),
                   reinterpret_cast<fftw_complex*>(out));
}

void TorusGrid::backward(const cplx* in, cplx* out) const {
  if (in == out) {
    CVec tmp(in, in + grid_size_);
    fftw_execute_dft(plans_->bwd, reinterpret_cast<fftw_complex*>(tmp.data()),
                     reinterpret_cast<fftw_complex*>(out));
    return;
  }
  fftw_execute_dft(plans_->bwd, reinterpret_cast<fftw_complex*>(const_cast<cplx*>(in)),
                   reinterpret_cast<fftw_complex*>(out));
}

double TorusGrid::torus_scale() const { return std::pow(2.0 * kPi, 0.5 * d_); }

double TorusGrid::cell_volume() const { return std::pow(2.0 * kPi / M_, d_); }

// ---------------------------------------------------------------------------
// SpectralField / DoubledField

SpectralField::SpectralField(const TorusGrid& g, CVec c) : grid_(g), c_(std::move(c)) {
  if (c_.size() != g.lattice_size()) throw std::invalid_argument("SpectralField: size mismatch");
}

SpectralField SpectralField::mode(const TorusGrid& g, const Index& j, cplx amplitude) {
  if (!g.in_lattice(j)) throw std::out_of_range("SpectralField::mode: outside lattice");
  SpectralField u(g);
  u.c_[g.lattice_flat(j)] = amplitude;
  return u;
}

cplx SpectralField::at(const Index& j) const {
  if (!grid_.in_lattice(j)) return 0.0;
  return c_[grid_.lattice_flat(j)];
}

SpectralField SpectralField::conjugate() const {
  SpectralField r(grid_);
  const int d = grid_.dim();
  for (std::size_t i = 0; i < c_.size(); ++i) {
    Index j = grid_.lattice_point(i);
    Index mj{0, 0, 0};
    for (int a = 0; a < d; ++a) mj[a] = -j[a];
    r.c_[i] = std::conj(c_[grid_.lattice_flat(mj)]);
  }
  return r;
}

static void require_same(const TorusGrid& a, const TorusGrid& b) {
  if (a != b) throw std::invalid_argument("grid mismatch");
}

SpectralField& SpectralField::operator+=(const SpectralField& o) {
  require_same(grid_, o.grid_);
  for (std::size_t i = 0; i < c_.size(); ++i) c_[i] += o.c_[i];
  return *this;
}

SpectralField& SpectralField::operator-=(const SpectralField& o) {
  require_same(grid_, o.grid_);
  for (std::size_t i = 0; i < c_.size(); ++i) c_[i] -= o.c_[i];
  return *this;
}

SpectralField& SpectralField::operator*=(cplx a) {
  for (auto& v : c_) v *= a;
  return *this;
}

SpectralField operator+(SpectralField a, const SpectralField& b) { return a += b; }
SpectralField operator-(SpectralField a, const SpectralField& b) { return a -= b; }
SpectralField operator*(cplx s, SpectralField a) { return a *= s; }

double DoubledField::conjugacy_defect() const {
  SpectralField c = plus.conjugate();
  double m = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) m = std::max(m, std::abs(c[i] - minus[i]));
  return m;
}

DoubledField& DoubledField::operator+=(const DoubledField& o) {
  plus += o.plus;
  minus += o.minus;
  return *this;
}

DoubledField& DoubledField::operator-=(const DoubledField& o) {
  plus -= o.plus;
  minus -= o.minus;
  return *this;
}

DoubledField& DoubledField::operator*=(cplx a) {
  plus *= a;
  minus *= a;
  return *this;
}

DoubledField operator+(DoubledField a, const DoubledField& b) { return a += b; }
DoubledField operator-(DoubledField a, const DoubledField& b) { return a -= b; }
DoubledField operator*(cplx s, DoubledField a) { return a *= s; }

// ---------------------------------------------------------------------------
// transforms

CVec to_physical(const SpectralField& u) {
  const TorusGrid& g = u.grid();
  CVec buf(g.grid_size(), 0.0);
  const double scale = 1.0 / g.torus_scale();
  for (std::size_t i = 0; i < u.size(); ++i) buf[g.slot(g.lattice_point(i))] = u[i] * scale;
  CVec out(g.grid_size());
  g.backward(buf.data(), out.data());
  return out;
}

SpectralField from_physical(const TorusGrid& g, const CVec& values) {
  if (values.size() != g.grid_size()) throw std::invalid_argument("from_physical: size mismatch");
  CVec buf(g.grid_size());
  g.forward(values.data(), buf.data());
  const double scale = g.torus_scale() / double(g.grid_size());
  SpectralField u(g);
  for (std::size_t i = 0; i < u.size(); ++i) u[i] = buf[g.slot(g.lattice_point(i))] * scale;
  return u;
}

CVec mean_coefficients(const TorusGrid& g, const CVec& values) {
  CVec out(g.grid_size());
  g.forward(values.data(), out.data());
  const double inv = 1.0 / double(g.grid_size());
  for (auto& v : out) v *= inv;
  return out;
}

CVec spectral_derivative(const TorusGrid& g, const CVec& values, int axis) {
  CVec c = mean_coefficients(g, values);
  const int M = g.points();
  for (std::size_t s = 0; s < c.size(); ++s) {
    Index k = g.slot_frequency(s);
    int ka = k[axis];
    if (M % 2 == 0 && 2 * ka == M) ka = 0;
    c[s] *= cplx(0.0, double(ka));
  }
  CVec out(g.grid_size());
  g.backward(c.data(), out.data());
  return out;
}

double physical_sobolev_norm(const TorusGrid& g, const CVec& values, double s) {
  CVec c = mean_coefficients(g, values);
  const double vol = std::pow(2.0 * kPi, g.dim());
  double acc = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    Index k = g.slot_frequency(i);
    acc += std::pow(1.0 + index_norm_sq(k, g.dim()), s) * std::norm(c[i]);
  }
  return std::sqrt(acc * vol);
}

// ---------------------------------------------------------------------------
// norms and inner products

double sobolev_norm_sq(const SpectralField& u, double s) {
  const TorusGrid& g = u.grid();
  double acc = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double w = std::pow(1.0 + index_norm_sq(g.lattice_point(i), g.dim()), s);
    acc += w * std::norm(u[i]);
  }
  return acc;
}

double sobolev_norm(const SpectralField& u, double s) { return std::sqrt(sobolev_norm_sq(u, s)); }

double sobolev_norm(const DoubledField& U, double s) {
  return sobolev_norm(U.plus, s) + sobolev_norm(U.minus, s);
}

cplx inner_l2(const SpectralField& u, const SpectralField& v) {
  require_same(u.grid(), v.grid());
  cplx acc = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) acc += u[i] * std::conj(v[i]);
  return acc;
}

double inner_doubled(const DoubledField& Z, const DoubledField& W, bool verify) {
  if (verify) {
    const double tol = 1e-10;
    const double sz = std::max(1.0, sobolev_norm(Z.plus, 0.0));
    const double sw = std::max(1.0, sobolev_norm(W.plus, 0.0));
    if (Z.conjugacy_defect() > tol * sz || W.conjugacy_defect() > tol * sw)
      throw std::domain_error("inner_doubled: conjugacy violation");
  }
  return inner_l2(Z.plus, W.plus).real();
}

SpectralField multiplier_apply(const LatticeWeight& w, const SpectralField& u) {
  SpectralField r(u.grid());
  const TorusGrid& g = u.grid();
  for (std::size_t i = 0; i < u.size(); ++i) r[i] = w(g.lattice_point(i)) * u[i];
  return r;
}

DoubledField multiplier_apply(const LatticeWeight& w, const DoubledField& U) {
  return {multiplier_apply(w, U.plus), multiplier_apply(w, U.minus)};
}

SpectralField viscous_semigroup(double t, double eps, const SpectralField& u) {
  if (t < 0.0 || eps < 0.0) throw std::invalid_argument("viscous_semigroup: negative t or eps");
  const int d = u.grid().dim();
  return multiplier_apply(
      [&](const Index& j) {
        const double n2 = index_norm_sq(j, d);
        return cplx(std::exp(-eps * t * n2 * n2), 0.0);
      },
      u);
}

DoubledField viscous_semigroup(double t, double eps, const DoubledField& U) {
  return {viscous_semigroup(t, eps, U.plus), viscous_semigroup(t, eps, U.minus)};
}

DoubledField smooth_data(double eps, const DoubledField& U) {
  if (eps <= 0.0) return U;
  const int d = U.grid().dim();
  const double scale = std::pow(eps, 0.125);
  return multiplier_apply(
      [&](const Index& j) {
        return cplx(plateau_cutoff(scale * std::sqrt(index_norm_sq(j, d)), 1.0, 2.0), 0.0);
      },
      U);
}

SpectralField random_field(const TorusGrid& g, std::uint64_t seed,
                           const std::function<double(const Index&)>& envelope) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  SpectralField u(g);
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double re = gauss(rng);
    const double im = gauss(rng);
    u[i] = envelope(g.lattice_point(i)) * cplx(re, im) / std::sqrt(2.0);
  }
  return u;
}

SpectralField smooth_random_field(const TorusGrid& g, std::uint64_t seed, double amplitude,
                                  double rate) {
  const int d = g.dim();
  return random_field(g, seed, [&](const Index& j) {
    return amplitude * std::exp(-rate * std::sqrt(index_norm_sq(j, d)));
  });
}

double relative_l2(const SpectralField& a, const SpectralField& ref) {
  const double den = sobolev_norm(ref, 0.0);
  const double num = sobolev_norm(a - ref, 0.0);
  return den > 0.0 ? num / den : num;
}

double relative_l2(const DoubledField& a, const DoubledField& ref) {
  const double den = sobolev_norm(ref, 0.0);
  const double num = sobolev_norm(a - ref, 0.0);
  return den > 0.0 ? num / den : num;
}

// ---------------------------------------------------------------------------
// columnar snapshot format

void write_field_csv(std::ostream& os, const SpectralField& u,
                     const std::map<std::string, std::string>& meta) {
  const TorusGrid& g = u.grid();
  os << "# d=" << g.dim() << "\n# M=" << g.points() << "\n# N=" << g.freq_cut() << "\n";
  for (const auto& [k, v] : meta) os << "# " << k << "=" << v << "\n";
  for (int i = 0; i < g.dim(); ++i) os << "j" << (i + 1) << ",";
  os << "re,im\n";
  os << std::setprecision(17);
  for (std::size_t i = 0; i < u.size(); ++i) {
    Index j = g.lattice_point(i);
    for (int a = 0; a < g.dim(); ++a) os << j[a] << ",";
    os << u[i].real() << "," << u[i].imag() << "\n";
  }
}

SpectralField read_field_csv(std::istream& is) {
  int d = -1, M = -1, N = -1;
  std::string line;
  std::streampos data_start;
  while (std::getline(is, line)) {
    if (line.rfind("#", 0) == 0) {
      auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      std::string key = line.substr(2, eq - 2);
      std::string val = line.substr(eq + 1);
      if (key == "d") d = std::stoi(val);
      if (key == "M") M = std::stoi(val);
      if (key == "N") N = std::stoi(val);
      continue;
    }
    break;  // header row
  }
  if (d < 0 || M < 0 || N < 0) throw std::runtime_error("read_field_csv: missing grid metadata");
  TorusGrid g(d, N, M);
  SpectralField u(g);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string tok;
    Index j{0, 0, 0};
    for (int a = 0; a < d; ++a) {
      std::getline(ss, tok, ',');
      j[a] = std::stoi(tok);
    }
    std::getline(ss, tok, ',');
    const double re = std::stod(tok);
    std::getline(ss, tok, ',');
    const double im = std::stod(tok);
    u[g.lattice_flat(j)] = cplx(re, im);
  }
  return u;
}

}  // namespace qnls

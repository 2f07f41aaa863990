#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace qnls {

using cplx = std::complex<double>;
using CVec = std::vector<cplx>;

inline constexpr int kMaxDim = 3;
using Index = std::array<int, kMaxDim>;
using Xi = std::array<double, kMaxDim>;

inline constexpr double kPi = 3.14159265358979323846;

// C-infinity monotone bridge from 0 (t <= 0) to 1 (t >= 1), built on exp(-1/t).
double smooth_step(double t);
// 1 on [0, lo], 0 on [hi, inf), smooth nonincreasing in between.
double plateau_cutoff(double t, double lo, double hi);

double index_norm_sq(const Index& j, int d);
double japanese(const Index& j, int d);  // sqrt(1 + |j|^2)
double xi_norm_sq(const Xi& xi, int d);

// Periodic grid on (R / 2piZ)^d with M nodes per axis and the frequency
// lattice |j|_inf <= N. Arrays are row-major with the last axis fastest.
class TorusGrid {
 public:
  TorusGrid() = default;
  TorusGrid(int d, int N, int M);
  static TorusGrid with_min_points(int d, int N) { return TorusGrid(d, N, 4 * N + 2); }

  int dim() const { return d_; }
  int freq_cut() const { return N_; }
  int points() const { return M_; }
  std::size_t lattice_size() const { return lattice_size_; }
  std::size_t grid_size() const { return grid_size_; }

  Index lattice_point(std::size_t flat) const;
  std::size_t lattice_flat(const Index& j) const;
  bool in_lattice(const Index& j) const;

  // Position of frequency k (taken mod M) in a raw FFT array.
  std::size_t slot(const Index& k) const;
  // Signed frequency stored at an FFT slot, components in (-M/2, M/2].
  Index slot_frequency(std::size_t slot) const;
  // Integer node coordinates of a physical grid point.
  Index node(std::size_t flat) const;
  double node_coord(int i) const { return 2.0 * kPi * i / M_; }

  // Raw unnormalized transforms: forward sums f(x) e^{-ikx}, backward sums c_k e^{ikx}.
  void forward(const cplx* in, cplx* out) const;
  void backward(const cplx* in, cplx* out) const;

  // (2pi)^{d/2}
  double torus_scale() const;
  // Physical-space quadrature weight (2pi/M)^d.
  double cell_volume() const;

  bool operator==(const TorusGrid& o) const { return d_ == o.d_ && N_ == o.N_ && M_ == o.M_; }
  bool operator!=(const TorusGrid& o) const { return !(*this == o); }

 private:
  struct Plans;
  int d_ = 0, N_ = 0, M_ = 0;
  std::size_t lattice_size_ = 0, grid_size_ = 0;
  std::shared_ptr<Plans> plans_;
};

// Fourier coefficients u_hat(j), j in the lattice, with
// u(x) = (2pi)^{-d/2} sum_j u_hat(j) e^{ijx}.
class SpectralField {
 public:
  SpectralField() = default;
  explicit SpectralField(const TorusGrid& g) : grid_(g), c_(g.lattice_size()) {}
  SpectralField(const TorusGrid& g, CVec c);

  static SpectralField mode(const TorusGrid& g, const Index& j, cplx amplitude = 1.0);

  const TorusGrid& grid() const { return grid_; }
  const CVec& coeffs() const { return c_; }
  CVec& coeffs() { return c_; }
  std::size_t size() const { return c_.size(); }
  cplx& operator[](std::size_t i) { return c_[i]; }
  const cplx& operator[](std::size_t i) const { return c_[i]; }
  cplx at(const Index& j) const;

  // Coefficients of the pointwise conjugate: conj(u_hat(-j)).
  SpectralField conjugate() const;

  SpectralField& operator+=(const SpectralField& o);
  SpectralField& operator-=(const SpectralField& o);
  SpectralField& operator*=(cplx a);

 private:
  TorusGrid grid_;
  CVec c_;
};

SpectralField operator+(SpectralField a, const SpectralField& b);
SpectralField operator-(SpectralField a, const SpectralField& b);
SpectralField operator*(cplx s, SpectralField a);

// U = (u, conj u); plus and minus are stored independently so conjugacy can be audited.
struct DoubledField {
  SpectralField plus;
  SpectralField minus;

  static DoubledField from_plus(const SpectralField& u) { return {u, u.conjugate()}; }
  static DoubledField zero(const TorusGrid& g) { return {SpectralField(g), SpectralField(g)}; }
  const TorusGrid& grid() const { return plus.grid(); }
  // max_j |minus(j) - conj(plus(-j))|
  double conjugacy_defect() const;

  DoubledField& operator+=(const DoubledField& o);
  DoubledField& operator-=(const DoubledField& o);
  DoubledField& operator*=(cplx a);
};

DoubledField operator+(DoubledField a, const DoubledField& b);
DoubledField operator-(DoubledField a, const DoubledField& b);
DoubledField operator*(cplx s, DoubledField a);

// Physical values at the M^d nodes.
CVec to_physical(const SpectralField& u);
// Transform physical values and truncate to the lattice.
SpectralField from_physical(const TorusGrid& g, const CVec& values);
// Average coefficients a(p) = M^{-d} sum_x a(x) e^{-ipx} in raw FFT layout, so a(x) = sum_p a(p) e^{ipx}.
CVec mean_coefficients(const TorusGrid& g, const CVec& values);
// Spectral derivative d/dx_axis of physical values (full M-point spectrum, Nyquist dropped).
CVec spectral_derivative(const TorusGrid& g, const CVec& values, int axis);
// H^s norm of physical values using the full M-point spectrum.
double physical_sobolev_norm(const TorusGrid& g, const CVec& values, double s);

double sobolev_norm(const SpectralField& u, double s);
double sobolev_norm_sq(const SpectralField& u, double s);
// Sum of component norms.
double sobolev_norm(const DoubledField& U, double s);

cplx inner_l2(const SpectralField& u, const SpectralField& v);
// Re (z, w)_{L^2}; with verify set, throws when either argument breaks conjugacy.
double inner_doubled(const DoubledField& Z, const DoubledField& W, bool verify = false);

using LatticeWeight = std::function<cplx(const Index&)>;
SpectralField multiplier_apply(const LatticeWeight& w, const SpectralField& u);
DoubledField multiplier_apply(const LatticeWeight& w, const DoubledField& U);

// Multiplies u_hat(j) by exp(-eps t |j|^4).
SpectralField viscous_semigroup(double t, double eps, const SpectralField& u);
DoubledField viscous_semigroup(double t, double eps, const DoubledField& U);

// chi(eps^{1/8}|D|) with chi = 1 on [0,1], 0 beyond 2.
DoubledField smooth_data(double eps, const DoubledField& U);

// Gaussian coefficients times envelope(j); deterministic for a fixed seed.
SpectralField random_field(const TorusGrid& g, std::uint64_t seed,
                           const std::function<double(const Index&)>& envelope);
// Random field with coefficients ~ amplitude * exp(-rate |j|).
SpectralField smooth_random_field(const TorusGrid& g, std::uint64_t seed, double amplitude,
                                  double rate);

double relative_l2(const SpectralField& a, const SpectralField& ref);
double relative_l2(const DoubledField& a, const DoubledField& ref);

// Columnar snapshot: comment header with metadata, then rows j_1..j_d,re,im.
void write_field_csv(std::ostream& os, const SpectralField& u,
                     const std::map<std::string, std::string>& meta = {});
SpectralField read_field_csv(std::istream& is);

}  // namespace qnls

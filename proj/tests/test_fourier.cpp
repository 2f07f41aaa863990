#include <doctest.h>

#include <sstream>

#include "oracles/oracles.hpp"
#include "qnls/fourier.hpp"

using namespace qnls;

TEST_CASE("cutoff profiles") {
  CHECK(smooth_step(-0.5) == 0.0);
  CHECK(smooth_step(0.0) == 0.0);
  CHECK(smooth_step(1.0) == 1.0);
  CHECK(smooth_step(0.5) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(plateau_cutoff(1.1, 1.1, 1.9) == 1.0);
  CHECK(plateau_cutoff(1.9, 1.1, 1.9) == 0.0);
  double prev = 1.0;
  for (double t = 1.1; t <= 1.9; t += 0.01) {
    const double v = plateau_cutoff(t, 1.1, 1.9);
    CHECK(v <= prev + 1e-15);
    prev = v;
  }
}

TEST_CASE("grid bookkeeping") {
  const TorusGrid g(2, 4, 18);
  CHECK(g.lattice_size() == 81);
  CHECK(g.grid_size() == 324);
  for (std::size_t f = 0; f < g.lattice_size(); ++f) CHECK(g.lattice_flat(g.lattice_point(f)) == f);
  CHECK_FALSE(g.in_lattice(Index{5, 0, 0}));
  CHECK(g.torus_scale() == doctest::Approx(2.0 * kPi));
  CHECK_THROWS(TorusGrid(2, 4, 8));
}

TEST_CASE("physical values match the direct trigonometric sum") {
  for (int d : {1, 2}) {
    const TorusGrid g = TorusGrid::with_min_points(d, 4);
    const SpectralField u = smooth_random_field(g, 5, 1.0, 0.3);
    const CVec phys = to_physical(u);
    double err = 0.0;
    for (std::size_t f = 0; f < g.grid_size(); f += 7)
      err = std::max(err, std::abs(phys[f] - oracle::eval_point(u, oracle::node_point(g, f))));
    CHECK(err < 1e-12);
    const SpectralField back = from_physical(g, phys);
    CHECK(relative_l2(back, u) < 1e-13);
  }
}

TEST_CASE("Parseval and Sobolev norms") {
  const TorusGrid g = TorusGrid::with_min_points(1, 16);
  const SpectralField u = smooth_random_field(g, 9, 2.0, 0.2);
  const CVec phys = to_physical(u);
  double quad = 0.0;
  for (cplx v : phys) quad += std::norm(v) * g.cell_volume();
  CHECK(quad == doctest::Approx(sobolev_norm_sq(u, 0.0)).epsilon(1e-12));
  for (double s : {-2.0, 0.0, 1.5, 4.0})
    CHECK(sobolev_norm_sq(u, s) == doctest::Approx(oracle::sobolev_sq(u, s)).epsilon(1e-12));
  CHECK(physical_sobolev_norm(g, phys, 1.5) == doctest::Approx(sobolev_norm(u, 1.5)).epsilon(1e-10));
}

TEST_CASE("conjugation and the doubled pairing") {
  const TorusGrid g = TorusGrid::with_min_points(2, 4);
  const SpectralField z = smooth_random_field(g, 1, 1.0, 0.5);
  const SpectralField w = smooth_random_field(g, 2, 1.0, 0.5);
  const CVec zc = to_physical(z.conjugate()), zp = to_physical(z);
  for (std::size_t f = 0; f < zp.size(); ++f) CHECK(std::abs(zc[f] - std::conj(zp[f])) < 1e-13);

  const DoubledField Z = DoubledField::from_plus(z), W = DoubledField::from_plus(w);
  CHECK(Z.conjugacy_defect() == 0.0);
  // Re of the L^2 pairing by quadrature
  const CVec wp = to_physical(w);
  cplx q = 0.0;
  for (std::size_t f = 0; f < zp.size(); ++f) q += zp[f] * std::conj(wp[f]) * g.cell_volume();
  CHECK(inner_doubled(Z, W, true) == doctest::Approx(q.real()).epsilon(1e-12));

  DoubledField broken = Z;
  broken.minus[0] += 1.0;
  CHECK_THROWS(inner_doubled(broken, W, true));
}

TEST_CASE("viscous semigroup and data smoothing") {
  const TorusGrid g = TorusGrid::with_min_points(1, 16);
  const SpectralField u = smooth_random_field(g, 4, 1.0, 0.1);
  const SpectralField v = viscous_semigroup(0.3, 1e-3, u);
  for (std::size_t f = 0; f < g.lattice_size(); ++f) {
    const double n = g.lattice_point(f)[0];
    CHECK(std::abs(v[f] - u[f] * std::exp(-1e-3 * 0.3 * n * n * n * n)) < 1e-15);
  }
  for (double s : {0.0, 2.0}) CHECK(sobolev_norm(v, s) <= sobolev_norm(u, s));

  // chi(eps^{1/8} |j|) keeps |j| <= eps^{-1/8} and removes |j| >= 2 eps^{-1/8}
  const DoubledField S = smooth_data(1e-8, DoubledField::from_plus(u));
  for (std::size_t f = 0; f < g.lattice_size(); ++f) {
    const int n = std::abs(g.lattice_point(f)[0]);
    if (n <= 10) CHECK(S.plus[f] == u[f]);
    if (n >= 20) CHECK(S.plus[f] == 0.0);
  }
}

TEST_CASE("random fields are deterministic and conjugacy-free") {
  const TorusGrid g = TorusGrid::with_min_points(1, 8);
  const SpectralField a = smooth_random_field(g, 42, 1.0, 0.5);
  const SpectralField b = smooth_random_field(g, 42, 1.0, 0.5);
  const SpectralField c = smooth_random_field(g, 43, 1.0, 0.5);
  CHECK(relative_l2(a, b) == 0.0);
  CHECK(relative_l2(a, c) > 0.1);
}

TEST_CASE("field CSV round trip") {
  const TorusGrid g = TorusGrid::with_min_points(2, 3);
  const SpectralField u = smooth_random_field(g, 8, 1.0, 0.5);
  std::stringstream ss;
  write_field_csv(ss, u, {{"config_hash", "abc"}});
  CHECK(ss.str().find("# config_hash=abc") != std::string::npos);
  const SpectralField v = read_field_csv(ss);
  CHECK(v.grid() == g);
  CHECK(relative_l2(v, u) < 1e-15);
}

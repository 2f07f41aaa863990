#include <doctest.h>

#include "oracles/oracles.hpp"
#include "qnls/diagonalization.hpp"

using namespace qnls;

namespace {

struct Fixture {
  HamiltonianModel model;
  TorusGrid grid;
  DiagonalizationPack pack;
};

Fixture make(const HamiltonianModel& m, int N, double amp, double rate, std::uint64_t seed = 7) {
  const TorusGrid g(m.dim(), N, dealiasing_points(m, N));
  const DoubledField U = DoubledField::from_plus(smooth_random_field(g, seed, amp, rate));
  return {m, g, build_pack(m, U)};
}

const Xi kXi1{2.3, 0, 0};
const Xi kXi2{1.4, -0.9, 0};

}  // namespace

TEST_CASE("phi cutoff") {
  const PhiCutoff phi;
  CHECK(phi(Xi{0.2, 0, 0}, 1) == 0.0);
  CHECK(phi(Xi{0.25, 0, 0}, 1) == 0.0);
  CHECK(phi(Xi{0.5, 0, 0}, 1) == 1.0);
  CHECK(phi(Xi{-3.0, 0, 0}, 1) == 1.0);
  const double mid = phi(Xi{0.375, 0, 0}, 1);
  CHECK(mid > 0.0);
  CHECK(mid < 1.0);
  CHECK(phi(Xi{0.3, 0.2, 0}, 2) == phi(Xi{-0.3, -0.2, 0}, 2));
}

TEST_CASE("eigenvalues and eigenvectors diagonalize the principal part") {
  const Fixture f = make(oracle::quartic_d1(), 16, 0.4, 0.6);
  const DiagonalizationPack& p = f.pack;
  const CVec a = p.a2.eval(kXi1), b = p.b2.eval(kXi1), lam = p.lambda_xi2.eval(kXi1);
  // eigenvalues of E [[a2, b2], [conj b2, a2]] are +-sqrt(a2^2 - |b2|^2)
  for (std::size_t x = 0; x < a.size(); ++x)
    CHECK(std::abs(lam[x] - std::sqrt(a[x].real() * a[x].real() - std::norm(b[x]))) < 1e-12 * std::abs(lam[x]));

  const MatrixSamples P = principal_product_samples(p, kXi1);
  for (std::size_t x = 0; x < a.size(); ++x) {
    CHECK(std::abs(P[0][x] - lam[x]) < 1e-12 * std::abs(lam[x]));
    CHECK(std::abs(P[3][x] + lam[x]) < 1e-12 * std::abs(lam[x]));
    CHECK(std::abs(P[1][x]) + std::abs(P[2][x]) < 1e-12 * std::abs(lam[x]));
  }

  // S S^{-1} = 1 and det S = 1
  const MatrixSamples I = mat_mul(p.S.eval(kXi1), p.S_inv.eval(kXi1));
  const CVec s1 = p.s1.eval(kXi1), s2 = p.s2.eval(kXi1);
  for (std::size_t x = 0; x < a.size(); ++x) {
    CHECK(std::abs(I[0][x] - 1.0) < 1e-13);
    CHECK(std::abs(I[1][x]) < 1e-13);
    CHECK(std::abs(s1[x] * s1[x] - std::norm(s2[x]) - 1.0) < 1e-12);
  }
  CHECK(p.S.structure_defect(xi_sample_set(1, 16)) < 1e-13);
}

TEST_CASE("isotropic settings carry structural zeros") {
  const Fixture f = make(oracle::quartic_d1(), 8, 0.4, 0.6);
  CHECK(f.pack.isotropic);
  const MatrixSamples S = s_star_samples(f.pack, kXi1);
  for (int k = 0; k < 4; ++k) CHECK(oracle::max_abs(S[k]) == 0.0);

  SpecialForm sf;
  sf.h = {0.0, 1.0};
  const Fixture s = make(HamiltonianModel::special_form(2, sf), 4, 0.4, 0.6);
  CHECK(s.pack.isotropic);
  CHECK(oracle::max_abs(s.pack.b1_plus.eval(kXi2)) == 0.0);
  CHECK(oracle::max_abs(s.pack.c.eval(kXi2)) == 0.0);
  const MatrixSamples C = s.pack.C.eval(kXi2);
  for (int k = 0; k < 4; ++k) CHECK(oracle::max_abs(C[k]) == 0.0);
}

TEST_CASE("S* against brackets by finite differences") {
  const Fixture f = make(oracle::quartic_d2(), 8, 1.0, 1.0);
  const DiagonalizationPack& p = f.pack;
  REQUIRE_FALSE(p.isotropic);
  const Symbol s1 = p.s1, s2 = p.s2;
  const Symbol s2c = pointwise_map(s2, [](cplx z) { return std::conj(z); }, 0.0, Parity::Even, "s2c");
  const CVec b22 = oracle::bracket(s2, s2c, kXi2);
  const CVec b12 = oracle::bracket(s1, s2, kXi2);
  const CVec b1c = oracle::bracket(s1, s2c, kXi2);
  const CVec v1 = s1.eval(kXi2), v2 = s2.eval(kXi2);
  const MatrixSamples got = s_star_samples(p, kXi2);
  const cplx k = 1.0 / cplx(0.0, 2.0);
  double err = 0.0, scale = 0.0;
  for (std::size_t x = 0; x < v1.size(); ++x) {
    const cplx want[4] = {k * (b22[x] * v1[x] + 2.0 * b12[x] * std::conj(v2[x])),
                          k * (b22[x] * v2[x] + 2.0 * b12[x] * v1[x]),
                          k * (2.0 * b1c[x] * v1[x] - b22[x] * std::conj(v2[x])),
                          k * (2.0 * b1c[x] * v2[x] - b22[x] * v1[x])};
    for (int e = 0; e < 4; ++e) {
      err = std::max(err, std::abs(got[e][x] - want[e]));
      scale = std::max(scale, std::abs(want[e]));
    }
  }
  CHECK(scale > 1e-3);
  // the oracle differentiates nodal values of s1, s2 spectrally, which aliases at this M
  CHECK(err < 1e-5 * scale);
}

TEST_CASE("first-order corrector") {
  const Fixture f = make(oracle::quartic_d2(), 8, 1.0, 1.0);
  const DiagonalizationPack& p = f.pack;
  const Xi xi = kXi2;
  const MatrixSamples D = d1_samples(p, xi);
  const CVec a1p = p.a1_plus.eval(xi), b1p = p.b1_plus.eval(xi), lam = p.lambda_xi2.eval(xi);
  const CVec c = p.c.eval(xi);
  const double ph = PhiCutoff{}(xi, 2);
  for (std::size_t x = 0; x < lam.size(); ++x) {
    CHECK(std::abs(a1p[x] - D[0][x]) < 1e-12);
    CHECK(std::abs(b1p[x] - D[1][x]) < 1e-12);
    CHECK(std::abs(c[x] + ph * b1p[x] / lam[x]) < 1e-12 * (1.0 + std::abs(c[x])));
  }
  CHECK(oracle::max_abs(b1p) > 1e-4);
  const auto samples = xi_sample_set(2, 4);
  CHECK(p.C.structure_defect(samples) < 1e-10);
  // D1 carries the pattern of E times a reality-structured matrix
  for (const Xi& z : samples) {
    const Xi mz{-z[0], -z[1], 0};
    const MatrixSamples a = p.D1.eval(z), b = p.D1.eval(mz);
    for (std::size_t x = 0; x < a[0].size(); ++x) {
      CHECK(std::abs(a[3][x] + std::conj(b[0][x])) < 1e-10);
      CHECK(std::abs(a[2][x] + std::conj(b[1][x])) < 1e-10);
    }
  }
  // inside the low-frequency hole the corrector vanishes
  CHECK(oracle::max_abs(p.c.eval(Xi{0.1, 0.1, 0})) == 0.0);
}

TEST_CASE("ellipticity failure is raised with its location") {
  SpecialForm sf;
  sf.gradient_coefficient = 0.0;
  sf.h = {0.0, 1.0};
  const auto m = HamiltonianModel::special_form(1, sf);
  const TorusGrid g(1, 8, dealiasing_points(m, 8));
  const DoubledField U = DoubledField::from_plus(smooth_random_field(g, 1, 0.5, 0.6));
  CHECK_THROWS_AS(build_pack(m, U), EllipticityError);
}

TEST_CASE("parametrix and conjugation on a one-dimensional model") {
  const CutoffSpec cut;
  const Fixture f = make(oracle::quartic_d1(), 64, 0.5, 0.5, 3);
  const PackOperators ops = assemble_pack(f.pack, cut);
  const SlopeFit par = doubled_growth(parametrix_residual(ops, true), f.grid);
  CHECK((par.vanishing || par.slope <= -2.0 + 0.3));
  const SlopeFit undiag = offdiagonal_growth([&](const DoubledField& V) { return ops.EA.apply(V); }, f.grid);
  CHECK(undiag.slope == doctest::Approx(2.0).epsilon(0.15));
  const SlopeFit res = offdiagonal_growth(principal_residual(ops), f.grid);
  CHECK((res.vanishing || res.slope <= 0.3));

  // linear model: S is the identity and every residual vanishes
  const Fixture lin = make(oracle::laplacian_model(1), 16, 1.0, 1.0);
  const PackOperators lops = assemble_pack(lin.pack, cut);
  CHECK(doubled_growth(parametrix_residual(lops, true), lin.grid).vanishing);
  CHECK(offdiagonal_growth(principal_residual(lops), lin.grid).vanishing);
}

TEST_CASE("weights") {
  const Fixture f = make(oracle::quartic_d1(), 8, 0.4, 0.6);
  const CVec w = f.pack.weight_symbol(1.5).eval(kXi1), lam = f.pack.lambda_xi2.eval(kXi1);
  for (std::size_t x = 0; x < w.size(); ++x) CHECK(std::abs(w[x] - std::pow(lam[x].real(), 1.5)) < 1e-12 * std::abs(w[x]));
}

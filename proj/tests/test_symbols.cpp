#include <doctest.h>

#include "oracles/oracles.hpp"
#include "qnls/nls_model.hpp"
#include "qnls/symbols.hpp"

using namespace qnls;

namespace {

CVec smooth_values(const TorusGrid& g, std::uint64_t seed) { return to_physical(smooth_random_field(g, seed, 1.0, 0.6)); }

// f(x) xi_1^2 + g(x) xi_1
Symbol sample_symbol(const TorusGrid& g) {
  return Symbol::polynomial(g, 2.0, Parity::None, "sample",
                            {PolyTerm{{2, 0, 0}, smooth_values(g, 1)}, PolyTerm{{1, 0, 0}, smooth_values(g, 2)}});
}

}  // namespace

TEST_CASE("parity algebra") {
  CHECK(parity_product(Parity::Odd, Parity::Odd) == Parity::Even);
  CHECK(parity_product(Parity::Odd, Parity::Even) == Parity::Odd);
  CHECK(parity_sum(Parity::Even, Parity::Odd) == Parity::None);
  CHECK(parity_sum(Parity::Odd, Parity::Odd) == Parity::Odd);
}

TEST_CASE("polynomial symbols evaluate term by term") {
  const TorusGrid g = TorusGrid::with_min_points(1, 8);
  const Symbol a = sample_symbol(g);
  const CVec f = smooth_values(g, 1), h = smooth_values(g, 2);
  const Xi xi{1.7, 0, 0};
  const CVec v = a.eval(xi);
  for (std::size_t x = 0; x < v.size(); ++x) CHECK(std::abs(v[x] - (f[x] * 1.7 * 1.7 + h[x] * 1.7)) < 1e-13);
}

TEST_CASE("xi and x gradients agree with independent differences") {
  const TorusGrid g = TorusGrid::with_min_points(2, 4);
  const Symbol a = Symbol::polynomial(g, 2.0, Parity::Even, "q",
                                      {PolyTerm{{1, 1, 0}, smooth_values(g, 3)}, PolyTerm{{0, 2, 0}, smooth_values(g, 4)}});
  const Xi xi{0.8, -1.3, 0};
  const auto gx = a.grad_xi(xi);
  const auto gxx = a.grad_x(xi);
  for (int i = 0; i < 2; ++i) {
    CHECK(oracle::max_diff(gx[i], oracle::xi_derivative(a, xi, i)) < 1e-8);
    CHECK(oracle::max_diff(gxx[i], oracle::x_derivative(g, a.eval(xi), i)) < 1e-10);
  }

  // a symbol without an analytic gradient falls back to the stencil
  const Symbol b = pointwise_map(a, [](cplx z) { return z * z; }, 4.0, Parity::Even, "sq");
  CHECK_FALSE(b.has_analytic_grad());
  const auto gb = b.grad_xi(xi);
  CHECK(oracle::max_diff(gb[0], oracle::xi_derivative(b, xi, 0)) < 1e-5 * oracle::max_abs(gb[0]));
}

TEST_CASE("Poisson bracket against a closed form and the oracle") {
  const TorusGrid g = TorusGrid::with_min_points(1, 8);
  const CVec f = smooth_values(g, 5), h = smooth_values(g, 6);
  const Symbol a = Symbol::polynomial(g, 2.0, Parity::Even, "a", {PolyTerm{{2, 0, 0}, f}});
  const Symbol b = Symbol::polynomial(g, 1.0, Parity::Odd, "b", {PolyTerm{{1, 0, 0}, h}});
  const Xi xi{2.5, 0, 0};
  const CVec pb = poisson_bracket(a, b).eval(xi);
  // {f xi^2, h xi} = xi^2 (2 f h' - f' h)
  const CVec fp = oracle::x_derivative(g, f, 0), hp = oracle::x_derivative(g, h, 0);
  double err = 0.0;
  for (std::size_t x = 0; x < f.size(); ++x)
    err = std::max(err, std::abs(pb[x] - xi[0] * xi[0] * (2.0 * f[x] * hp[x] - fp[x] * h[x])));
  CHECK(err < 1e-10);
  CHECK(oracle::max_diff(pb, oracle::bracket(a, b, xi)) < 1e-8);
  CHECK(poisson_bracket(a, b).order() == 2.0);
}

TEST_CASE("sharp composition") {
  const TorusGrid g = TorusGrid::with_min_points(1, 8);
  const Symbol a = sample_symbol(g);
  const Symbol b = Symbol::of_x(g, "b", smooth_values(g, 7));
  const Xi xi{-3.0, 0, 0};
  const CVec ab = (a * b).eval(xi);
  CHECK(oracle::max_diff(sharp_compose(a, b, 1.0).eval(xi), ab) < 1e-14);
  const CVec br = oracle::bracket(a, b, xi);
  const CVec s2 = sharp_compose(a, b, 2.0).eval(xi);
  for (std::size_t x = 0; x < ab.size(); ++x) CHECK(std::abs(s2[x] - (ab[x] + br[x] / cplx(0, 2))) < 1e-8);
}

TEST_CASE("conjugate reflection and parity defects") {
  const TorusGrid g = TorusGrid::with_min_points(1, 8);
  const CVec f = smooth_values(g, 8);
  const Symbol a = Symbol::polynomial(g, 1.0, Parity::Odd, "odd", {PolyTerm{{1, 0, 0}, f}});
  const Xi xi{1.5, 0, 0}, mxi{-1.5, 0, 0};
  const CVec r = conj_reflect(a).eval(xi), v = a.eval(mxi);
  for (std::size_t x = 0; x < f.size(); ++x) CHECK(std::abs(r[x] - std::conj(v[x])) < 1e-15);
  CHECK(parity_defect(a, xi_sample_set(1, 8)) < 1e-15);
  CHECK(parity_defect(a.with_parity(Parity::Even), xi_sample_set(1, 8)) > 0.5);
}

TEST_CASE("seminorms of multipliers") {
  const TorusGrid g = TorusGrid::with_min_points(1, 8);
  const Symbol w = Symbol::multiplier(g, 2.0, Parity::Even, "lap", [](const Xi& xi) { return cplx(xi[0] * xi[0]); });
  // <xi>^{-2} |xi|^2 < 1 with supremum approached at the largest shell; ||1||_{H^s} = sqrt(2 pi)
  const double s = seminorm(w, 2.0, 1.0, 0);
  const double top = 2.0 * 8.0;
  CHECK(s == doctest::Approx(std::sqrt(2.0 * kPi) * top * top / (1.0 + top * top)).epsilon(1e-10));
  CHECK_THROWS(seminorm(w, 2.0, 1.0, 4));
}

TEST_CASE("matrix symbols keep the reality structure") {
  const TorusGrid g = TorusGrid::with_min_points(1, 8);
  const HamiltonianModel m = oracle::quartic_d1();
  const DoubledField U = DoubledField::from_plus(smooth_random_field(g, 3, 0.3, 0.8));
  const ParalinearMatrices mats = build_matrices(build_symbols(m, U));
  const auto samples = xi_sample_set(1, 8);
  CHECK(mats.A2.structure() == Structure::Reality);
  CHECK(mats.A2.structure_defect(samples) < 1e-13);
  CHECK(mats.A1.structure_defect(samples) < 1e-13);
  const MatrixSymbol P = mats.A2 * mats.A2;
  const Xi xi{2.0, 0, 0};
  const MatrixSamples direct = mat_mul(mats.A2.eval(xi), mats.A2.eval(xi));
  for (int k = 0; k < 4; ++k) CHECK(oracle::max_diff(P.eval(xi)[k], direct[k]) < 1e-12);
  const MatrixSamples I = mat_identity(g.grid_size());
  CHECK(oracle::max_diff(mat_mul(I, direct)[1], direct[1]) == 0.0);
}

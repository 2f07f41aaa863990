#pragma once

#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "qnls/fourier.hpp"
#include "qnls/nls_model.hpp"
#include "qnls/paradiff.hpp"
#include "qnls/symbols.hpp"

namespace qnls {

class EllipticityError : public std::runtime_error {
 public:
  EllipticityError(const std::string& what, Index node, Xi xi)
      : std::runtime_error(what), node_(node), xi_(xi) {}
  Index node() const { return node_; }
  Xi xi() const { return xi_; }

 private:
  Index node_;
  Xi xi_;
};

// Even cutoff: 0 for |xi| <= lo, smooth rise on [lo, hi], 1 beyond.
struct PhiCutoff {
  double lo = 0.25;
  double hi = 0.5;
  double operator()(const Xi& xi, int d) const;
};

// Value, xi-gradient and x-gradient of a scalar symbol at one xi, per node.
struct Jet {
  Samples v;
  std::vector<Samples> dxi, dx;
};

struct EigenJets {
  Jet a_t, b_t, lambda, s1, s2;
};

struct PackData;

// Everything the diagonalization needs from one background snapshot.
struct DiagonalizationPack {
  std::shared_ptr<const PackData> data;
  DoubledField background;
  // xi-independent eigenvectors; S* vanishes identically
  bool isotropic = false;

  Symbol a2, b2, a1;
  Symbol a2_tilde, b2_tilde;
  Symbol lambda, lambda_xi2;
  Symbol s1, s2;
  Symbol s1_star, s2_star;
  Symbol a1_plus, b1_plus;
  Symbol c;

  MatrixSymbol A2, A1;
  MatrixSymbol S, S_inv, S_star, S_corrected;
  // order-1 part of S^{-1} E (A2 + A1) (S + S*) after removing E lambda |xi|^2
  MatrixSymbol D1;
  MatrixSymbol principal;  // E lambda |xi|^2
  MatrixSymbol C;

  const TorusGrid& grid() const { return background.grid(); }
  EigenJets jets(const Xi& xi) const;
  // lambda^sigma |xi|^{2 sigma} on both components
  MatrixSymbol weight(double sigma) const;
  Symbol weight_symbol(double sigma) const;
};

// Throws EllipticityError when a_t - |b_t| <= floor at a sampled (x, xi).
DiagonalizationPack build_pack(const HamiltonianModel& m, const DoubledField& background,
                               PhiCutoff phi = {}, double ellipticity_floor = 1e-8);

// Pointwise pieces exposed for tests.
MatrixSamples s_star_samples(const DiagonalizationPack& p, const Xi& xi);
MatrixSamples d1_samples(const DiagonalizationPack& p, const Xi& xi);
// X Y Z with X = S^{-1} E, Y = A2, Z = S; should equal lambda |xi|^2 E.
MatrixSamples principal_product_samples(const DiagonalizationPack& p, const Xi& xi);

// Assembled operators of a pack.
struct PackOperators {
  DoubledOperator S, S_inv, S_star, EA;  // EA = E Op(A2 + A1)
  DoubledOperator principal, D1, C;

  DoubledField parametrix(const DoubledField& V, bool with_star) const;
  // Op(S^{-1}) E Op(A2 + A1) Op(S + S*) V
  DoubledField conjugated(const DoubledField& V) const;
  // (1 - Op(C)) (E Op(lambda |xi|^2) + Op(D1)) V
  DoubledField corrected(const DoubledField& V) const;
  // (1 - Op(C)) Op(S^{-1}) V
  DoubledField modified(const DoubledField& V) const;
};
PackOperators assemble_pack(const DiagonalizationPack& p, const CutoffSpec& cut);

// Op(S + S*) Op(S^{-1}) V - V, or with S* dropped.
LinearMap parametrix_residual(const PackOperators& ops, bool with_star);
// conjugated(V) - E Op(lambda |xi|^2) V - Op(D1) V
LinearMap principal_residual(const PackOperators& ops);

// Growth slope of the (1,0) block of a doubled map, probed with (e_n, 0).
SlopeFit offdiagonal_growth(const LinearMap& map, const TorusGrid& g);
// Growth slope of the full doubled map on conjugacy-respecting probes.
SlopeFit doubled_growth(const LinearMap& map, const TorusGrid& g);

}  // namespace qnls

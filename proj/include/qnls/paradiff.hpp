#pragma once

#include <Eigen/Dense>
#include <array>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qnls/fourier.hpp"
#include "qnls/symbols.hpp"

namespace qnls {

struct CutoffSpec {
  double eps = 0.3;
  double lo = 1.1;
  double hi = 1.9;

  double chi(double t) const { return plateau_cutoff(t, lo, hi); }
  double chi_eps(double t) const { return chi(t / eps); }
};

// Dense Bony-Weyl operator on the lattice: entry(j,k) = chi_eps(|j-k|/<j+k>) a^(j-k, (j+k)/2),
// with a^ the mean Fourier coefficients so that constants assemble to multiples of the identity.
class ParaOperator {
 public:
  ParaOperator() = default;
  ParaOperator(const TorusGrid& g, Eigen::MatrixXcd m, double order, std::string id);

  const TorusGrid& grid() const { return grid_; }
  const Eigen::MatrixXcd& matrix() const { return m_; }
  Eigen::MatrixXcd& matrix() { return m_; }
  double order() const { return order_; }
  const std::string& id() const { return id_; }

  SpectralField apply(const SpectralField& u) const;

 private:
  TorusGrid grid_;
  Eigen::MatrixXcd m_;
  double order_ = 0.0;
  std::string id_;
};

// 2x2 block operator on doubled fields; an empty block is the zero operator.
class DoubledOperator {
 public:
  DoubledOperator() = default;
  DoubledOperator(const TorusGrid& g, std::array<std::optional<ParaOperator>, 4> blocks,
                  std::string id);

  const TorusGrid& grid() const { return grid_; }
  const std::optional<ParaOperator>& block(int r, int c) const { return blocks_[2 * r + c]; }
  const std::string& id() const { return id_; }

  DoubledField apply(const DoubledField& U) const;
  // Full (2L x 2L) matrix acting on the stacked vector (plus, minus).
  Eigen::MatrixXcd stacked() const;

 private:
  TorusGrid grid_;
  std::array<std::optional<ParaOperator>, 4> blocks_;
  std::string id_;
};

using FieldMap = std::function<SpectralField(const SpectralField&)>;
using LinearMap = std::function<DoubledField(const DoubledField&)>;

ParaOperator opbw_assemble(const Symbol& a, const CutoffSpec& cut);
DoubledOperator opbw_assemble(const MatrixSymbol& A, const CutoffSpec& cut);

// Assembles several symbols sharing one evaluation per midpoint; eval returns one sample
// array per block, or an empty array for a block that vanishes at that midpoint.
using MultiEval = std::function<std::vector<Samples>(const Xi&)>;
std::vector<Eigen::MatrixXcd> assemble_blocks(const TorusGrid& g, const CutoffSpec& cut, int count,
                                              const MultiEval& eval);

SpectralField opbw_apply(const Symbol& a, const SpectralField& u, const CutoffSpec& cut);
DoubledField opbw_apply(const MatrixSymbol& A, const DoubledField& U, const CutoffSpec& cut);

// Number of lattice pairs (j,k) inside the cutoff support.
std::size_t band_pair_count(const TorusGrid& g, const CutoffSpec& cut);

// fg - T_f g - T_g f with the product formed on the full grid and truncated to the lattice.
SpectralField paraproduct_remainder(const SpectralField& f, const SpectralField& g,
                                    const CutoffSpec& cut);

// Op(a) Op(b) - Op(a #_rho b), kept in factored form.
struct CompositionRemainder {
  ParaOperator left, right, composed;
  SpectralField apply(const SpectralField& u) const;
  Eigen::MatrixXcd matrix() const;
};
CompositionRemainder composition_remainder(const Symbol& a, const Symbol& b, double rho,
                                           const CutoffSpec& cut);

// Least-squares slope of log y against log n.
struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  // every value sits at the roundoff floor relative to the reference scale
  bool vanishing = false;
  std::vector<int> ns;
  std::vector<double> values;
};
SlopeFit fit_slope(const std::vector<int>& ns, const std::vector<double>& values,
                   double reference_scale = 1.0);

// n in {4, 8, ..., N/2}.
std::vector<int> sweep_frequencies(int N);
// Unit-amplitude mode at n along the first axis.
SpectralField probe_mode(const TorusGrid& g, int n);
DoubledField probe_doubled(const TorusGrid& g, int n);

// Slope of ||map(e_n)||_0 over sweep_frequencies.
SlopeFit frequency_growth(const FieldMap& map, const TorusGrid& g);
SlopeFit frequency_growth(const LinearMap& map, const TorusGrid& g);

// Rows j_1..j_d, k_1..k_d, re, im for nonzero entries.
void write_operator_csv(std::ostream& os, const ParaOperator& op, const CutoffSpec& cut,
                        const std::map<std::string, std::string>& meta = {});

}  // namespace qnls

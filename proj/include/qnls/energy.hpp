#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "qnls/diagonalization.hpp"
#include "qnls/fourier.hpp"
#include "qnls/paradiff.hpp"

namespace qnls {

// <Op(lambda^sigma |xi|^{2 sigma}) C V, C V> with C = (1 - Op(c)) Op(S^{-1}).
class ModifiedEnergy {
 public:
  ModifiedEnergy(const DiagonalizationPack& pack, double sigma, const CutoffSpec& cut = {});
  // Reuses already assembled pack operators.
  ModifiedEnergy(const DiagonalizationPack& pack, std::shared_ptr<const PackOperators> ops,
                 double sigma, const CutoffSpec& cut = {});

  double sigma() const { return sigma_; }
  const DiagonalizationPack& pack() const { return pack_; }
  const PackOperators& operators() const { return *ops_; }
  const DoubledOperator& weight_op() const { return weight_; }
  const TorusGrid& grid() const { return pack_.grid(); }

  DoubledField corrector(const DoubledField& V) const { return ops_->modified(V); }
  double value(const DoubledField& V) const;
  // <W C A V, C B V>
  double bilinear(const DoubledField& left, const DoubledField& right) const;

 private:
  DiagonalizationPack pack_;
  std::shared_ptr<const PackOperators> ops_;
  double sigma_ = 0.0;
  DoubledOperator weight_;
};

double modified_norm_sq(const DoubledField& V, const ModifiedEnergy& E);

// Squared doubled norm ||v+||^2_s.
double doubled_norm_sq(const DoubledField& V, double s);

struct EnergyTrial {
  std::string kind;
  double norm_sq = 0.0;        // ||V||^2_sigma, or ||U||^2_{sigma+2} for Garding
  double low_norm_sq = 0.0;    // ||V||^2_{-2}, or ||U||^2_sigma for Garding
  double value = 0.0;          // modified energy, or the Garding form
  double value_swapped = 0.0;  // Garding form with the bilaplacian on the other slot
};

struct EquivalenceResult {
  double C_r = 0.0;
  bool pass = false;
  std::vector<EnergyTrial> trials;
};

struct GardingResult {
  double C_r = 0.0;
  double C_theta = 0.0;
  bool pass = false;
  std::vector<EnergyTrial> trials;
  std::string failure;
};

// Conjugacy-respecting random trial fields for the given seed; the last three of a
// Garding set are single modes at |n| = N/2, 3N/4, N.
std::vector<std::pair<std::string, DoubledField>> energy_trials(const TorusGrid& g, int count,
                                                                 std::uint64_t seed,
                                                                 bool enrich);

// Best C_r with C_r^{-1}||V||^2_s - ||V||^2_{-2} <= E(V) <= C_r ||V||^2_s over the trials.
EquivalenceResult equivalence_check(const ModifiedEnergy& E, int trials, std::uint64_t seed = 1);

// <W C Lap^2 U, C U> >= C_r ||U||^2_{s+2} - C_theta ||U||^2_s over enriched trials.
GardingResult garding_check(const ModifiedEnergy& E, int trials, std::uint64_t seed = 2);

void write_trials_csv(std::ostream& os, const std::vector<EnergyTrial>& trials, double C_r,
                      double C_theta, const std::map<std::string, std::string>& meta = {});

}  // namespace qnls

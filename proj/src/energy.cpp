#include "qnls/energy.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <random>
#include <stdexcept>

namespace qnls {

ModifiedEnergy::ModifiedEnergy(const DiagonalizationPack& pack, double sigma, const CutoffSpec& cut)
    : ModifiedEnergy(pack, std::make_shared<PackOperators>(assemble_pack(pack, cut)), sigma, cut) {}

ModifiedEnergy::ModifiedEnergy(const DiagonalizationPack& pack,
                               std::shared_ptr<const PackOperators> ops, double sigma,
                               const CutoffSpec& cut)
    : pack_(pack), ops_(std::move(ops)), sigma_(sigma) {
  if (sigma < 0.0) throw std::invalid_argument("ModifiedEnergy: sigma must be >= 0");
  weight_ = opbw_assemble(pack_.weight(sigma), cut);
}

double ModifiedEnergy::bilinear(const DoubledField& left, const DoubledField& right) const {
  if (left.grid() != grid() || right.grid() != grid())
    throw std::invalid_argument("ModifiedEnergy: grid mismatch");
  const DoubledField cl = corrector(left);
  const DoubledField cr = corrector(right);
  return inner_doubled(weight_.apply(cl), cr);
}

double ModifiedEnergy::value(const DoubledField& V) const {
  if (V.grid() != grid()) throw std::invalid_argument("ModifiedEnergy: grid mismatch");
  const DoubledField cv = corrector(V);
  return inner_doubled(weight_.apply(cv), cv);
}

double modified_norm_sq(const DoubledField& V, const ModifiedEnergy& E) { return E.value(V); }

double doubled_norm_sq(const DoubledField& V, double s) { return sobolev_norm_sq(V.plus, s); }

namespace {

DoubledField bilaplacian(const DoubledField& U) {
  const int d = U.grid().dim();
  return multiplier_apply(
      [d](const Index& j) {
        const double r2 = index_norm_sq(j, d);
        return cplx(r2 * r2);
      },
      U);
}

}  // namespace

std::vector<std::pair<std::string, DoubledField>> energy_trials(const TorusGrid& g, int count,
                                                                 std::uint64_t seed, bool enrich) {
  std::vector<std::pair<std::string, DoubledField>> out;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> decay(0.5, 3.0);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * kPi);
  const int d = g.dim();
  const int N = g.freq_cut();
  const int randoms = enrich ? std::max(0, count - 3) : count;
  for (int t = 0; t < randoms; ++t) {
    const double p = 0.5 * d + decay(rng);
    const SpectralField u = random_field(g, rng(), [p, d](const Index& j) {
      return std::pow(japanese(j, d), -p);
    });
    out.emplace_back("random", DoubledField::from_plus(u));
  }
  if (enrich) {
    for (int n : {N / 2, (3 * N) / 4, N}) {
      Index j{};
      j[0] = n;
      const SpectralField u = SpectralField::mode(g, j, std::polar(1.0, phase(rng)));
      out.emplace_back("mode" + std::to_string(n), DoubledField::from_plus(u));
    }
  }
  return out;
}

EquivalenceResult equivalence_check(const ModifiedEnergy& E, int trials, std::uint64_t seed) {
  EquivalenceResult r;
  r.pass = true;
  double C = 1.0;
  for (const auto& [kind, V] : energy_trials(E.grid(), trials, seed, false)) {
    EnergyTrial t;
    t.kind = kind;
    t.norm_sq = doubled_norm_sq(V, E.sigma());
    t.low_norm_sq = doubled_norm_sq(V, -2.0);
    t.value = E.value(V);
    if (t.norm_sq > 0.0) C = std::max(C, t.value / t.norm_sq);
    const double lower = t.value + t.low_norm_sq;
    if (lower > 0.0)
      C = std::max(C, t.norm_sq / lower);
    else if (t.norm_sq > 0.0)
      r.pass = false;
    r.trials.push_back(t);
  }
  r.C_r = r.pass ? C : std::numeric_limits<double>::infinity();
  r.pass = r.pass && std::isfinite(r.C_r);
  return r;
}

GardingResult garding_check(const ModifiedEnergy& E, int trials, std::uint64_t seed) {
  GardingResult r;
  const double s = E.sigma();
  double min_ratio = std::numeric_limits<double>::infinity();
  for (const auto& [kind, U] : energy_trials(E.grid(), trials, seed, true)) {
    EnergyTrial t;
    t.kind = kind;
    t.norm_sq = doubled_norm_sq(U, s + 2.0);
    t.low_norm_sq = doubled_norm_sq(U, s);
    const DoubledField L = bilaplacian(U);
    t.value = E.bilinear(L, U);
    t.value_swapped = E.bilinear(U, L);
    if (kind != "random") min_ratio = std::min(min_ratio, t.value / t.norm_sq);
    r.trials.push_back(t);
  }
  r.C_r = 0.5 * min_ratio;
  if (!(r.C_r > 0.0)) {
    r.failure = "no coercivity on high-frequency modes";
    r.C_theta = std::numeric_limits<double>::infinity();
    return r;
  }
  double theta = 0.0;
  for (const EnergyTrial& t : r.trials)
    theta = std::max(theta, (r.C_r * t.norm_sq - t.value) / t.low_norm_sq);
  r.C_theta = theta;
  r.pass = std::isfinite(theta);
  if (!r.pass) r.failure = "lower-order constant unbounded";
  return r;
}

void write_trials_csv(std::ostream& os, const std::vector<EnergyTrial>& trials, double C_r,
                      double C_theta, const std::map<std::string, std::string>& meta) {
  for (const auto& [k, v] : meta) os << "# " << k << "=" << v << "\n";
  os << "trial,kind,norm_sq,low_norm_sq,value,value_swapped,C_r,C_theta\n";
  os << std::setprecision(12);
  for (std::size_t i = 0; i < trials.size(); ++i) {
    const EnergyTrial& t = trials[i];
    os << i << "," << t.kind << "," << t.norm_sq << "," << t.low_norm_sq << "," << t.value << ","
       << t.value_swapped << "," << C_r << "," << C_theta << "\n";
  }
}

}  // namespace qnls

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "qnls/fourier.hpp"
#include "qnls/nls_model.hpp"
#include "qnls/paradiff.hpp"

namespace qnls {

// Schema violation; path is a JSON pointer to the offending field.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& path, const std::string& what)
      : std::runtime_error(path + ": " + what), path_(path) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

struct RunConfig {
  std::string name = "run";

  // grid
  int d = 1;
  int N = 16;
  int M = 0;  // 0: smallest dealiasing size for the model

  // hamiltonian
  std::string model_kind = "polynomial";  // polynomial | special_form | linear
  std::vector<Monomial> terms;
  SpecialForm special;

  // thresholds
  double s0 = 1.0;
  double s = 0.0;  // 0: s0 + 3, or s0 + 2 for special-form models
  std::vector<double> sigmas{0.0, 1.0};

  // initial data and background
  double amplitude = 0.1;
  double rate = 1.0;

  // solver
  double dt = 1e-4;
  double T = 0.1;
  double T_guess = 0.1;
  std::vector<double> visc_eps{1e-2, 1e-3, 1e-4};
  std::uint64_t seed = 1;
  int max_iterations = 12;
  int max_halvings = 8;

  // cutoffs
  double cutoff_eps = 0.3;
  std::string chi_profile = "plateau";
  std::string phi_profile = "plateau";

  // diagnostics
  int trials = 200;
  double sigma = 1.0;
  // jets with |y_i| <= radius sampled by the ellipticity check
  double ellipticity_radius = 1.0;

  // outputs
  std::string output_dir = "out";
  std::vector<std::string> formats{"csv", "json"};

  // warnings raised while parsing, e.g. thresholds below the model default
  std::vector<std::string> warnings;
  std::string hash;  // SHA-256 of the canonical JSON

  TorusGrid grid(const HamiltonianModel& m) const;
  HamiltonianModel model() const;
  CutoffSpec cutoff() const;
  double default_s() const;
  // Smooth random initial data from amplitude, rate and seed.
  DoubledField initial_data(const TorusGrid& g) const;
  nlohmann::json to_json() const;
};

RunConfig parse_config(const nlohmann::json& j);
RunConfig load_config(const std::string& path);

std::string sha256_hex(const std::string& bytes);

}  // namespace qnls

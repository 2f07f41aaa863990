#include "qnls/config.hpp"

#include <openssl/evp.h>

#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

namespace qnls {

namespace {

using nlohmann::json;

class Section {
 public:
  Section(const json& j, std::string path, std::set<std::string> allowed)
      : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_.empty() ? "/" : path_, "expected an object");
    for (const auto& [k, v] : j_.items())
      if (!allowed.count(k)) throw ConfigError(path_ + "/" + k, "unknown key");
  }

  bool has(const std::string& k) const { return j_.contains(k); }
  const json& raw(const std::string& k) const { return j_.at(k); }
  std::string path(const std::string& k) const { return path_ + "/" + k; }

  double number(const std::string& k, double def) const {
    if (!has(k)) return def;
    if (!j_[k].is_number()) throw ConfigError(path(k), "expected a number");
    return j_[k].get<double>();
  }
  int integer(const std::string& k, int def, int lo) const {
    if (!has(k)) return def;
    if (!j_[k].is_number_integer()) throw ConfigError(path(k), "expected an integer");
    const int v = j_[k].get<int>();
    if (v < lo) throw ConfigError(path(k), "must be >= " + std::to_string(lo));
    return v;
  }
  std::string string(const std::string& k, const std::string& def) const {
    if (!has(k)) return def;
    if (!j_[k].is_string()) throw ConfigError(path(k), "expected a string");
    return j_[k].get<std::string>();
  }
  std::vector<double> numbers(const std::string& k, std::vector<double> def) const {
    if (!has(k)) return def;
    if (!j_[k].is_array()) throw ConfigError(path(k), "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < j_[k].size(); ++i) {
      if (!j_[k][i].is_number()) throw ConfigError(path(k) + "/" + std::to_string(i), "expected a number");
      out.push_back(j_[k][i].get<double>());
    }
    return out;
  }

 private:
  const json& j_;
  std::string path_;
};

Monomial parse_term(const json& t, const std::string& path, int d) {
  Section s(t, path, {"coeff", "exponents"});
  if (!s.has("coeff")) throw ConfigError(path + "/coeff", "missing");
  if (!s.has("exponents")) throw ConfigError(path + "/exponents", "missing");
  cplx c;
  const json& jc = s.raw("coeff");
  if (jc.is_number())
    c = jc.get<double>();
  else if (jc.is_array() && jc.size() == 2 && jc[0].is_number() && jc[1].is_number())
    c = cplx(jc[0].get<double>(), jc[1].get<double>());
  else
    throw ConfigError(s.path("coeff"), "expected a number or [re, im]");
  const json& je = s.raw("exponents");
  const std::size_t want = 2 * std::size_t(d + 1);
  if (!je.is_array() || je.size() != want)
    throw ConfigError(s.path("exponents"), "expected " + std::to_string(want) + " exponents");
  std::vector<int> e;
  for (std::size_t i = 0; i < je.size(); ++i) {
    if (!je[i].is_number_integer() || je[i].get<int>() < 0)
      throw ConfigError(s.path("exponents") + "/" + std::to_string(i), "expected a nonnegative integer");
    e.push_back(je[i].get<int>());
  }
  return Monomial{c, e};
}

void finite_positive(double v, const std::string& path) {
  if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(path, "must be positive");
}

}  // namespace

RunConfig parse_config(const json& j) {
  RunConfig c;
  Section top(j, "", {"name", "grid", "hamiltonian", "thresholds", "data", "solver", "cutoffs",
                      "diagnostics", "outputs"});
  c.name = top.string("name", c.name);

  if (!top.has("grid")) throw ConfigError("/grid", "missing");
  {
    Section g(top.raw("grid"), "/grid", {"d", "N", "M"});
    c.d = g.integer("d", c.d, 1);
    if (c.d > kMaxDim) throw ConfigError("/grid/d", "must be <= " + std::to_string(kMaxDim));
    c.N = g.integer("N", c.N, 4);
    c.M = g.integer("M", 0, 0);
  }

  if (!top.has("hamiltonian")) throw ConfigError("/hamiltonian", "missing");
  {
    Section h(top.raw("hamiltonian"), "/hamiltonian", {"kind", "terms", "gradient_coefficient", "h"});
    c.model_kind = h.string("kind", c.model_kind);
    if (c.model_kind == "polynomial") {
      if (!h.has("terms") || !h.raw("terms").is_array() || h.raw("terms").empty())
        throw ConfigError("/hamiltonian/terms", "expected a nonempty array");
      for (std::size_t i = 0; i < h.raw("terms").size(); ++i)
        c.terms.push_back(parse_term(h.raw("terms")[i], "/hamiltonian/terms/" + std::to_string(i), c.d));
    } else if (c.model_kind == "special_form") {
      c.special.gradient_coefficient = h.number("gradient_coefficient", 1.0);
      if (c.special.gradient_coefficient < 0.0)
        throw ConfigError("/hamiltonian/gradient_coefficient", "must be >= 0");
      c.special.h = h.numbers("h", {});
      if (c.special.h.empty()) throw ConfigError("/hamiltonian/h", "expected coefficients of h");
    } else if (c.model_kind != "linear") {
      throw ConfigError("/hamiltonian/kind", "expected polynomial, special_form or linear");
    }
  }

  if (top.has("thresholds")) {
    Section t(top.raw("thresholds"), "/thresholds", {"s0", "s", "sigmas"});
    c.s0 = t.number("s0", c.s0);
    c.s = t.number("s", 0.0);
    c.sigmas = t.numbers("sigmas", c.sigmas);
  }
  if (!(c.s0 > 0.5 * c.d)) throw ConfigError("/thresholds/s0", "must exceed d/2");
  const double s_default = c.default_s();
  if (c.s == 0.0)
    c.s = s_default;
  else if (c.s < s_default)
    c.warnings.push_back("s = " + std::to_string(c.s) + " below the model threshold " +
                         std::to_string(s_default));

  if (top.has("data")) {
    Section t(top.raw("data"), "/data", {"amplitude", "rate"});
    c.amplitude = t.number("amplitude", c.amplitude);
    c.rate = t.number("rate", c.rate);
    if (c.amplitude < 0.0) throw ConfigError("/data/amplitude", "must be >= 0");
    finite_positive(c.rate, "/data/rate");
  }

  if (top.has("solver")) {
    Section t(top.raw("solver"), "/solver",
              {"dt", "T", "T_guess", "visc_eps", "seed", "max_iterations", "max_halvings"});
    c.dt = t.number("dt", c.dt);
    c.T = t.number("T", c.T);
    c.T_guess = t.number("T_guess", c.T_guess);
    c.visc_eps = t.numbers("visc_eps", c.visc_eps);
    c.seed = std::uint64_t(t.integer("seed", int(c.seed), 0));
    c.max_iterations = t.integer("max_iterations", c.max_iterations, 1);
    c.max_halvings = t.integer("max_halvings", c.max_halvings, 0);
    finite_positive(c.dt, "/solver/dt");
    finite_positive(c.T, "/solver/T");
    finite_positive(c.T_guess, "/solver/T_guess");
    for (std::size_t i = 0; i < c.visc_eps.size(); ++i)
      if (c.visc_eps[i] < 0.0 || (i > 0 && !(c.visc_eps[i] < c.visc_eps[i - 1])))
        throw ConfigError("/solver/visc_eps/" + std::to_string(i), "must decrease and stay >= 0");
  }

  if (top.has("cutoffs")) {
    Section t(top.raw("cutoffs"), "/cutoffs", {"cutoff_eps", "chi", "phi"});
    c.cutoff_eps = t.number("cutoff_eps", c.cutoff_eps);
    c.chi_profile = t.string("chi", c.chi_profile);
    c.phi_profile = t.string("phi", c.phi_profile);
    if (!(c.cutoff_eps > 0.0 && c.cutoff_eps < 1.0)) throw ConfigError("/cutoffs/cutoff_eps", "must lie in (0, 1)");
    if (c.chi_profile != "plateau") throw ConfigError("/cutoffs/chi", "only plateau is available");
    if (c.phi_profile != "plateau") throw ConfigError("/cutoffs/phi", "only plateau is available");
  }

  if (top.has("diagnostics")) {
    Section t(top.raw("diagnostics"), "/diagnostics", {"trials", "sigma", "ellipticity_radius"});
    c.trials = t.integer("trials", c.trials, 4);
    c.sigma = t.number("sigma", c.sigma);
    if (c.sigma < 0.0) throw ConfigError("/diagnostics/sigma", "must be >= 0");
    c.ellipticity_radius = t.number("ellipticity_radius", c.ellipticity_radius);
    if (c.ellipticity_radius < 0.0) throw ConfigError("/diagnostics/ellipticity_radius", "must be >= 0");
  }

  if (top.has("outputs")) {
    Section t(top.raw("outputs"), "/outputs", {"directory", "formats"});
    c.output_dir = t.string("directory", c.output_dir);
    if (t.has("formats")) {
      const json& f = t.raw("formats");
      if (!f.is_array()) throw ConfigError("/outputs/formats", "expected an array");
      c.formats.clear();
      for (std::size_t i = 0; i < f.size(); ++i) {
        if (!f[i].is_string() || (f[i] != "csv" && f[i] != "json"))
          throw ConfigError("/outputs/formats/" + std::to_string(i), "expected csv or json");
        c.formats.push_back(f[i].get<std::string>());
      }
    }
  }

  // validates the polynomial itself (size, reality)
  try {
    (void)c.model();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("/hamiltonian", e.what());
  }
  c.hash = sha256_hex(j.dump());
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("/", "cannot open " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("/", std::string("parse error: ") + e.what());
  }
  return parse_config(j);
}

double RunConfig::default_s() const { return s0 + (model_kind == "special_form" ? 2.0 : 3.0); }

HamiltonianModel RunConfig::model() const {
  if (model_kind == "special_form") return HamiltonianModel::special_form(d, special);
  if (model_kind == "linear") {
    std::vector<Monomial> t;
    for (int j = 1; j <= d; ++j) {
      std::vector<int> e(2 * (d + 1), 0);
      e[j] = 1;
      e[d + 1 + j] = 1;
      t.push_back({1.0, e});
    }
    return HamiltonianModel::polynomial(WirtingerPolynomial(d, t));
  }
  return HamiltonianModel::polynomial(WirtingerPolynomial(d, terms));
}

TorusGrid RunConfig::grid(const HamiltonianModel& m) const {
  return TorusGrid(d, N, M > 0 ? M : dealiasing_points(m, N));
}

CutoffSpec RunConfig::cutoff() const {
  CutoffSpec c;
  c.eps = cutoff_eps;
  return c;
}

DoubledField RunConfig::initial_data(const TorusGrid& g) const {
  return DoubledField::from_plus(smooth_random_field(g, seed, amplitude, rate));
}

nlohmann::json RunConfig::to_json() const {
  json j;
  j["name"] = name;
  j["grid"] = {{"d", d}, {"N", N}, {"M", M}};
  j["hamiltonian"]["kind"] = model_kind;
  if (model_kind == "polynomial")
    for (const Monomial& t : terms)
      j["hamiltonian"]["terms"].push_back({{"coeff", {t.coeff.real(), t.coeff.imag()}}, {"exponents", t.exps}});
  if (model_kind == "special_form") {
    j["hamiltonian"]["gradient_coefficient"] = special.gradient_coefficient;
    j["hamiltonian"]["h"] = special.h;
  }
  j["thresholds"] = {{"s0", s0}, {"s", s}, {"sigmas", sigmas}};
  j["data"] = {{"amplitude", amplitude}, {"rate", rate}};
  j["solver"] = {{"dt", dt},       {"T", T},
                 {"T_guess", T_guess}, {"visc_eps", visc_eps},
                 {"seed", seed},   {"max_iterations", max_iterations},
                 {"max_halvings", max_halvings}};
  j["cutoffs"] = {{"cutoff_eps", cutoff_eps}, {"chi", chi_profile}, {"phi", phi_profile}};
  j["diagnostics"] = {{"trials", trials}, {"sigma", sigma}, {"ellipticity_radius", ellipticity_radius}};
  j["outputs"] = {{"directory", output_dir}, {"formats", formats}};
  return j;
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx, bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx, md, &len) != 1) {
    EVP_MD_CTX_free(ctx);
    throw std::runtime_error("sha256 failed");
  }
  EVP_MD_CTX_free(ctx);
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
  return os.str();
}

}  // namespace qnls

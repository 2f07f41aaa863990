#include "qnls/report.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace qnls {

std::string meta_number(double v) {
  std::ostringstream os;
  os << std::setprecision(12) << v;
  return os.str();
}

Meta run_meta(const RunConfig& c, const TorusGrid& g) {
  return {{"config_hash", c.hash},
          {"name", c.name},
          {"d", std::to_string(g.dim())},
          {"N", std::to_string(g.freq_cut())},
          {"M", std::to_string(g.points())},
          {"seed", std::to_string(c.seed)}};
}

std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

nlohmann::json slope_json(const SlopeFit& f) {
  nlohmann::json j;
  j["slope"] = std::isfinite(f.slope) ? nlohmann::json(f.slope) : nlohmann::json(nullptr);
  j["vanishing"] = f.vanishing;
  j["ns"] = f.ns;
  j["values"] = f.values;
  return j;
}

void write_slopes_csv(std::ostream& os, const std::vector<SlopeRow>& rows, const Meta& meta) {
  for (const auto& [k, v] : meta) os << "# " << k << "=" << v << "\n";
  os << "label,n,value,slope,vanishing\n" << std::setprecision(12);
  for (const SlopeRow& r : rows)
    for (std::size_t i = 0; i < r.fit.ns.size(); ++i)
      os << r.label << "," << r.fit.ns[i] << "," << r.fit.values[i] << "," << r.fit.slope << ","
         << (r.fit.vanishing ? 1 : 0) << "\n";
}

}  // namespace qnls

#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "qnls/config.hpp"
#include "qnls/paradiff.hpp"

namespace qnls {

using Meta = std::map<std::string, std::string>;

// config_hash, name and grid sizes for every output header.
Meta run_meta(const RunConfig& c, const TorusGrid& g);

// Creates parent directories; throws on failure.
std::ofstream open_output(const std::filesystem::path& path);

nlohmann::json slope_json(const SlopeFit& f);

// One row per labelled sweep point: label,n,value,slope.
struct SlopeRow {
  std::string label;
  SlopeFit fit;
};
void write_slopes_csv(std::ostream& os, const std::vector<SlopeRow>& rows, const Meta& meta);

// Canonical number formatting for metadata values.
std::string meta_number(double v);

}  // namespace qnls

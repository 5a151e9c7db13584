#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "metarisk/config_io.hpp"
#include "metarisk/experiments.hpp"

namespace metarisk {

struct RunResult {
  ExperimentOutput output;
  std::vector<std::string> files;
  nlohmann::json manifest;
};

/// Runs the plan, writes its outputs into `out_dir` and finishes with
/// manifest.json: resolved plan, seed, version, timestamps, wall clock,
/// SHA-256 of every output and derived quantities. On failure the manifest is
/// written with status "error" and the exception is rethrown.
RunResult run_plan(const ExperimentPlan& plan, const std::filesystem::path& out_dir,
                   const ExperimentContext& context);

/// {"file", "bytes", "sha256"} for each named file under dir.
nlohmann::json output_inventory(const std::filesystem::path& dir,
                                const std::vector<std::string>& files);

}  // namespace metarisk

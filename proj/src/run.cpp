#include "metarisk/run.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "metarisk/digest.hpp"
#include "metarisk/error.hpp"
#include "metarisk/version.hpp"

namespace metarisk {

using nlohmann::json;

namespace {

std::string utc_timestamp(std::chrono::system_clock::time_point tp) {
  const std::time_t t = std::chrono::system_clock::to_time_t(tp);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

json error_json(const std::exception& e) {
  json j = {{"message", e.what()}};
  if (dynamic_cast<const DivergenceError*>(&e)) {
    j["type"] = "divergence";
    j["iteration"] = static_cast<const DivergenceError&>(e).iteration();
  } else if (dynamic_cast<const ConfigError*>(&e)) {
    j["type"] = "config";
  } else if (dynamic_cast<const ParameterDomainError*>(&e)) {
    j["type"] = "parameter_domain";
  } else if (dynamic_cast<const PreconditionError*>(&e)) {
    j["type"] = "precondition";
  } else if (dynamic_cast<const DimensionMismatchError*>(&e)) {
    j["type"] = "dimension_mismatch";
  } else {
    j["type"] = "internal";
  }
  return j;
}

void write_manifest(const std::filesystem::path& dir, const json& manifest) {
  std::ofstream f(dir / "manifest.json");
  f << manifest.dump(2) << '\n';
  if (!f) throw std::runtime_error("failed to write " + (dir / "manifest.json").string());
}

}  // namespace

json output_inventory(const std::filesystem::path& dir, const std::vector<std::string>& files) {
  json arr = json::array();
  for (const auto& name : files)
    arr.push_back({{"file", name},
                   {"bytes", std::filesystem::file_size(dir / name)},
                   {"sha256", sha256_file(dir / name)}});
  return arr;
}

RunResult run_plan(const ExperimentPlan& plan, const std::filesystem::path& out_dir,
                   const ExperimentContext& context) {
  std::filesystem::create_directories(out_dir);
  const auto started = std::chrono::system_clock::now();
  const auto t0 = std::chrono::steady_clock::now();
  json manifest = {{"artifact", kArtifactName},
                   {"version", kVersion},
                   {"plan", plan_to_json(plan)},
                   {"seed", plan.seed},
                   {"jobs", context.jobs},
                   {"started_at", utc_timestamp(started)}};
  auto finish = [&](const std::string& status) {
    manifest["status"] = status;
    manifest["finished_at"] = utc_timestamp(std::chrono::system_clock::now());
    manifest["wall_clock_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };

  RunResult result;
  try {
    result.output = run_experiment(plan, context);
    result.files = write_outputs(result.output, out_dir);
  } catch (const std::exception& e) {
    finish("error");
    manifest["error"] = error_json(e);
    manifest["outputs"] = json::array();
    write_manifest(out_dir, manifest);
    throw;
  }
  manifest["outputs"] = output_inventory(out_dir, result.files);
  manifest["derived"] = result.output.derived;
  finish("ok");
  write_manifest(out_dir, manifest);
  result.manifest = manifest;
  return result;
}

}  // namespace metarisk

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "metarisk/bounds.hpp"
#include "metarisk/maml_sgd.hpp"

namespace metarisk {

enum class ExperimentKind {
  phase_transition,
  rate_check,
  lr_tradeoff,
  stopping_time,
  single_vs_meta,
  bound_sandwich,
};

std::string to_string(ExperimentKind kind);
ExperimentKind parse_experiment_kind(std::string_view name);

/// A data spectrum swept by an experiment, with a label used in file names and
/// the series column.
struct LabeledSpectrum {
  std::string label;
  nlohmann::json spec;
};

struct SweepAxes {
  std::vector<std::size_t> T;
  std::vector<double> beta_tr;
  /// beta_tr values in units of 1/lambda_1; resolved per data spectrum.
  std::vector<double> beta_tr_scaled;
  std::vector<double> r;
  std::vector<double> epsilon;
  std::vector<LabeledSpectrum> spectra;
};

struct PlanOptions {
  /// "default" (geometric plus t <= 10) or "dense".
  std::string checkpoints = "default";
  /// Stopping-time thresholds as multiples of the best final mean risk.
  std::vector<double> epsilon_factors;
  std::optional<double> envelope_p;
  std::optional<EnvelopeConstants> envelope_constants;
  bool single_task_control = true;
  CrossTermForm cross_term = CrossTermForm::main_text;
  std::size_t battery_size = 20;
  std::size_t battery_max_d = 50;
  bool bias_free_battery = true;
  bool check_violated_alpha = true;
  /// Also run the simulation when the bounds cannot be evaluated.
  bool allow_unstable = false;
};

/// A parsed experiment plan. `config` is the base configuration block as
/// written (defaults are materialized by resolve_config).
struct ExperimentPlan {
  int schema = 1;
  ExperimentKind kind = ExperimentKind::single_vs_meta;
  std::uint64_t seed = 0;
  std::size_t replications = 20;
  nlohmann::json config;
  SweepAxes sweep;
  PlanOptions options;
  /// Directory relative paths (spectrum CSVs) are resolved against.
  std::filesystem::path base_dir;
};

/// Parses plan JSON. Accepts a run manifest too (its "plan" member is used).
/// Throws ConfigError with line/column for syntax errors and the offending
/// field path for schema errors.
ExperimentPlan parse_plan(std::string_view text, const std::filesystem::path& base_dir = {});

/// Reads and parses a plan file after applying key=value overrides.
ExperimentPlan load_plan(const std::filesystem::path& path,
                         const std::vector<std::string>& overrides = {});

/// Applies "a.b.c=value" to a JSON document. The value is parsed as JSON when
/// possible and taken as a string otherwise.
void apply_override(nlohmann::json& doc, std::string_view assignment);

/// Plan as JSON with every option materialized; parse_plan(plan_to_json(p))
/// yields an equivalent plan.
nlohmann::json plan_to_json(const ExperimentPlan& plan);

Spectrum resolve_data_spectrum(const nlohmann::json& spec, std::size_t d,
                               const std::filesystem::path& base_dir = {});
TaskSpectrum resolve_task_spectrum(const nlohmann::json& spec, std::size_t d,
                                   const std::filesystem::path& base_dir = {});

struct ResolvedConfig {
  ProblemConfig config;
  /// The configuration block with every default filled in.
  nlohmann::json block;
  /// Multiple of the stability threshold alpha was derived from, if any.
  std::optional<double> alpha_fraction;
};

/// Materializes a ProblemConfig from a configuration block. Missing alpha is
/// set to alpha_fraction (default 0.5) times 1/(c(beta_tr) tr(Sigma)); theta*
/// defaults to a seeded random unit vector and omega0 to zero.
ResolvedConfig resolve_config(const nlohmann::json& block, std::uint64_t seed,
                              const std::filesystem::path& base_dir = {});

/// Full numeric description of a configuration (spectra and vectors included).
nlohmann::json config_to_json(const ProblemConfig& config);

/// SHA-256 of config_to_json(config).dump().
std::string config_fingerprint(const ProblemConfig& config);

/// tr(Sigma), c(beta_tr), C(beta_tr), alpha threshold, min mu_i(H_{n1,beta_tr}).
nlohmann::json derived_quantities(const ProblemConfig& config);

}  // namespace metarisk

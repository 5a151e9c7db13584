#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "metarisk/bounds.hpp"
#include "metarisk/config_io.hpp"
#include "metarisk/risk.hpp"

namespace metarisk {

/// One simulated series: replication statistics of the excess risk and the
/// mean meta-training loss on a checkpoint schedule.
struct SeriesCurve {
  std::string series;
  double param = 0.0;
  /// Regime or mode label ("vanishing", "maml", "single_task", ...).
  std::string tag;
  RiskCurve risk;
  std::vector<std::vector<double>> per_rep;
  std::vector<double> mean_train_loss;
  double bayes_error = 0.0;
};

struct BoundRow {
  std::string series;
  double param = 0.0;
  std::size_t T = 0;
  double alpha = 0.0;
  std::optional<BoundBreakdown> bounds;
  std::string error;
};

struct StoppingRow {
  std::string series;
  double beta_tr = 0.0;
  double epsilon = 0.0;
  /// Multiple of the best final mean risk epsilon was derived from, if any.
  std::optional<double> epsilon_factor;
  /// First checkpoint with mean risk below epsilon; nullopt when censored.
  std::optional<std::size_t> t_epsilon;
  std::optional<StoppingEnvelope> envelope;
  std::string envelope_error;
  double final_mean_risk = 0.0;
};

struct FitRow {
  std::string series;
  std::string mode;
  /// Least-squares slope of -log(mean risk) on log T.
  double exponent = 0.0;
  double intercept = 0.0;
  double residual_rms = 0.0;
  std::optional<double> target;
  std::size_t n_points = 0;
};

struct ValidationRow {
  std::size_t config_index = 0;
  std::string subset;
  std::size_t d = 0;
  std::size_t T = 0;
  std::string data_kind;
  double alpha = 0.0;
  double beta_tr = 0.0;
  double beta_te = 0.0;
  std::optional<double> lower;
  std::optional<double> mean_risk;
  std::optional<double> std_risk;
  std::optional<double> upper;
  bool passed = false;
  std::string note;
};

struct TradeoffSeries {
  std::string label;
  double lambda_1 = 0.0;
  std::vector<TradeoffPoint> points;
};

struct ExperimentOutput {
  ExperimentKind kind = ExperimentKind::single_vs_meta;
  std::vector<SeriesCurve> curves;
  std::vector<BoundRow> bounds;
  std::vector<StoppingRow> stopping;
  std::vector<FitRow> fits;
  std::vector<ValidationRow> validation;
  std::vector<TradeoffSeries> tradeoffs;
  /// Derived quantities per series plus experiment-specific summaries.
  nlohmann::json derived = nlohmann::json::object();
};

struct ExperimentContext {
  unsigned jobs = 1;
  /// Progress messages; may be null.
  std::ostream* log = nullptr;
};

/// Runs the plan. Every configuration is checked against the step-size
/// precondition first unless options.allow_unstable is set; per-point bound
/// failures are recorded in the output, divergence is thrown.
ExperimentOutput run_experiment(const ExperimentPlan& plan, const ExperimentContext& context);

/// Writes curves.csv, curves_by_rep.csv and whichever of bounds.csv,
/// stopping.csv, fits.csv, validation.csv and tradeoff_<label>.csv apply.
/// Returns the file names written, sorted.
std::vector<std::string> write_outputs(const ExperimentOutput& output,
                                       const std::filesystem::path& dir);

/// Least-squares fit of log(risk) = intercept - exponent log(T).
FitRow fit_power_law(const std::vector<std::size_t>& T, const std::vector<double>& risk);

/// Random configurations of the bound battery (d <= max_d), keyed by
/// (seed, index) on the battery stream. Returned as configuration blocks.
std::vector<nlohmann::json> bound_battery(std::uint64_t seed, std::size_t count,
                                          std::size_t max_d);

/// Replication curves of MAML-SGD (or single-task SGD) on a schedule.
SeriesCurve simulate_series(const ProblemConfig& config, const std::vector<std::size_t>& schedule,
                            std::size_t replications, unsigned jobs, bool single_task = false);

}  // namespace metarisk

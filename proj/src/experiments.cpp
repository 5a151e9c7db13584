#include "metarisk/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>
#include <set>

#include "metarisk/csv.hpp"
#include "metarisk/error.hpp"
#include "metarisk/parallel.hpp"

namespace metarisk {

using nlohmann::json;

namespace {

void note(const ExperimentContext& ctx, const std::string& msg) {
  if (ctx.log) *ctx.log << msg << std::endl;
}

struct SeriesConfig {
  std::string label;
  json spectrum;
  ResolvedConfig resolved;
};

std::vector<SeriesConfig> series_configs(const ExperimentPlan& plan) {
  std::vector<SeriesConfig> out;
  if (plan.sweep.spectra.empty()) {
    out.push_back({"base", plan.config.at("data_spectrum"),
                   resolve_config(plan.config, plan.seed, plan.base_dir)});
    return out;
  }
  for (const auto& ls : plan.sweep.spectra) {
    json block = plan.config;
    block["data_spectrum"] = ls.spec;
    out.push_back({ls.label, ls.spec, resolve_config(block, plan.seed, plan.base_dir)});
  }
  return out;
}

void check_stable(const ProblemConfig& config, const ExperimentPlan& plan) {
  validate_config(config, !plan.options.allow_unstable);
}

std::vector<std::size_t> schedule_for(const ExperimentPlan& plan, std::size_t T,
                                      const std::vector<std::size_t>& extra) {
  if (plan.options.checkpoints == "dense") return dense_checkpoint_schedule(T);
  return default_checkpoint_schedule(T, extra);
}

std::size_t max_T(const ProblemConfig& config, const std::vector<std::size_t>& sweep_T) {
  std::size_t T = config.T;
  for (auto t : sweep_T) T = std::max(T, t);
  return T;
}

BoundRow bound_row(const ProblemConfig& config, const std::string& series, double param,
                   std::size_t T, const BoundOptions& options) {
  BoundRow row;
  row.series = series;
  row.param = param;
  row.T = T;
  row.alpha = config.alpha;
  ProblemConfig c = config;
  c.T = T;
  try {
    row.bounds = T > 10 ? evaluate_bounds(c, options) : upper_bound(c, options);
  } catch (const Error& e) {
    row.error = e.what();
  }
  return row;
}

std::vector<double> beta_grid(const ExperimentPlan& plan, const Spectrum& sigma) {
  std::vector<double> out = plan.sweep.beta_tr;
  for (double s : plan.sweep.beta_tr_scaled) out.push_back(s / sigma.largest());
  for (double b : out) require_admissible_beta(sigma, b, "βtr");
  return out;
}

std::optional<double> risk_at(const SeriesCurve& curve, std::size_t t) {
  for (std::size_t k = 0; k < curve.risk.t.size(); ++k)
    if (curve.risk.t[k] == t) return curve.risk.mean[k];
  return std::nullopt;
}

// nullopt when fewer than two sweep points are on the curve
std::optional<FitRow> fit_curve(const SeriesCurve& curve, const std::vector<std::size_t>& T_points,
                                const std::string& series, const std::string& mode) {
  std::vector<std::size_t> ts;
  std::vector<double> rs;
  std::set<std::size_t> seen;
  for (auto t : T_points) {
    if (!seen.insert(t).second) continue;
    if (auto r = risk_at(curve, t)) {
      ts.push_back(t);
      rs.push_back(*r);
    }
  }
  if (ts.size() < 2) return std::nullopt;
  FitRow fit = fit_power_law(ts, rs);
  fit.series = series;
  fit.mode = mode;
  return fit;
}

std::optional<double> rate_target(const json& spectrum) {
  const std::string kind = spectrum.at("kind").get<std::string>();
  if (kind == "poly") {
    const double q = spectrum.at("q").get<double>();
    return (q - 1.0) / q;
  }
  if (kind == "exp") return 1.0;
  return std::nullopt;
}

json curve_summary(const SeriesCurve& c) {
  json j = {{"series", c.series}, {"param", c.param}, {"tag", c.tag}};
  if (!c.risk.t.empty()) {
    j["final_t"] = c.risk.t.back();
    j["final_mean_risk"] = c.risk.mean.back();
    j["final_std_risk"] = c.risk.std.back();
  }
  return j;
}

// ---------------------------------------------------------------------------

void run_phase_transition(const ExperimentPlan& plan, const ExperimentContext& ctx,
                          ExperimentOutput& out) {
  const json& data_spec = plan.config.at("data_spectrum");
  const json& task_spec = plan.config.at("task_spectrum");
  if (data_spec.value("kind", "") != "log_decay")
    throw ConfigError("config.data_spectrum: phase_transition needs kind log_decay");
  if (task_spec.value("kind", "") != "log_growth")
    throw ConfigError("config.task_spectrum: phase_transition needs kind log_growth");
  const double p = data_spec.at("p").get<double>();
  const double boundary = 2.0 * p - 1.0;
  const double scale = task_spec.value("scale", 1.0);
  const BoundOptions bopt{plan.options.cross_term};

  json regimes = json::array();
  for (double r : plan.sweep.r) {
    json block = plan.config;
    block["task_spectrum"] = {{"kind", "log_growth"}, {"r", r}, {"scale", scale}};
    ResolvedConfig rc = resolve_config(block, plan.seed, plan.base_dir);
    ProblemConfig& cfg = rc.config;
    cfg.T = max_T(cfg, plan.sweep.T);
    check_stable(cfg, plan);
    const std::string tag = r < boundary ? "vanishing" : (r > boundary ? "non_vanishing" : "boundary");
    note(ctx, "phase_transition: r = " + format_double(r) + " (" + tag + ")");
    SeriesCurve curve = simulate_series(cfg, schedule_for(plan, cfg.T, plan.sweep.T),
                                        plan.replications, ctx.jobs);
    curve.series = "r";
    curve.param = r;
    curve.tag = tag;
    for (auto T : plan.sweep.T) out.bounds.push_back(bound_row(cfg, "r", r, T, bopt));
    json s = curve_summary(curve);
    s["boundary"] = boundary;
    json at = json::object();
    for (auto T : plan.sweep.T)
      if (auto v = risk_at(curve, T)) at[std::to_string(T)] = *v;
    s["mean_risk_at_T"] = at;
    regimes.push_back(s);
    out.derived["series"][format_double(r)] = derived_quantities(cfg);
    out.curves.push_back(std::move(curve));
  }
  out.derived["regimes"] = regimes;
}

void run_rate_check(const ExperimentPlan& plan, const ExperimentContext& ctx,
                    ExperimentOutput& out, bool compare_only) {
  const BoundOptions bopt{plan.options.cross_term};
  for (auto& sc : series_configs(plan)) {
    ProblemConfig cfg = sc.resolved.config;
    cfg.T = max_T(cfg, plan.sweep.T);
    check_stable(cfg, plan);
    note(ctx, to_string(plan.kind) + ": " + sc.label);
    const auto schedule = schedule_for(plan, cfg.T, plan.sweep.T);
    SeriesCurve maml = simulate_series(cfg, schedule, plan.replications, ctx.jobs);
    maml.series = sc.label;
    maml.tag = "maml";
    if (auto fit = fit_curve(maml, plan.sweep.T, sc.label, "maml")) {
      if (!compare_only) fit->target = rate_target(sc.spectrum);
      out.fits.push_back(*fit);
    }
    for (auto T : plan.sweep.T) out.bounds.push_back(bound_row(cfg, sc.label, 0.0, T, bopt));
    out.curves.push_back(std::move(maml));
    if (compare_only || plan.options.single_task_control) {
      SeriesCurve single = simulate_series(cfg, schedule, plan.replications, ctx.jobs, true);
      single.series = sc.label;
      single.tag = "single_task";
      if (auto fit = fit_curve(single, plan.sweep.T, sc.label, "single_task")) out.fits.push_back(*fit);
      out.curves.push_back(std::move(single));
    }
    out.derived["series"][sc.label] = derived_quantities(cfg);
  }
}

void run_lr_tradeoff(const ExperimentPlan& plan, const ExperimentContext& ctx,
                     ExperimentOutput& out) {
  const BoundOptions bopt{plan.options.cross_term};
  for (auto& sc : series_configs(plan)) {
    const ProblemConfig& base = sc.resolved.config;
    check_stable(base, plan);
    const auto grid = beta_grid(plan, base.data_spectrum);
    note(ctx, "lr_tradeoff: " + sc.label + " (" + std::to_string(grid.size()) + " points)");
    TradeoffSeries ts;
    ts.label = sc.label;
    ts.lambda_1 = base.data_spectrum.largest();
    ts.points = tradeoff_curve(base, grid, {false, plan.replications, ctx.jobs, bopt});
    const std::vector<std::size_t> schedule = default_checkpoint_schedule(base.T);
    for (std::size_t g = 0; g < grid.size(); ++g) {
      ProblemConfig cfg = base;
      cfg.beta_tr = grid[g];
      auto& pt = ts.points[g];
      try {
        SeriesCurve curve = simulate_series(cfg, schedule, plan.replications, ctx.jobs);
        curve.series = sc.label;
        curve.param = grid[g];
        curve.tag = "beta_tr";
        pt.empirical_mean = curve.risk.mean.back();
        pt.empirical_std = curve.risk.std.back();
        out.curves.push_back(std::move(curve));
      } catch (const DivergenceError& e) {
        pt.simulation_error = e.what();
      }
      BoundRow row;
      row.series = sc.label;
      row.param = grid[g];
      row.T = base.T;
      row.alpha = base.alpha;
      row.bounds = pt.bounds;
      row.error = pt.bound_error;
      out.bounds.push_back(std::move(row));
    }
    json summary = json::object();
    std::optional<std::size_t> best;
    for (std::size_t g = 0; g < ts.points.size(); ++g)
      if (ts.points[g].empirical_mean &&
          (!best || *ts.points[g].empirical_mean > *ts.points[*best].empirical_mean))
        best = g;
    if (best) {
      summary["argmax_beta_tr"] = ts.points[*best].beta_tr;
      summary["argmax_beta_tr_scaled"] = ts.points[*best].beta_tr * ts.lambda_1;
      summary["max_mean_risk"] = *ts.points[*best].empirical_mean;
    }
    out.derived["tradeoff"][sc.label] = summary;
    out.derived["series"][sc.label] = derived_quantities(base);
    out.tradeoffs.push_back(std::move(ts));
  }
}

void run_stopping_time(const ExperimentPlan& plan, const ExperimentContext& ctx,
                       ExperimentOutput& out) {
  for (auto& sc : series_configs(plan)) {
    const ProblemConfig& base = sc.resolved.config;
    check_stable(base, plan);
    const auto grid = beta_grid(plan, base.data_spectrum);
    const auto schedule = schedule_for(plan, base.T, {});
    note(ctx, "stopping_time: " + sc.label);

    const std::size_t first = out.curves.size();
    for (double beta : grid) {
      ProblemConfig cfg = base;
      cfg.beta_tr = beta;
      SeriesCurve curve = simulate_series(cfg, schedule, plan.replications, ctx.jobs);
      curve.series = sc.label;
      curve.param = beta;
      curve.tag = "beta_tr";
      out.curves.push_back(std::move(curve));
    }
    double best_final = std::numeric_limits<double>::infinity();
    for (std::size_t k = first; k < out.curves.size(); ++k)
      best_final = std::min(best_final, out.curves[k].risk.mean.back());

    std::vector<std::pair<double, std::optional<double>>> epsilons;
    for (double e : plan.sweep.epsilon) epsilons.emplace_back(e, std::nullopt);
    for (double f : plan.options.epsilon_factors) epsilons.emplace_back(f * best_final, f);

    json summary = {{"best_final_mean_risk", best_final}};
    std::optional<double> envelope_p;
    std::optional<EnvelopeConstants> constants;
    std::string envelope_error;
    if (const auto s = two_block_size(base.data_spectrum)) {
      const double T = static_cast<double>(base.T);
      if (plan.options.envelope_p) {
        envelope_p = plan.options.envelope_p;
      } else if (base.T >= 3 && static_cast<double>(*s) < T) {
        // s = T log^{-p} T
        envelope_p = std::log(T / static_cast<double>(*s)) / std::log(std::log(T));
      } else {
        envelope_error = "cannot derive the block parameter p from s and T";
      }
      try {
        constants = plan.options.envelope_constants ? *plan.options.envelope_constants
                                                    : default_envelope_constants(base);
      } catch (const Error& e) {
        envelope_error = e.what();
      }
      summary["two_block_s"] = *s;
      if (envelope_p) summary["envelope_p"] = *envelope_p;
      if (constants)
        summary["envelope_constants"] = {{"U_l", constants->U_l}, {"U_t", constants->U_t},
                                         {"L_l", constants->L_l}, {"L_t", constants->L_t}};
    } else {
      envelope_error = "data spectrum is not two-block";
    }

    for (std::size_t k = first; k < out.curves.size(); ++k) {
      const SeriesCurve& curve = out.curves[k];
      const auto points = curve.risk.mean_points();
      ProblemConfig cfg = base;
      cfg.beta_tr = curve.param;
      for (const auto& [eps, factor] : epsilons) {
        StoppingRow row;
        row.series = sc.label;
        row.beta_tr = curve.param;
        row.epsilon = eps;
        row.epsilon_factor = factor;
        row.t_epsilon = empirical_stopping_time(points, eps);
        row.final_mean_risk = curve.risk.mean.back();
        if (envelope_p && constants) {
          try {
            row.envelope = stopping_time_envelope(cfg, eps, *envelope_p, *constants);
          } catch (const Error& e) {
            row.envelope_error = e.what();
          }
        } else {
          row.envelope_error = envelope_error;
        }
        out.stopping.push_back(std::move(row));
      }
    }
    out.derived["stopping"][sc.label] = summary;
    out.derived["series"][sc.label] = derived_quantities(base);
  }
}

void run_bound_sandwich(const ExperimentPlan& plan, const ExperimentContext& ctx,
                        ExperimentOutput& out) {
  const auto blocks = bound_battery(plan.seed, plan.options.battery_size, plan.options.battery_max_d);
  const BoundOptions bopt{plan.options.cross_term};
  json battery = json::array();

  auto evaluate = [&](std::size_t k, const json& block, const std::string& subset) {
    ResolvedConfig rc = resolve_config(block, plan.seed, plan.base_dir);
    const std::string data_kind = block.at("data_spectrum").at("kind").get<std::string>();
    for (auto T : plan.sweep.T) {
      ProblemConfig cfg = rc.config;
      cfg.T = T;
      ValidationRow row;
      row.config_index = k;
      row.subset = subset;
      row.d = cfg.d;
      row.T = T;
      row.data_kind = data_kind;
      row.alpha = cfg.alpha;
      row.beta_tr = cfg.beta_tr;
      row.beta_te = cfg.beta_te;
      try {
        const BoundBreakdown b = T > 10 ? evaluate_bounds(cfg, bopt) : upper_bound(cfg, bopt);
        row.upper = b.upper;
        if (b.has_lower) row.lower = b.lower;
      } catch (const Error& e) {
        row.note = e.what();
      }
      const std::vector<std::size_t> schedule{T};
      const SeriesCurve curve = simulate_series(cfg, schedule, plan.replications, ctx.jobs);
      row.mean_risk = curve.risk.mean.back();
      row.std_risk = curve.risk.std.back();
      row.passed = row.upper && row.lower && *row.lower <= *row.mean_risk &&
                   *row.mean_risk <= *row.upper;
      out.validation.push_back(std::move(row));
    }
  };

  for (std::size_t k = 0; k < blocks.size(); ++k) {
    note(ctx, "bound_sandwich: configuration " + std::to_string(k));
    battery.push_back(blocks[k]);
    evaluate(k, blocks[k], "general");
  }
  if (plan.options.bias_free_battery) {
    for (std::size_t k = 0; k < blocks.size(); ++k) {
      json block = blocks[k];
      block["omega0"] = "theta_star";
      evaluate(k, block, "bias_free");
    }
  }
  if (plan.options.check_violated_alpha && !blocks.empty()) {
    json block = blocks[0];
    ResolvedConfig rc = resolve_config(block, plan.seed, plan.base_dir);
    block.erase("alpha_fraction");
    block["alpha"] = 2.0 * stability_threshold(rc.config);
    ResolvedConfig bad = resolve_config(block, plan.seed, plan.base_dir);
    ValidationRow row;
    row.subset = "violated_alpha";
    row.d = bad.config.d;
    row.T = plan.sweep.T.front();
    row.data_kind = block.at("data_spectrum").at("kind").get<std::string>();
    row.alpha = bad.config.alpha;
    row.beta_tr = bad.config.beta_tr;
    row.beta_te = bad.config.beta_te;
    bad.config.T = row.T;
    try {
      const BoundBreakdown b = evaluate_bounds(bad.config, bopt);
      row.upper = b.upper;
      row.note = "bounds evaluated although alpha exceeds the threshold";
    } catch (const PreconditionError& e) {
      row.note = e.what();
      row.passed = row.note.find("α < 1/(c(βtr,Σ)·tr(Σ))") != std::string::npos;
    }
    try {
      const std::vector<std::size_t> schedule{row.T};
      const SeriesCurve curve = simulate_series(bad.config, schedule, plan.replications, ctx.jobs);
      row.mean_risk = curve.risk.mean.back();
      row.std_risk = curve.risk.std.back();
    } catch (const DivergenceError& e) {
      row.note += "; simulation diverged at iteration " + std::to_string(e.iteration());
    }
    out.validation.push_back(std::move(row));
  }
  out.derived["battery"] = battery;
}

void write_curves(const ExperimentOutput& output, const std::filesystem::path& dir) {
  std::ofstream f(dir / "curves.csv");
  CsvWriter csv(f, {"series", "param", "tag", "t", "mean_risk", "std_risk", "n_reps",
                    "bayes_error", "mean_test_error", "mean_train_loss"});
  for (const auto& c : output.curves) {
    for (std::size_t k = 0; k < c.risk.t.size(); ++k) {
      csv.field(c.series).field(c.param).field(c.tag).field(c.risk.t[k]);
      csv.field(c.risk.mean[k]).field(c.risk.std[k]).field(c.risk.n_reps);
      csv.field(c.bayes_error).field(c.risk.mean[k] + c.bayes_error);
      csv.field(c.mean_train_loss[k]);
      csv.end_row();
    }
  }
  std::ofstream g(dir / "curves_by_rep.csv");
  CsvWriter by_rep(g, {"series", "param", "tag", "replication", "t", "risk"});
  for (const auto& c : output.curves) {
    for (std::size_t r = 0; r < c.per_rep.size(); ++r) {
      for (std::size_t k = 0; k < c.risk.t.size(); ++k) {
        by_rep.field(c.series).field(c.param).field(c.tag).field(r).field(c.risk.t[k]);
        by_rep.field(c.per_rep[r][k]);
        by_rep.end_row();
      }
    }
  }
}

void write_bounds(const ExperimentOutput& output, const std::filesystem::path& dir) {
  std::ofstream f(dir / "bounds.csv");
  CsvWriter csv(f, {"series", "param", "T", "alpha", "bias", "v1", "v2", "var_total", "xi_sum",
                    "upper", "lower_bias", "lower_var", "lower", "remainder", "leading_count",
                    "error"});
  for (const auto& row : output.bounds) {
    csv.field(row.series).field(row.param).field(row.T).field(row.alpha);
    if (row.bounds) {
      const auto& b = *row.bounds;
      csv.field(b.bias).field(b.v1).field(b.v2).field(b.var_total).field(b.xi_sum).field(b.upper);
      if (b.has_lower)
        csv.field(b.lower_bias).field(b.lower_var).field(b.lower);
      else
        csv.empty().empty().empty();
      csv.field(b.remainder).field(b.leading_count);
    } else {
      for (int i = 0; i < 11; ++i) csv.empty();
    }
    csv.field(row.error);
    csv.end_row();
  }
}

void write_stopping(const ExperimentOutput& output, const std::filesystem::path& dir) {
  std::ofstream f(dir / "stopping.csv");
  CsvWriter csv(f, {"series", "beta_tr", "epsilon", "epsilon_factor", "t_epsilon", "censored",
                    "log_t_lower", "log_t_upper", "t_lower", "t_upper", "final_mean_risk",
                    "envelope_error"});
  for (const auto& row : output.stopping) {
    csv.field(row.series).field(row.beta_tr).field(row.epsilon).field(row.epsilon_factor);
    if (row.t_epsilon)
      csv.field(*row.t_epsilon).field(false);
    else
      csv.empty().field(true);
    if (row.envelope)
      csv.field(row.envelope->log_t_lower).field(row.envelope->log_t_upper)
          .field(row.envelope->t_lower).field(row.envelope->t_upper);
    else
      csv.empty().empty().empty().empty();
    csv.field(row.final_mean_risk).field(row.envelope_error);
    csv.end_row();
  }
}

void write_fits(const ExperimentOutput& output, const std::filesystem::path& dir) {
  std::ofstream f(dir / "fits.csv");
  CsvWriter csv(f, {"series", "mode", "exponent", "intercept", "residual_rms", "target",
                    "n_points"});
  for (const auto& row : output.fits) {
    csv.field(row.series).field(row.mode).field(row.exponent).field(row.intercept);
    csv.field(row.residual_rms).field(row.target).field(row.n_points);
    csv.end_row();
  }
}

void write_validation(const ExperimentOutput& output, const std::filesystem::path& dir) {
  std::ofstream f(dir / "validation.csv");
  CsvWriter csv(f, {"config", "subset", "d", "T", "data_kind", "alpha", "beta_tr", "beta_te",
                    "lower", "mean_risk", "std_risk", "upper", "pass", "note"});
  for (const auto& row : output.validation) {
    csv.field(row.config_index).field(row.subset).field(row.d).field(row.T).field(row.data_kind);
    csv.field(row.alpha).field(row.beta_tr).field(row.beta_te);
    csv.field(row.lower).field(row.mean_risk).field(row.std_risk).field(row.upper);
    csv.field(row.passed).field(row.note);
    csv.end_row();
  }
}

}  // namespace

SeriesCurve simulate_series(const ProblemConfig& config, const std::vector<std::size_t>& schedule,
                            std::size_t replications, unsigned jobs, bool single_task) {
  if (replications == 0) throw ParameterDomainError("replications must be at least 1");
  const MetaCovariance test = meta_covariance(config.data_spectrum, config.m, config.beta_te);
  std::vector<std::vector<double>> risks(replications);
  std::vector<std::vector<double>> losses(replications);
  parallel_for(replications, jobs, [&](std::size_t r) {
    const RunOptions opts{r, false};
    const Trajectory traj = single_task ? run_single_task_sgd(config, schedule, opts)
                                        : run_maml_sgd(config, schedule, opts);
    risks[r] = trajectory_risks(traj, config.theta_star, test);
    losses[r].reserve(traj.checkpoints.size());
    for (const auto& cp : traj.checkpoints) losses[r].push_back(cp.mean_train_loss);
  });
  SeriesCurve out;
  out.risk = aggregate_risk_curves(schedule, risks);
  out.mean_train_loss.assign(schedule.size(), 0.0);
  for (std::size_t r = 0; r < replications; ++r)
    for (std::size_t k = 0; k < schedule.size(); ++k) out.mean_train_loss[k] += losses[r][k];
  for (auto& v : out.mean_train_loss) v /= static_cast<double>(replications);
  out.per_rep = std::move(risks);
  out.bayes_error = bayes_error(config);
  return out;
}

FitRow fit_power_law(const std::vector<std::size_t>& T, const std::vector<double>& risk) {
  if (T.size() != risk.size()) throw DimensionMismatchError("fit: T and risk sizes differ");
  if (T.size() < 2) throw ParameterDomainError("fit: need at least two points");
  const double n = static_cast<double>(T.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::vector<double> xs, ys;
  for (std::size_t k = 0; k < T.size(); ++k) {
    if (!(risk[k] > 0.0)) throw ParameterDomainError("fit: risks must be positive");
    const double x = std::log(static_cast<double>(T[k]));
    const double y = std::log(risk[k]);
    xs.push_back(x);
    ys.push_back(y);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double denom = n * sxx - sx * sx;
  if (denom == 0.0) throw ParameterDomainError("fit: T values must not all be equal");
  const double slope = (n * sxy - sx * sy) / denom;
  const double intercept = (sy - slope * sx) / n;
  double ss = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const double e = ys[k] - (intercept + slope * xs[k]);
    ss += e * e;
  }
  FitRow fit;
  fit.exponent = -slope;
  fit.intercept = intercept;
  fit.residual_rms = std::sqrt(ss / n);
  fit.n_points = T.size();
  return fit;
}

std::vector<json> bound_battery(std::uint64_t seed, std::size_t count, std::size_t max_d) {
  if (max_d < 2) throw ConfigError("options.battery_max_d: must be at least 2");
  std::vector<json> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    Rng rng(seed, Stream::battery, {k});
    auto pick = [&](std::size_t lo, std::size_t hi) {
      return lo + static_cast<std::size_t>(rng.uniform() * static_cast<double>(hi - lo + 1));
    };
    const std::size_t d = std::min(max_d, pick(2, max_d));
    json data;
    switch (std::min<std::size_t>(3, pick(0, 3))) {
      case 0: data = {{"kind", "log_decay"}, {"p", 1.0 + 2.0 * rng.uniform()}}; break;
      case 1: data = {{"kind", "poly"}, {"q", 1.2 + 1.8 * rng.uniform()}}; break;
      case 2: data = {{"kind", "exp"}}; break;
      default: data = {{"kind", "two_block"}, {"s", std::min(d / 2, pick(1, d / 2))}}; break;
    }
    json task;
    switch (std::min<std::size_t>(2, pick(0, 2))) {
      case 0: task = {{"kind", "zero"}}; break;
      case 1: task = {{"kind", "isotropic"}, {"eta_sq", 0.001 + 0.1 * rng.uniform()}}; break;
      default:
        task = {{"kind", "log_growth"}, {"r", 0.5 + 1.5 * rng.uniform()},
                {"scale", 0.01 + 0.1 * rng.uniform()}};
        break;
    }
    const double lambda_1 = resolve_data_spectrum(data, d).largest();
    json block = {{"d", d},
                  {"T", 100},
                  {"n1", pick(10, 50)},
                  {"n2", pick(5, 20)},
                  {"m", pick(10, 50)},
                  {"beta_tr", (2.0 * rng.uniform() - 1.0) * 0.8 / lambda_1},
                  {"beta_te", rng.uniform() * 0.5 / lambda_1},
                  {"noise_sigma", 0.1 + 0.9 * rng.uniform()},
                  {"alpha_fraction", 0.2 + 0.7 * rng.uniform()},
                  {"data_spectrum", data},
                  {"task_spectrum", task},
                  {"theta_star", {{"kind", "random_unit"}, {"seed", rng.bits() >> 11}}},
                  {"omega0", "zero"}};
    out.push_back(std::move(block));
  }
  return out;
}

ExperimentOutput run_experiment(const ExperimentPlan& plan, const ExperimentContext& context) {
  ExperimentOutput out;
  out.kind = plan.kind;
  switch (plan.kind) {
    case ExperimentKind::phase_transition: run_phase_transition(plan, context, out); break;
    case ExperimentKind::rate_check: run_rate_check(plan, context, out, false); break;
    case ExperimentKind::lr_tradeoff: run_lr_tradeoff(plan, context, out); break;
    case ExperimentKind::stopping_time: run_stopping_time(plan, context, out); break;
    case ExperimentKind::single_vs_meta: run_rate_check(plan, context, out, true); break;
    case ExperimentKind::bound_sandwich: run_bound_sandwich(plan, context, out); break;
  }
  return out;
}

std::vector<std::string> write_outputs(const ExperimentOutput& output,
                                       const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::string> files;
  if (!output.curves.empty()) {
    write_curves(output, dir);
    files.push_back("curves.csv");
    files.push_back("curves_by_rep.csv");
  }
  if (!output.bounds.empty()) {
    write_bounds(output, dir);
    files.push_back("bounds.csv");
  }
  if (!output.stopping.empty()) {
    write_stopping(output, dir);
    files.push_back("stopping.csv");
  }
  if (!output.fits.empty()) {
    write_fits(output, dir);
    files.push_back("fits.csv");
  }
  if (!output.validation.empty()) {
    write_validation(output, dir);
    files.push_back("validation.csv");
  }
  for (const auto& ts : output.tradeoffs) {
    const std::string name = "tradeoff_" + ts.label + ".csv";
    std::ofstream f(dir / name);
    write_tradeoff_csv(f, ts.points);
    files.push_back(name);
  }
  std::sort(files.begin(), files.end());
  for (const auto& name : files)
    if (!std::filesystem::exists(dir / name))
      throw std::runtime_error("failed to write " + (dir / name).string());
  return files;
}

}  // namespace metarisk

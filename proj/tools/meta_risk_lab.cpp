// meta-risk-lab: command-line front end.
//
//   meta-risk-lab run PLAN --out DIR [--jobs N] [--seed S] [--reps R] [--allow-unstable] [key=value ...]
//   meta-risk-lab validate PLAN [key=value ...]
//   meta-risk-lab oracle PLAN [--mc-reps N] [--test-tasks N] [--pairs N] [--jobs N]
//   meta-risk-lab sweep PLAN --out DIR (--beta-tr a:b:n | --beta-tr-scaled a:b:n) [...]
//
// Exit codes: 0 success, 2 invalid plan or parameters, 3 divergence, 1 anything else.

#include <cmath>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "metarisk/config_io.hpp"
#include "metarisk/error.hpp"
#include "metarisk/oracles.hpp"
#include "metarisk/parallel.hpp"
#include "metarisk/run.hpp"
#include "metarisk/version.hpp"

using namespace metarisk;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitOther = 1;
constexpr int kExitInvalid = 2;
constexpr int kExitDivergence = 3;

struct CommonArgs {
  std::string plan;
  std::vector<std::string> overrides;
  unsigned jobs = 0;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> reps;
  bool allow_unstable = false;
};

void add_common(CLI::App* cmd, CommonArgs& a, bool run_flags) {
  cmd->add_option("plan", a.plan, "Plan JSON file (or a run manifest)")->required();
  cmd->add_option("overrides", a.overrides, "key=value overrides, e.g. config.T=500");
  if (!run_flags) return;
  cmd->add_option("--jobs,-j", a.jobs, "Worker threads (default: META_RISK_LAB_JOBS or all cores)");
  cmd->add_option("--seed", a.seed, "Override the plan seed");
  cmd->add_option("--reps", a.reps, "Override the number of replications");
  cmd->add_flag("--allow-unstable", a.allow_unstable,
                "Run even when alpha exceeds the stability threshold (bounds left empty)");
}

ExperimentPlan load(const CommonArgs& a, std::vector<std::string> extra = {}) {
  std::vector<std::string> overrides = a.overrides;
  if (a.seed) overrides.push_back("seed=" + std::to_string(*a.seed));
  if (a.reps) overrides.push_back("replications=" + std::to_string(*a.reps));
  if (a.allow_unstable) overrides.push_back("options.allow_unstable=true");
  for (auto& e : extra) overrides.push_back(std::move(e));
  return load_plan(a.plan, overrides);
}

std::vector<double> parse_grid(const std::string& text) {
  // a:b:n, inclusive linspace
  const auto c1 = text.find(':');
  const auto c2 = text.find(':', c1 == std::string::npos ? c1 : c1 + 1);
  if (c1 == std::string::npos || c2 == std::string::npos)
    throw ConfigError("grid '" + text + "': expected start:stop:count");
  double a = 0, b = 0;
  long n = 0;
  try {
    a = std::stod(text.substr(0, c1));
    b = std::stod(text.substr(c1 + 1, c2 - c1 - 1));
    n = std::stol(text.substr(c2 + 1));
  } catch (const std::exception&) {
    throw ConfigError("grid '" + text + "': expected start:stop:count");
  }
  if (n < 1) throw ConfigError("grid '" + text + "': count must be at least 1");
  std::vector<double> out;
  for (long k = 0; k < n; ++k)
    out.push_back(n == 1 ? a : a + (b - a) * static_cast<double>(k) / static_cast<double>(n - 1));
  return out;
}

int do_run(const ExperimentPlan& plan, const std::string& out_dir, unsigned jobs) {
  ExperimentContext ctx;
  ctx.jobs = jobs == 0 ? default_jobs() : jobs;
  ctx.log = &std::cerr;
  const RunResult r = run_plan(plan, out_dir, ctx);
  for (const auto& f : r.files) std::cout << out_dir << "/" << f << '\n';
  std::cout << out_dir << "/manifest.json\n";
  return kExitOk;
}

json check(const std::string& name, bool passed, const std::string& detail) {
  return {{"check", name}, {"passed", passed}, {"detail", detail}};
}

int do_validate(const ExperimentPlan& plan) {
  json report = {{"plan", plan_to_json(plan)}};
  json checks = json::array();
  json series = json::object();

  std::vector<std::pair<std::string, json>> blocks;
  if (plan.sweep.spectra.empty()) {
    blocks.emplace_back("base", plan.config);
  } else {
    for (const auto& ls : plan.sweep.spectra) {
      json b = plan.config;
      b["data_spectrum"] = ls.spec;
      blocks.emplace_back(ls.label, b);
    }
  }
  for (const auto& [label, block] : blocks) {
    const ProblemConfig c = resolve_config(block, plan.seed, plan.base_dir).config;
    series[label] = derived_quantities(c);
    const double thr = stability_threshold(c);
    checks.push_back(check(label + ": |βtr| < 1/λ1", std::abs(c.beta_tr) * c.data_spectrum.largest() < 1.0,
                           "beta_tr = " + std::to_string(c.beta_tr)));
    checks.push_back(check(label + ": |βte| < 1/λ1", std::abs(c.beta_te) * c.data_spectrum.largest() < 1.0,
                           "beta_te = " + std::to_string(c.beta_te)));
    checks.push_back(check(label + ": α < 1/(c(βtr,Σ)·tr(Σ))",
                           c.alpha < thr || plan.options.allow_unstable,
                           "alpha = " + std::to_string(c.alpha) + ", threshold = " + std::to_string(thr) +
                               (plan.options.allow_unstable ? " (allow_unstable)" : "")));
    const double mu_min = meta_covariance(c.data_spectrum, c.n1, c.beta_tr).min();
    checks.push_back(check(label + ": min μ(H_{n1,βtr}) > 0", mu_min > 0.0,
                           "mu_min = " + std::to_string(mu_min)));
    for (double s : plan.sweep.beta_tr_scaled)
      checks.push_back(check(label + ": sweep βtr·λ1 in (-1, 1)", std::abs(s) < 1.0,
                             "beta_tr_scaled = " + std::to_string(s)));
    for (double b : plan.sweep.beta_tr)
      checks.push_back(check(label + ": sweep |βtr| < 1/λ1",
                             std::abs(b) * c.data_spectrum.largest() < 1.0,
                             "beta_tr = " + std::to_string(b)));
  }
  for (auto T : plan.sweep.T)
    checks.push_back(check("lower bound needs T > 10", T > 10, "T = " + std::to_string(T)));

  bool ok = true;
  for (const auto& c : checks) ok = ok && c.at("passed").get<bool>();
  report["series"] = series;
  report["checks"] = checks;
  report["valid"] = ok;
  std::cout << report.dump(2) << '\n';
  return ok ? kExitOk : kExitInvalid;
}

int do_oracle(const ExperimentPlan& plan, const OracleSuiteOptions& opts) {
  const ProblemConfig c = resolve_config(plan.config, plan.seed, plan.base_dir).config;
  bool ok = true;
  for (const auto& r : run_oracle_suite(c, opts)) {
    std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << '\n';
    ok = ok && r.passed;
  }
  return ok ? kExitOk : kExitOther;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Meta-learning risk lab: MAML trained by averaged SGD on mixed linear regression"};
  app.set_version_flag("--version", std::string(kArtifactName) + " " + kVersion);
  app.require_subcommand(1);

  CommonArgs run_args;
  std::string run_out;
  auto* run = app.add_subcommand("run", "Run an experiment plan");
  add_common(run, run_args, true);
  run->add_option("--out,-o", run_out, "Output directory")->required();

  CommonArgs val_args;
  auto* validate = app.add_subcommand("validate", "Resolve a plan and check every invariant");
  add_common(validate, val_args, false);

  CommonArgs or_args;
  OracleSuiteOptions or_opts;
  auto* oracle = app.add_subcommand("oracle", "Run the oracle checks on the plan's configuration");
  add_common(oracle, or_args, false);
  oracle->add_option("--mc-reps", or_opts.meta_covariance_reps, "Meta-covariance Monte-Carlo draws");
  oracle->add_option("--test-tasks", or_opts.test_tasks, "Test tasks for the risk estimators");
  oracle->add_option("--pairs", or_opts.gradient_pairs, "Random pairs for the gradient checks");
  oracle->add_option("--jobs,-j", or_opts.jobs, "Worker threads");

  CommonArgs sw_args;
  std::string sw_out, sw_beta, sw_scaled;
  auto* sweep = app.add_subcommand("sweep", "Run a plan as a βtr sweep given as start:stop:count");
  add_common(sweep, sw_args, true);
  sweep->add_option("--out,-o", sw_out, "Output directory")->required();
  auto* opt_beta = sweep->add_option("--beta-tr", sw_beta, "βtr grid, absolute");
  auto* opt_scaled = sweep->add_option("--beta-tr-scaled", sw_scaled, "βtr grid in units of 1/λ1");
  opt_beta->excludes(opt_scaled);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInvalid;
  }

  try {
    if (*run) return do_run(load(run_args), run_out, run_args.jobs);
    if (*validate) return do_validate(load(val_args));
    if (*oracle) {
      or_opts.seed = load(or_args).seed;
      return do_oracle(load(or_args), or_opts);
    }
    if (*sweep) {
      if (sw_beta.empty() && sw_scaled.empty())
        throw ConfigError("sweep: give --beta-tr or --beta-tr-scaled");
      const bool scaled = !sw_scaled.empty();
      const json grid = parse_grid(scaled ? sw_scaled : sw_beta);
      std::vector<std::string> extra{"kind=\"lr_tradeoff\"",
                                     std::string(scaled ? "sweep.beta_tr_scaled=" : "sweep.beta_tr=") +
                                         grid.dump(),
                                     std::string(scaled ? "sweep.beta_tr=" : "sweep.beta_tr_scaled=") +
                                         "[]"};
      return do_run(load(sw_args, extra), sw_out, sw_args.jobs);
    }
  } catch (const DivergenceError& e) {
    std::cerr << "error: divergence at iteration " << e.iteration() << ": " << e.what() << '\n';
    return kExitDivergence;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const ParameterDomainError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const PreconditionError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const DimensionMismatchError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitOther;
  }
  return kExitOther;
}

#include "metarisk/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>

#include "metarisk/csv.hpp"
#include "metarisk/error.hpp"
#include "metarisk/parallel.hpp"
#include "metarisk/risk.hpp"

namespace metarisk {

namespace {

struct Shared {
  MetaCovariance train;
  MetaCovariance test;
  EffectiveWeights weights;
  BoundBreakdown out;
  double c = 0.0;
};

Shared prepare(const ProblemConfig& config) {
  validate_config(config, true);
  MetaCovariance train = meta_covariance(config.data_spectrum, config.n1, config.beta_tr);
  MetaCovariance test = meta_covariance(config.data_spectrum, config.m, config.beta_te);
  EffectiveWeights w = effective_meta_weights(train, test, config.alpha, config.T);
  Shared s{train, test, w, {}, 0.0};
  s.out.rate_bundle = rate_bundle(config.data_spectrum, config.task_spectrum, config.beta_tr,
                                  config.n1, config.n2, config.noise_sigma, config.rates);
  s.c = s.out.rate_bundle.c_val;
  s.out.stability_margin = 1.0 - config.alpha * s.c * config.data_spectrum.trace();
  s.out.xi_sum = w.sum();
  s.out.leading_count = w.leading_count();
  s.out.omega_sq.resize(config.d);
  double norm_sq = 0.0;
  double max_ratio = 0.0;
  for (std::size_t i = 0; i < config.d; ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    const double diff = config.omega0(k) - config.theta_star(k);
    s.out.omega_sq[i] = diff * diff;
    norm_sq += diff * diff;
    max_ratio = std::max(max_ratio, test[i] / train[i]);
  }
  const double a = config.alpha;
  s.out.remainder =
      2.0 / (a * a * static_cast<double>(config.T)) * max_ratio * norm_sq;
  return s;
}

// sum_i (1_lead / (T alpha mu_i) + 1_tail) lambda_i omega_i^2
double weighted_init_sum(const ProblemConfig& config, const Shared& s) {
  const double ta = static_cast<double>(config.T) * config.alpha;
  double acc = 0.0;
  for (std::size_t i = 0; i < config.d; ++i) {
    const double w = s.weights.leading_mask[i] ? 1.0 / (ta * s.train[i]) : 1.0;
    acc += w * config.data_spectrum[i] * s.out.omega_sq[i];
  }
  return acc;
}

double bias_sum(const ProblemConfig& config, const Shared& s) {
  double acc = 0.0;
  for (std::size_t i = 0; i < config.d; ++i)
    acc += s.weights.xi[i] * s.out.omega_sq[i] / s.train[i];
  return acc;
}

void fill_upper(const ProblemConfig& config, const BoundOptions& options, Shared& s) {
  const double a = config.alpha;
  const double td = static_cast<double>(config.T);
  auto& b = s.out;
  b.bias = 2.0 / (a * a * td) * bias_sum(config, s);
  b.v1 = b.rate_bundle.f_val;
  const double prefactor = 2.0 / b.stability_margin * b.xi_sum;
  if (options.cross_term == CrossTermForm::main_text) {
    b.v2 = 2.0 * s.c * weighted_init_sum(config, s);
  } else {
    double weight_sum = 0.0;
    double init_sum = 0.0;
    for (std::size_t i = 0; i < config.d; ++i) {
      const double mu = s.train[i];
      if (s.weights.leading_mask[i]) {
        weight_sum += 1.0 / td;
        init_sum += config.data_spectrum[i] * b.omega_sq[i] / mu;
      } else {
        weight_sum += td * a * a * mu * mu;
        init_sum += td * a * config.data_spectrum[i] * b.omega_sq[i];
      }
    }
    const double cross = 4.0 * s.c / (td * a * b.stability_margin) * weight_sum * init_sum;
    b.v2 = prefactor > 0.0 ? cross / prefactor : 0.0;
  }
  b.var_total = prefactor * (b.v1 + b.v2);
  b.upper = b.bias + b.var_total;
}

void fill_lower(const ProblemConfig& config, Shared& s) {
  if (config.T <= 10)
    throw PreconditionError("T > 10 violated: T = " + std::to_string(config.T));
  const double a = config.alpha;
  const double td = static_cast<double>(config.T);
  auto& b = s.out;
  b.lower_bias = 1.0 / (100.0 * a * a * td) * bias_sum(config, s);
  const double block = b.rate_bundle.g_val / 100.0 +
                       b.rate_bundle.b1 / 1000.0 * weighted_init_sum(config, s);
  b.lower_var = 1.0 / static_cast<double>(config.n2) / b.stability_margin * b.xi_sum * block;
  b.lower = b.lower_bias + b.lower_var;
  b.has_lower = true;
}

}  // namespace

BoundBreakdown upper_bound(const ProblemConfig& config, const BoundOptions& options) {
  Shared s = prepare(config);
  fill_upper(config, options, s);
  return s.out;
}

BoundBreakdown lower_bound(const ProblemConfig& config) {
  Shared s = prepare(config);
  fill_lower(config, s);
  return s.out;
}

BoundBreakdown evaluate_bounds(const ProblemConfig& config, const BoundOptions& options) {
  Shared s = prepare(config);
  fill_upper(config, options, s);
  fill_lower(config, s);
  return s.out;
}

EnvelopeConstants default_envelope_constants(const ProblemConfig& config) {
  const auto nu_sq = config.task_spectrum.isotropic_value();
  if (!nu_sq)
    throw ParameterDomainError(
        "default envelope constants need an isotropic task spectrum; supply U_l, U_t, L_l, L_t");
  require_admissible_beta(config.data_spectrum, config.beta_te, "βte");
  const double n2 = static_cast<double>(config.n2);
  const double s2 = config.noise_sigma * config.noise_sigma;
  const double lead = std::pow(1.0 - config.beta_te * config.data_spectrum.largest(), 2);
  const double tail = std::pow(1.0 - config.beta_te * config.data_spectrum.smallest(), 2);
  const double upper_scale = 2.0 * config.rates.c1 * *nu_sq + s2 / n2;
  const double lower_scale = 2.0 * config.rates.b1 * *nu_sq / n2 + s2 / n2;
  return {upper_scale * lead, upper_scale * tail, lower_scale * lead, lower_scale * tail};
}

StoppingEnvelope stopping_time_envelope(const ProblemConfig& config, double epsilon, double p,
                                        const EnvelopeConstants& constants) {
  if (!(epsilon > 0.0)) throw ParameterDomainError("epsilon must be positive");
  if (!(p > 0.0)) throw ParameterDomainError("block parameter p must be positive");
  if (!two_block_size(config.data_spectrum))
    throw ParameterDomainError("stopping-time envelope requires a two-block data spectrum");
  require_admissible_beta(config.data_spectrum, config.beta_tr, "βtr");
  for (double k : {constants.U_l, constants.U_t, constants.L_l, constants.L_t})
    if (!(k >= 0.0) || !std::isfinite(k))
      throw ParameterDomainError("envelope constants must be non-negative and finite");
  const double l1 = config.data_spectrum.largest();
  const double ld = config.data_spectrum.smallest();
  const double lead = 1.0 / std::pow(1.0 - config.beta_tr * l1, 2);
  const double tail = std::pow(1.0 - config.beta_tr * ld, 2);
  const double scale = std::pow(epsilon, -1.0 / p);
  StoppingEnvelope e;
  e.constants = constants;
  e.log_t_lower = scale * std::pow(constants.L_l * lead + constants.L_t * tail, 1.0 / p);
  e.log_t_upper = scale * std::pow(constants.U_l * lead + constants.U_t * tail, 1.0 / p);
  e.t_lower = std::exp(e.log_t_lower);
  e.t_upper = std::exp(e.log_t_upper);
  return e;
}

TradeoffShape tradeoff_shape(const Spectrum& sigma, double beta_tr, double A, double B) {
  require_admissible_beta(sigma, beta_tr, "βtr");
  return {A / std::pow(1.0 - beta_tr * sigma.largest(), 2),
          B * std::pow(1.0 - beta_tr * sigma.smallest(), 2)};
}

std::vector<TradeoffPoint> tradeoff_curve(const ProblemConfig& config_template,
                                          std::span<const double> beta_tr_grid,
                                          const TradeoffOptions& options) {
  if (beta_tr_grid.empty()) throw ParameterDomainError("beta_tr grid is empty");
  std::vector<TradeoffPoint> points(beta_tr_grid.size());
  for (std::size_t g = 0; g < beta_tr_grid.size(); ++g) {
    points[g].beta_tr = beta_tr_grid[g];
    ProblemConfig config = config_template;
    config.beta_tr = beta_tr_grid[g];
    try {
      points[g].bounds = config.T > 10 ? evaluate_bounds(config, options.bound_options)
                                       : upper_bound(config, options.bound_options);
    } catch (const Error& e) {
      points[g].bound_error = e.what();
    }
  }
  if (!options.simulate) return points;
  if (options.replications == 0) throw ParameterDomainError("replications must be at least 1");

  const std::size_t reps = options.replications;
  std::vector<double> risks(beta_tr_grid.size() * reps, 0.0);
  std::vector<std::string> errors(beta_tr_grid.size() * reps);
  const std::vector<std::size_t> schedule{config_template.T};
  parallel_for(risks.size(), options.jobs, [&](std::size_t job) {
    const std::size_t g = job / reps;
    ProblemConfig config = config_template;
    config.beta_tr = beta_tr_grid[g];
    try {
      const Trajectory traj = run_maml_sgd(config, schedule, {job % reps, false});
      risks[job] = excess_risk_closed(traj.omega_final, config.theta_star, config.data_spectrum,
                                      config.m, config.beta_te);
    } catch (const Error& e) {
      errors[job] = e.what();
    }
  });
  for (std::size_t g = 0; g < beta_tr_grid.size(); ++g) {
    std::vector<std::vector<double>> per_rep;
    for (std::size_t r = 0; r < reps; ++r) {
      const std::size_t job = g * reps + r;
      if (!errors[job].empty()) {
        points[g].simulation_error = errors[job];
        break;
      }
      per_rep.push_back({risks[job]});
    }
    if (!points[g].simulation_error.empty()) continue;
    const RiskCurve curve = aggregate_risk_curves(schedule, per_rep);
    points[g].empirical_mean = curve.mean[0];
    points[g].empirical_std = curve.std[0];
  }
  return points;
}

void write_tradeoff_csv(std::ostream& out, std::span<const TradeoffPoint> points) {
  CsvWriter csv(out, {"beta_tr", "bias", "v1", "v2", "upper", "lower", "empirical_mean",
                      "empirical_std"});
  for (const auto& p : points) {
    csv.field(p.beta_tr);
    if (p.bounds) {
      csv.field(p.bounds->bias).field(p.bounds->v1).field(p.bounds->v2).field(p.bounds->upper);
      if (p.bounds->has_lower)
        csv.field(p.bounds->lower);
      else
        csv.empty();
    } else {
      csv.empty().empty().empty().empty().empty();
    }
    csv.field(p.empirical_mean).field(p.empirical_std);
    csv.end_row();
  }
}

void to_json(nlohmann::json& j, const BoundBreakdown& b) {
  j = nlohmann::json{{"bias", b.bias},
                     {"var_total", b.var_total},
                     {"v1", b.v1},
                     {"v2", b.v2},
                     {"xi_sum", b.xi_sum},
                     {"upper", b.upper},
                     {"remainder", b.remainder},
                     {"stability_margin", b.stability_margin},
                     {"leading_count", b.leading_count},
                     {"rates", b.rate_bundle}};
  if (b.has_lower) {
    j["lower_bias"] = b.lower_bias;
    j["lower_var"] = b.lower_var;
    j["lower"] = b.lower;
  } else {
    j["lower"] = nullptr;
  }
}

void to_json(nlohmann::json& j, const StoppingEnvelope& e) {
  j = nlohmann::json{{"log_t_lower", e.log_t_lower},
                     {"log_t_upper", e.log_t_upper},
                     {"U_l", e.constants.U_l},
                     {"U_t", e.constants.U_t},
                     {"L_l", e.constants.L_l},
                     {"L_t", e.constants.L_t}};
}

}  // namespace metarisk

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "metarisk/maml_sgd.hpp"
#include "metarisk/meta_model.hpp"

namespace metarisk {

/// Weighting of the initialization cross term inside the upper bound's variance.
///  - main_text: 2/(1 - alpha c tr) * sum(Xi) * V2 with
///    V2 = 2c sum_i (1_lead/(T alpha mu_i) + 1_tail) lambda_i omega_i^2.
///  - appendix: 4c/(T alpha (1 - alpha c tr)) * [sum_i (1_lead/T + 1_tail T alpha^2 mu_i^2)]
///    * [sum_i (1_lead/mu_i + 1_tail T alpha) lambda_i omega_i^2].
enum class CrossTermForm { main_text, appendix };

struct BoundOptions {
  CrossTermForm cross_term = CrossTermForm::main_text;
};

struct BoundBreakdown {
  double bias = 0.0;
  double var_total = 0.0;
  double v1 = 0.0;
  double v2 = 0.0;
  double xi_sum = 0.0;
  double upper = 0.0;
  double lower_bias = 0.0;
  double lower_var = 0.0;
  double lower = 0.0;
  bool has_lower = false;
  RateBundle rate_bundle;
  /// (omega0_i - theta*_i)^2 in the shared eigenbasis.
  std::vector<double> omega_sq;
  /// 2/(alpha^2 T) max_i mu_i(H_{m,beta_te}) / mu_i(H_{n1,beta_tr}) ||omega0 - theta*||^2.
  double remainder = 0.0;
  /// 1 - alpha c(beta_tr) tr(Sigma), positive under the step-size precondition.
  double stability_margin = 0.0;
  std::size_t leading_count = 0;
};

/// Upper bound: Bias = 2/(alpha^2 T) sum_i Xi_i omega_i^2 / mu_i(H_{n1,beta_tr}),
/// Var = 2/(1 - alpha c tr(Sigma)) sum_i Xi_i [V1 + V2] with V1 = f(beta_tr, n2).
/// Throws PreconditionError naming "α < 1/(c(βtr,Σ)·tr(Σ))" when the step size
/// is too large and ParameterDomainError for inadmissible beta.
BoundBreakdown upper_bound(const ProblemConfig& config, const BoundOptions& options = {});

/// Lower bound: 1/(100 alpha^2 T) sum_i Xi_i omega_i^2 / mu_i
///   + (1/n2) (1/(1 - alpha c tr)) sum_i Xi_i
///     [g(beta_tr, n1)/100 + b1/1000 sum_i (1_lead/(T alpha mu_i) + 1_tail) lambda_i omega_i^2].
/// Requires T > 10. Only the lower_* fields and the shared fields are filled.
BoundBreakdown lower_bound(const ProblemConfig& config);

/// Both bounds in one breakdown.
BoundBreakdown evaluate_bounds(const ProblemConfig& config, const BoundOptions& options = {});

/// Constants of the stopping-time envelope.
struct EnvelopeConstants {
  double U_l = 0.0;
  double U_t = 0.0;
  double L_l = 0.0;
  double L_t = 0.0;
};

/// U_l = (2 c1 nu^2 + sigma^2/n2)(1 - beta_te lambda_1)^2,
/// U_t = (2 c1 nu^2 + sigma^2/n2)(1 - beta_te lambda_d)^2,
/// L_l, L_t the same with 2 b1 nu^2 / n2 in place of 2 c1 nu^2,
/// where nu^2 is the common value of an isotropic task spectrum.
EnvelopeConstants default_envelope_constants(const ProblemConfig& config);

struct StoppingEnvelope {
  double log_t_lower = 0.0;
  double log_t_upper = 0.0;
  double t_lower = 0.0;  ///< exp(log_t_lower); may be inf
  double t_upper = 0.0;
  EnvelopeConstants constants;
};

/// log t = eps^{-1/p} [K_l / (1 - beta_tr lambda_1)^2 + K_t (1 - beta_tr lambda_d)^2]^{1/p}
/// with K = L for the lower and K = U for the upper envelope. Requires a
/// two-block data spectrum, epsilon > 0 and p > 0.
StoppingEnvelope stopping_time_envelope(const ProblemConfig& config, double epsilon, double p,
                                        const EnvelopeConstants& constants);

/// The two beta_tr-dependent factors of the tradeoff estimate:
/// leading = A / (1 - beta_tr lambda_1)^2 and tail = B (1 - beta_tr lambda_d)^2.
struct TradeoffShape {
  double leading = 0.0;
  double tail = 0.0;
  double total() const { return leading + tail; }
};

TradeoffShape tradeoff_shape(const Spectrum& sigma, double beta_tr, double A, double B);

struct TradeoffOptions {
  bool simulate = false;
  std::size_t replications = 20;
  unsigned jobs = 1;
  BoundOptions bound_options;
};

struct TradeoffPoint {
  double beta_tr = 0.0;
  std::optional<BoundBreakdown> bounds;
  /// Message of the bound evaluation failure for this point, if any.
  std::string bound_error;
  std::optional<double> empirical_mean;
  std::optional<double> empirical_std;
  std::string simulation_error;
};

/// Evaluates the bounds at every beta_tr of the grid and, when requested, the
/// replication-mean final excess risk of MAML-SGD (replication r uses the
/// streams of replication index r). Per-point failures are recorded, not thrown.
std::vector<TradeoffPoint> tradeoff_curve(const ProblemConfig& config_template,
                                          std::span<const double> beta_tr_grid,
                                          const TradeoffOptions& options = {});

/// Columns: beta_tr, bias, v1, v2, upper, lower, empirical_mean, empirical_std.
void write_tradeoff_csv(std::ostream& out, std::span<const TradeoffPoint> points);

void to_json(nlohmann::json& j, const BoundBreakdown& b);
void to_json(nlohmann::json& j, const StoppingEnvelope& e);

}  // namespace metarisk

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "metarisk/maml_sgd.hpp"
#include "metarisk/meta_model.hpp"
#include "metarisk/risk.hpp"

namespace metarisk {

/// Outcome of one oracle comparison. `observed` and `tolerance` are in the
/// units described by `detail`.
struct OracleResult {
  std::string name;
  bool passed = false;
  double observed = 0.0;
  double tolerance = 0.0;
  std::string detail;
};

/// Closed-form meta-covariance eigenvalues under test; replaceable so that a
/// deliberately broken formula can be checked to fail.
using MetaCovarianceFormula =
    std::function<std::vector<double>(const Spectrum& sigma, std::size_t n, double beta)>;

MetaCovarianceFormula default_meta_covariance_formula();

/// Closed form against the Monte-Carlo estimate. Passes when at least
/// `min_fraction` of the entries lie within 3 standard errors and, for
/// beta = 0, the estimate equals the closed form exactly.
OracleResult meta_covariance_oracle(const Spectrum& sigma, std::size_t n, double beta,
                                    std::size_t reps, std::uint64_t seed, unsigned jobs = 1,
                                    const MetaCovarianceFormula& formula = {},
                                    double min_fraction = 0.95);

/// Dense meta data of a task: B = X_out (I - beta/n1 X_in^T X_in) / sqrt(n2)
/// and gamma = (y_out - beta/n1 X_out X_in^T y_in) / sqrt(n2), so that
/// meta_loss = 1/2 ||B omega - gamma||^2.
struct DenseMetaData {
  Eigen::MatrixXd B;
  Vector gamma;
};

DenseMetaData dense_meta_data(const TaskBatch& task, double beta_tr);

/// Random (omega, task) pairs drawn from the configuration's distributions.
struct GradientCase {
  Vector omega;
  TaskBatch task;
};

std::vector<GradientCase> gradient_cases(const ProblemConfig& config, std::size_t pairs,
                                         std::uint64_t seed);

/// max over pairs of max_j |g_fd_j - g_j| / ||g||_inf with central differences
/// of meta_loss at the given step.
OracleResult gradient_fd_oracle(const ProblemConfig& config, std::size_t pairs,
                                std::uint64_t seed, double step = 1e-5, double tol = 1e-5);

/// max over pairs of ||meta_gradient - B^T (B omega - gamma)||_inf.
OracleResult gradient_dense_oracle(const ProblemConfig& config, std::size_t pairs,
                                   std::uint64_t seed, double tol = 1e-12);

/// |excess_risk_mc - excess_risk_closed| <= 3 std_error (exact equality when the
/// Monte-Carlo estimate has zero variance).
OracleResult risk_mc_oracle(const ProblemConfig& config, const Vector& omega_bar,
                            std::size_t num_test_tasks, std::uint64_t seed, unsigned jobs = 1);

/// Monte-Carlo test loss at omega = theta* against bayes_error.
OracleResult bayes_oracle(const ProblemConfig& config, std::size_t num_test_tasks,
                          std::uint64_t seed, unsigned jobs = 1);

struct OracleSuiteOptions {
  std::size_t meta_covariance_reps = 100000;
  std::size_t gradient_pairs = 50;
  std::size_t test_tasks = 10000;
  std::uint64_t seed = 0;
  unsigned jobs = 1;
};

/// Meta-covariance (at n1, beta_tr), both gradient checks, the risk estimator
/// at omega_bar = omega0 and the Bayes error, all on one configuration.
std::vector<OracleResult> run_oracle_suite(const ProblemConfig& config,
                                           const OracleSuiteOptions& options);

}  // namespace metarisk

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "metarisk/maml_sgd.hpp"
#include "metarisk/meta_model.hpp"
#include "metarisk/spectra.hpp"

namespace metarisk {

/// Test loss of the optimal initialization omega = theta*:
/// 1/2 tr(Sigma_theta H_{m,beta_te}) + sigma^2 beta_te^2 tr(Sigma^2) / (2m) + sigma^2 / 2.
double bayes_error(const TaskSpectrum& task_spectrum, const Spectrum& data_spectrum,
                   std::size_t m, double beta_te, double noise_sigma);

/// The same expression with the adaptation-noise term written as
/// sigma^2 beta_te^2 / (2m), i.e. without the tr(Sigma^2) factor. It agrees with
/// bayes_error only when tr(Sigma^2) = 1; kept for comparison reports.
double bayes_error_without_trace(const TaskSpectrum& task_spectrum,
                                 const Spectrum& data_spectrum, std::size_t m, double beta_te,
                                 double noise_sigma);

double bayes_error(const ProblemConfig& config);

/// 1/2 sum_i mu_i(H_{m,beta_te}) (omega_bar_i - theta*_i)^2.
double excess_risk_closed(const Vector& omega_bar, const Vector& theta_star,
                          const Spectrum& data_spectrum, std::size_t m, double beta_te);

double excess_risk_closed(const Vector& omega_bar, const Vector& theta_star,
                          const MetaCovariance& test_covariance);

struct McEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
  std::size_t samples = 0;
};

/// Average squared-error loss 1/2 (<x, A(omega; Z)> - y)^2 over sampled test
/// tasks, each with an m-point adaptation set Z and one query point. Test
/// tasks are drawn in chunks of 1024 with independent streams keyed by
/// (seed, chunk), so the estimate does not depend on `jobs`. The standard error
/// is the delete-one jackknife.
McEstimate test_loss_mc(const Vector& omega, const ProblemConfig& config,
                        std::size_t num_test_tasks, std::uint64_t seed, unsigned jobs = 1);

/// test_loss_mc minus bayes_error(config). Requires num_test_tasks >= 100.
McEstimate excess_risk_mc(const Vector& omega_bar, const ProblemConfig& config,
                          std::size_t num_test_tasks, std::uint64_t seed, unsigned jobs = 1);

struct RiskPoint {
  std::size_t t = 0;
  double risk = 0.0;
};

/// Smallest checkpoint t with risk < epsilon, or nullopt when never attained.
/// Throws on an empty curve, non-increasing t or epsilon <= 0.
std::optional<std::size_t> empirical_stopping_time(std::span<const RiskPoint> curve,
                                                   double epsilon);

/// Replication mean and standard deviation of excess-risk curves recorded on a
/// common checkpoint schedule.
struct RiskCurve {
  std::vector<std::size_t> t;
  std::vector<double> mean;
  std::vector<double> std;
  std::size_t n_reps = 0;

  std::vector<RiskPoint> mean_points() const;
};

/// per_rep[r][k] is the risk of replication r at checkpoint t[k]. Sums run in
/// replication order, so the result only depends on the input values.
RiskCurve aggregate_risk_curves(std::span<const std::size_t> t,
                                const std::vector<std::vector<double>>& per_rep);

/// Excess risk at every checkpoint of a trajectory.
std::vector<double> trajectory_risks(const Trajectory& trajectory, const Vector& theta_star,
                                     const MetaCovariance& test_covariance);

}  // namespace metarisk

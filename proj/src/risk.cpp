#include "metarisk/risk.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "metarisk/error.hpp"
#include "metarisk/parallel.hpp"
#include "metarisk/random.hpp"

namespace metarisk {

namespace {

constexpr std::size_t kTestChunk = 1024;

double half_trace_task_h(const TaskSpectrum& task, const MetaCovariance& h) {
  if (task.dim() != h.dim())
    throw DimensionMismatchError("task spectrum has dimension " + std::to_string(task.dim()) +
                                 ", expected " + std::to_string(h.dim()));
  double acc = 0.0;
  for (std::size_t i = 0; i < h.dim(); ++i) acc += task[i] * h[i];
  return 0.5 * acc;
}

}  // namespace

double bayes_error(const TaskSpectrum& task_spectrum, const Spectrum& data_spectrum,
                   std::size_t m, double beta_te, double noise_sigma) {
  const MetaCovariance h = meta_covariance(data_spectrum, m, beta_te);
  const double s2 = noise_sigma * noise_sigma;
  return half_trace_task_h(task_spectrum, h) +
         s2 * beta_te * beta_te * data_spectrum.trace_sq() / (2.0 * static_cast<double>(m)) +
         0.5 * s2;
}

double bayes_error_without_trace(const TaskSpectrum& task_spectrum,
                                 const Spectrum& data_spectrum, std::size_t m, double beta_te,
                                 double noise_sigma) {
  const MetaCovariance h = meta_covariance(data_spectrum, m, beta_te);
  const double s2 = noise_sigma * noise_sigma;
  return half_trace_task_h(task_spectrum, h) +
         s2 * beta_te * beta_te / (2.0 * static_cast<double>(m)) + 0.5 * s2;
}

double bayes_error(const ProblemConfig& config) {
  return bayes_error(config.task_spectrum, config.data_spectrum, config.m, config.beta_te,
                     config.noise_sigma);
}

double excess_risk_closed(const Vector& omega_bar, const Vector& theta_star,
                          const MetaCovariance& test_covariance) {
  const auto d = static_cast<Eigen::Index>(test_covariance.dim());
  if (omega_bar.size() != d || theta_star.size() != d)
    throw DimensionMismatchError("excess_risk_closed: iterate and theta* must have dimension " +
                                 std::to_string(d));
  double acc = 0.0;
  for (Eigen::Index i = 0; i < d; ++i) {
    const double diff = omega_bar(i) - theta_star(i);
    acc += test_covariance[static_cast<std::size_t>(i)] * diff * diff;
  }
  return 0.5 * acc;
}

double excess_risk_closed(const Vector& omega_bar, const Vector& theta_star,
                          const Spectrum& data_spectrum, std::size_t m, double beta_te) {
  return excess_risk_closed(omega_bar, theta_star, meta_covariance(data_spectrum, m, beta_te));
}

McEstimate test_loss_mc(const Vector& omega, const ProblemConfig& config,
                        std::size_t num_test_tasks, std::uint64_t seed, unsigned jobs) {
  if (num_test_tasks < 2) throw ParameterDomainError("need at least two test tasks");
  validate_config(config, false);
  if (omega.size() != static_cast<Eigen::Index>(config.d))
    throw DimensionMismatchError("omega has dimension " + std::to_string(omega.size()) +
                                 ", expected " + std::to_string(config.d));

  std::vector<double> losses(num_test_tasks);
  const std::size_t chunks = (num_test_tasks + kTestChunk - 1) / kTestChunk;
  parallel_for(chunks, jobs, [&](std::size_t c) {
    Rng rng(seed, Stream::test_tasks, {c});
    Matrix x_adapt, x_query;
    Vector y_adapt, y_query;
    const std::size_t end = std::min(num_test_tasks, (c + 1) * kTestChunk);
    for (std::size_t k = c * kTestChunk; k < end; ++k) {
      const Vector theta = sample_task(config.theta_star, config.task_spectrum, rng);
      sample_dataset_into(theta, config.data_spectrum, config.m, config.noise_sigma, rng,
                          x_adapt, y_adapt);
      sample_dataset_into(theta, config.data_spectrum, 1, config.noise_sigma, rng, x_query,
                          y_query);
      const Vector adapted = inner_adapt(omega, config.beta_te, x_adapt, y_adapt);
      const Vector residual = x_query * adapted - y_query;
      losses[k] = 0.5 * residual(0) * residual(0);
    }
  });

  const double n = static_cast<double>(num_test_tasks);
  double sum = 0.0;
  for (double l : losses) sum += l;
  const double mean = sum / n;
  double ss = 0.0;
  for (double l : losses) {
    const double loo = (sum - l) / (n - 1.0);
    ss += (loo - mean) * (loo - mean);
  }
  return {mean, std::sqrt((n - 1.0) / n * ss), num_test_tasks};
}

McEstimate excess_risk_mc(const Vector& omega_bar, const ProblemConfig& config,
                          std::size_t num_test_tasks, std::uint64_t seed, unsigned jobs) {
  if (num_test_tasks < 100) throw ParameterDomainError("excess_risk_mc needs at least 100 test tasks");
  McEstimate est = test_loss_mc(omega_bar, config, num_test_tasks, seed, jobs);
  est.estimate -= bayes_error(config);
  return est;
}

std::optional<std::size_t> empirical_stopping_time(std::span<const RiskPoint> curve,
                                                   double epsilon) {
  if (curve.empty()) throw ParameterDomainError("risk curve is empty");
  if (!(epsilon > 0.0)) throw ParameterDomainError("epsilon must be positive");
  for (std::size_t i = 1; i < curve.size(); ++i)
    if (curve[i].t <= curve[i - 1].t)
      throw ParameterDomainError("risk curve iterations must be strictly increasing");
  for (const auto& p : curve)
    if (p.risk < epsilon) return p.t;
  return std::nullopt;
}

std::vector<RiskPoint> RiskCurve::mean_points() const {
  std::vector<RiskPoint> out(t.size());
  for (std::size_t k = 0; k < t.size(); ++k) out[k] = {t[k], mean[k]};
  return out;
}

RiskCurve aggregate_risk_curves(std::span<const std::size_t> t,
                                const std::vector<std::vector<double>>& per_rep) {
  if (per_rep.empty()) throw ParameterDomainError("no replications to aggregate");
  RiskCurve out;
  out.t.assign(t.begin(), t.end());
  out.n_reps = per_rep.size();
  out.mean.assign(t.size(), 0.0);
  out.std.assign(t.size(), 0.0);
  for (const auto& rep : per_rep) {
    if (rep.size() != t.size())
      throw DimensionMismatchError("replication curve length does not match the schedule");
    for (std::size_t k = 0; k < t.size(); ++k) out.mean[k] += rep[k];
  }
  const double n = static_cast<double>(per_rep.size());
  for (auto& v : out.mean) v /= n;
  if (per_rep.size() > 1) {
    for (const auto& rep : per_rep)
      for (std::size_t k = 0; k < t.size(); ++k)
        out.std[k] += (rep[k] - out.mean[k]) * (rep[k] - out.mean[k]);
    for (auto& v : out.std) v = std::sqrt(v / (n - 1.0));
  }
  return out;
}

std::vector<double> trajectory_risks(const Trajectory& trajectory, const Vector& theta_star,
                                     const MetaCovariance& test_covariance) {
  std::vector<double> out;
  out.reserve(trajectory.checkpoints.size());
  for (const auto& cp : trajectory.checkpoints)
    out.push_back(excess_risk_closed(cp.omega_bar, theta_star, test_covariance));
  return out;
}

}  // namespace metarisk

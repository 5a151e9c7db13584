#include "metarisk/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "metarisk/error.hpp"

namespace metarisk {

MetaCovarianceFormula default_meta_covariance_formula() {
  return [](const Spectrum& sigma, std::size_t n, double beta) {
    const auto h = meta_covariance(sigma, n, beta);
    return std::vector<double>(h.mu().begin(), h.mu().end());
  };
}

OracleResult meta_covariance_oracle(const Spectrum& sigma, std::size_t n, double beta,
                                    std::size_t reps, std::uint64_t seed, unsigned jobs,
                                    const MetaCovarianceFormula& formula, double min_fraction) {
  const auto closed = formula ? formula(sigma, n, beta)
                              : default_meta_covariance_formula()(sigma, n, beta);
  if (closed.size() != sigma.dim())
    throw DimensionMismatchError("meta-covariance formula returned the wrong dimension");
  const auto est = estimate_meta_covariance_mc(sigma, n, beta, reps, seed, jobs, true);

  std::size_t within = 0;
  double worst_z = 0.0;
  bool exact = true;
  for (std::size_t i = 0; i < closed.size(); ++i) {
    const double diff = std::abs(est.mean[i] - closed[i]);
    if (diff != 0.0) exact = false;
    const double se = est.std_error[i];
    const double z = se > 0.0 ? diff / se : (diff == 0.0 ? 0.0 : INFINITY);
    worst_z = std::max(worst_z, z);
    if (z <= 3.0) ++within;
  }
  const double fraction = static_cast<double>(within) / static_cast<double>(closed.size());

  OracleResult r;
  r.name = "meta_covariance";
  r.observed = fraction;
  r.tolerance = min_fraction;
  r.passed = fraction >= min_fraction && (beta != 0.0 || exact);
  std::ostringstream os;
  os << "fraction within 3 SE = " << fraction << " (need >= " << min_fraction
     << "), max |z| = " << worst_z << ", max |offdiag| = " << est.max_abs_offdiag
     << ", d = " << sigma.dim() << ", n = " << n << ", beta = " << beta
     << ", reps = " << est.reps;
  if (beta == 0.0) os << (exact ? ", exact at beta = 0" : ", NOT exact at beta = 0");
  r.detail = os.str();
  return r;
}

DenseMetaData dense_meta_data(const TaskBatch& task, double beta_tr) {
  const auto d = task.x_in.cols();
  const double n1 = static_cast<double>(task.x_in.rows());
  const double scale = 1.0 / std::sqrt(static_cast<double>(task.x_out.rows()));
  const Eigen::MatrixXd xin = task.x_in;
  const Eigen::MatrixXd xout = task.x_out;
  const Eigen::MatrixXd P =
      Eigen::MatrixXd::Identity(d, d) - (beta_tr / n1) * (xin.transpose() * xin);
  DenseMetaData out;
  out.B = scale * (xout * P);
  out.gamma = scale * (task.y_out - (beta_tr / n1) * (xout * (xin.transpose() * task.y_in)));
  return out;
}

std::vector<GradientCase> gradient_cases(const ProblemConfig& config, std::size_t pairs,
                                         std::uint64_t seed) {
  validate_config(config, false);
  std::vector<GradientCase> cases;
  cases.reserve(pairs);
  for (std::size_t k = 0; k < pairs; ++k) {
    Rng rng(seed, Stream::oracle, {k});
    GradientCase c;
    c.omega = Vector(static_cast<Eigen::Index>(config.d));
    rng.fill_normal(c.omega);
    c.task.theta = sample_task(config.theta_star, config.task_spectrum, rng);
    sample_dataset_into(c.task.theta, config.data_spectrum, config.n1, config.noise_sigma, rng,
                        c.task.x_in, c.task.y_in);
    sample_dataset_into(c.task.theta, config.data_spectrum, config.n2, config.noise_sigma, rng,
                        c.task.x_out, c.task.y_out);
    cases.push_back(std::move(c));
  }
  return cases;
}

OracleResult gradient_fd_oracle(const ProblemConfig& config, std::size_t pairs,
                                std::uint64_t seed, double step, double tol) {
  double worst = 0.0;
  for (const auto& c : gradient_cases(config, pairs, seed)) {
    const Vector g = meta_gradient(c.omega, config.beta_tr, c.task);
    const double scale = std::max(g.lpNorm<Eigen::Infinity>(), 1e-300);
    Vector w = c.omega;
    for (Eigen::Index j = 0; j < w.size(); ++j) {
      const double w0 = w(j);
      w(j) = w0 + step;
      const double up = meta_loss(w, config.beta_tr, c.task);
      w(j) = w0 - step;
      const double down = meta_loss(w, config.beta_tr, c.task);
      w(j) = w0;
      const double fd = (up - down) / (2.0 * step);
      worst = std::max(worst, std::abs(fd - g(j)) / scale);
    }
  }
  OracleResult r;
  r.name = "gradient_finite_difference";
  r.observed = worst;
  r.tolerance = tol;
  r.passed = worst < tol;
  std::ostringstream os;
  os << "max relative error = " << worst << " over " << pairs << " pairs, d = " << config.d
     << ", step = " << step;
  r.detail = os.str();
  return r;
}

OracleResult gradient_dense_oracle(const ProblemConfig& config, std::size_t pairs,
                                   std::uint64_t seed, double tol) {
  double worst = 0.0;
  for (const auto& c : gradient_cases(config, pairs, seed)) {
    const Vector g = meta_gradient(c.omega, config.beta_tr, c.task);
    const auto dense = dense_meta_data(c.task, config.beta_tr);
    const Vector ref = dense.B.transpose() * (dense.B * c.omega - dense.gamma);
    worst = std::max(worst, (g - ref).lpNorm<Eigen::Infinity>());
  }
  OracleResult r;
  r.name = "gradient_dense";
  r.observed = worst;
  r.tolerance = tol;
  r.passed = worst < tol;
  std::ostringstream os;
  os << "max |matrix-free - dense| = " << worst << " over " << pairs << " pairs, d = "
     << config.d;
  r.detail = os.str();
  return r;
}

OracleResult risk_mc_oracle(const ProblemConfig& config, const Vector& omega_bar,
                            std::size_t num_test_tasks, std::uint64_t seed, unsigned jobs) {
  const double closed = excess_risk_closed(omega_bar, config.theta_star, config.data_spectrum,
                                           config.m, config.beta_te);
  const auto mc = excess_risk_mc(omega_bar, config, num_test_tasks, seed, jobs);
  const double diff = std::abs(mc.estimate - closed);
  OracleResult r;
  r.name = "risk_mc";
  r.observed = diff;
  r.tolerance = 3.0 * mc.std_error;
  r.passed = mc.std_error > 0.0 ? diff <= r.tolerance : diff == 0.0;
  std::ostringstream os;
  os << "closed = " << closed << ", mc = " << mc.estimate << " +/- " << mc.std_error
     << ", tasks = " << mc.samples;
  r.detail = os.str();
  return r;
}

OracleResult bayes_oracle(const ProblemConfig& config, std::size_t num_test_tasks,
                          std::uint64_t seed, unsigned jobs) {
  const double corrected = bayes_error(config);
  const double literal =
      bayes_error_without_trace(config.task_spectrum, config.data_spectrum, config.m,
                                config.beta_te, config.noise_sigma);
  const auto mc = test_loss_mc(config.theta_star, config, num_test_tasks, seed, jobs);
  const double diff = std::abs(mc.estimate - corrected);
  OracleResult r;
  r.name = "bayes_error";
  r.observed = diff;
  r.tolerance = 3.0 * mc.std_error;
  r.passed = diff <= r.tolerance;
  std::ostringstream os;
  os << "formula = " << corrected << ", mc = " << mc.estimate << " +/- " << mc.std_error
     << ", without tr(Sigma^2) = " << literal << " (|z| = "
     << (mc.std_error > 0.0 ? std::abs(mc.estimate - literal) / mc.std_error : 0.0) << ")";
  r.detail = os.str();
  return r;
}

std::vector<OracleResult> run_oracle_suite(const ProblemConfig& config,
                                           const OracleSuiteOptions& options) {
  validate_config(config, false);
  std::vector<OracleResult> out;
  out.push_back(meta_covariance_oracle(config.data_spectrum, config.n1, config.beta_tr,
                                       options.meta_covariance_reps, options.seed,
                                       options.jobs));
  out.push_back(gradient_fd_oracle(config, options.gradient_pairs, options.seed));
  out.push_back(gradient_dense_oracle(config, options.gradient_pairs, options.seed));
  out.push_back(
      risk_mc_oracle(config, config.omega0, options.test_tasks, options.seed, options.jobs));
  out.push_back(bayes_oracle(config, options.test_tasks, options.seed, options.jobs));
  return out;
}

}  // namespace metarisk

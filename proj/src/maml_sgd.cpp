#include "metarisk/maml_sgd.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <set>
#include <sstream>
#include <string>

#include "metarisk/config_io.hpp"
#include "metarisk/csv.hpp"
#include "metarisk/error.hpp"

namespace metarisk {

namespace {

Eigen::Map<const Vector> as_vector(std::span<const double> values) {
  return {values.data(), static_cast<Eigen::Index>(values.size())};
}

void require_dim(const char* what, Eigen::Index got, std::size_t want) {
  if (static_cast<std::size_t>(got) != want) {
    std::ostringstream msg;
    msg << what << " has dimension " << got << ", expected " << want;
    throw DimensionMismatchError(msg.str());
  }
}

}  // namespace

double stability_threshold(const ProblemConfig& config) {
  return 1.0 / (c_rate(config.data_spectrum, config.beta_tr, config.rates) *
                config.data_spectrum.trace());
}

void validate_config(const ProblemConfig& config, bool require_stable_alpha) {
  if (config.d == 0) throw ParameterDomainError("d must be at least 1");
  if (config.T == 0) throw ParameterDomainError("T must be at least 1");
  if (config.n1 == 0 || config.n2 == 0 || config.m == 0)
    throw ParameterDomainError("n1, n2 and m must be at least 1");
  require_dim("data_spectrum", static_cast<Eigen::Index>(config.data_spectrum.dim()), config.d);
  require_dim("task_spectrum", static_cast<Eigen::Index>(config.task_spectrum.dim()), config.d);
  require_dim("theta_star", config.theta_star.size(), config.d);
  require_dim("omega0", config.omega0.size(), config.d);
  if (!(config.alpha > 0.0) || !std::isfinite(config.alpha))
    throw ParameterDomainError("step size alpha must be positive and finite");
  if (!(config.noise_sigma >= 0.0) || !std::isfinite(config.noise_sigma))
    throw ParameterDomainError("noise_sigma must be non-negative");
  require_admissible_beta(config.data_spectrum, config.beta_tr, "βtr");
  require_admissible_beta(config.data_spectrum, config.beta_te, "βte");
  if (require_stable_alpha) {
    const double threshold = stability_threshold(config);
    if (!(config.alpha < threshold)) {
      std::ostringstream msg;
      msg << "α < 1/(c(βtr,Σ)·tr(Σ)) violated: alpha = " << format_double(config.alpha)
          << ", threshold = " << format_double(threshold);
      throw PreconditionError(msg.str());
    }
  }
}

Vector sample_task(const Vector& task_mean, const TaskSpectrum& task_spectrum, Rng& rng) {
  require_dim("task mean", task_mean.size(), task_spectrum.dim());
  Vector theta(task_mean.size());
  rng.fill_normal(theta);
  theta = task_mean + (as_vector(task_spectrum.values()).array().sqrt() * theta.array()).matrix();
  return theta;
}

void sample_dataset_into(const Vector& theta, const Spectrum& data_spectrum, std::size_t n,
                         double noise_sigma, Rng& rng, Matrix& x, Vector& y) {
  require_dim("theta", theta.size(), data_spectrum.dim());
  const auto d = static_cast<Eigen::Index>(data_spectrum.dim());
  x.resize(static_cast<Eigen::Index>(n), d);
  rng.fill_normal(x);
  x.array().rowwise() *= as_vector(data_spectrum.values()).array().sqrt().transpose();
  y.resize(static_cast<Eigen::Index>(n));
  rng.fill_normal(y);
  y = x * theta + noise_sigma * y;
}

Dataset sample_dataset(const Vector& theta, const Spectrum& data_spectrum, std::size_t n,
                       double noise_sigma, Rng& rng) {
  if (n == 0) throw ParameterDomainError("dataset size n must be at least 1");
  Dataset out;
  sample_dataset_into(theta, data_spectrum, n, noise_sigma, rng, out.x, out.y);
  return out;
}

Vector inner_adapt(const Vector& omega, double beta, const Matrix& x, const Vector& y) {
  if (x.rows() == 0) throw ParameterDomainError("inner_adapt needs at least one sample");
  require_dim("omega", omega.size(), static_cast<std::size_t>(x.cols()));
  require_dim("y", y.size(), static_cast<std::size_t>(x.rows()));
  const Vector residual = x * omega - y;
  return omega - (beta / static_cast<double>(x.rows())) * (x.transpose() * residual);
}

Vector meta_gradient(const Vector& omega, double beta_tr, const TaskBatch& task, double& loss) {
  const Vector adapted = inner_adapt(omega, beta_tr, task.x_in, task.y_in);
  const Vector residual = task.x_out * adapted - task.y_out;
  const double n2 = static_cast<double>(task.x_out.rows());
  loss = residual.squaredNorm() / (2.0 * n2);
  const Vector outer = (task.x_out.transpose() * residual) / n2;
  const double step = beta_tr / static_cast<double>(task.x_in.rows());
  const Vector inner = task.x_in * outer;
  return outer - step * (task.x_in.transpose() * inner);
}

Vector meta_gradient(const Vector& omega, double beta_tr, const TaskBatch& task) {
  double loss = 0.0;
  return meta_gradient(omega, beta_tr, task, loss);
}

double meta_loss(const Vector& omega, double beta_tr, const TaskBatch& task) {
  const Vector adapted = inner_adapt(omega, beta_tr, task.x_in, task.y_in);
  const Vector residual = task.x_out * adapted - task.y_out;
  return residual.squaredNorm() / (2.0 * static_cast<double>(task.x_out.rows()));
}

std::vector<std::size_t> default_checkpoint_schedule(std::size_t T,
                                                     std::span<const std::size_t> extra) {
  if (T == 0) throw ParameterDomainError("T must be at least 1");
  std::set<std::size_t> ts;
  for (std::size_t t = 1; t <= std::min<std::size_t>(T, 10); ++t) ts.insert(t);
  for (double g = 1.0; g <= static_cast<double>(T); g *= 1.3)
    ts.insert(static_cast<std::size_t>(std::ceil(g - 1e-9)));
  for (auto t : extra)
    if (t >= 1 && t <= T) ts.insert(t);
  ts.insert(T);
  return {ts.begin(), ts.end()};
}

std::vector<std::size_t> dense_checkpoint_schedule(std::size_t T) {
  std::vector<std::size_t> ts(T);
  for (std::size_t t = 0; t < T; ++t) ts[t] = t + 1;
  return ts;
}

namespace {

void check_schedule(std::span<const std::size_t> schedule, std::size_t T) {
  if (schedule.empty()) throw ParameterDomainError("checkpoint schedule is empty");
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    if (schedule[i] == 0 || (i > 0 && schedule[i] <= schedule[i - 1]))
      throw ParameterDomainError("checkpoint schedule must be strictly increasing from 1");
  }
  if (schedule.back() != T)
    throw ParameterDomainError("checkpoint schedule must end at T = " + std::to_string(T));
}

Trajectory run_loop(const ProblemConfig& config, std::span<const std::size_t> schedule,
                    const RunOptions& options, bool single_task) {
  validate_config(config, false);
  check_schedule(schedule, config.T);

  const double beta_tr = single_task ? 0.0 : config.beta_tr;
  Rng task_rng(config.seed, Stream::task, {options.replication});
  Rng data_rng(config.seed, Stream::data, {options.replication});
  const double guard = 1e6 * (config.theta_star.norm() + 1.0);

  Trajectory traj;
  traj.fingerprint = config_fingerprint(config);
  traj.checkpoints.reserve(schedule.size());

  Vector omega = config.omega0;
  Vector sum = Vector::Zero(static_cast<Eigen::Index>(config.d));
  TaskBatch task;
  std::size_t next_cp = 0;
  double window_loss = 0.0;
  std::size_t window_steps = 0;

  for (std::size_t k = 0; k < config.T; ++k) {
    sum += omega;

    task.theta = single_task ? config.theta_star
                             : sample_task(config.theta_star, config.task_spectrum, task_rng);
    sample_dataset_into(task.theta, config.data_spectrum, config.n1, config.noise_sigma, data_rng,
                        task.x_in, task.y_in);
    sample_dataset_into(task.theta, config.data_spectrum, config.n2, config.noise_sigma, data_rng,
                        task.x_out, task.y_out);
    double loss = 0.0;
    const Vector grad = meta_gradient(omega, beta_tr, task, loss);
    window_loss += loss;
    ++window_steps;

    if (k + 1 == schedule[next_cp]) {
      Checkpoint cp;
      cp.t = k + 1;
      cp.omega_bar = sum / static_cast<double>(k + 1);
      if (options.record_iterates) cp.newest_iterate = omega;
      cp.mean_train_loss = window_loss / static_cast<double>(window_steps);
      window_loss = 0.0;
      window_steps = 0;
      traj.checkpoints.push_back(std::move(cp));
      ++next_cp;
    }

    omega -= config.alpha * grad;
    const double norm = omega.norm();
    if (!std::isfinite(norm) || norm > guard) {
      std::ostringstream msg;
      msg << "SGD diverged at iteration " << (k + 1) << ": ||omega|| = " << format_double(norm)
          << " exceeds guard " << format_double(guard);
      throw DivergenceError(k + 1, msg.str());
    }
  }
  traj.omega_final = traj.checkpoints.back().omega_bar;
  return traj;
}

}  // namespace

Trajectory run_maml_sgd(const ProblemConfig& config, std::span<const std::size_t> schedule,
                        const RunOptions& options) {
  return run_loop(config, schedule, options, false);
}

Trajectory run_single_task_sgd(const ProblemConfig& config,
                               std::span<const std::size_t> schedule,
                               const RunOptions& options) {
  return run_loop(config, schedule, options, true);
}

void write_trajectory_csv(std::ostream& out, const Trajectory& trajectory) {
  CsvWriter csv(out, {"t", "index", "value"});
  for (const auto& cp : trajectory.checkpoints) {
    for (Eigen::Index i = 0; i < cp.omega_bar.size(); ++i) {
      csv.field(cp.t).field(static_cast<std::size_t>(i + 1)).field(cp.omega_bar(i));
      csv.end_row();
    }
  }
}

Vector random_unit_vector(std::size_t d, std::uint64_t seed) {
  if (d == 0) throw ParameterDomainError("dimension must be at least 1");
  Rng rng(seed, Stream::theta_star);
  Vector v(static_cast<Eigen::Index>(d));
  rng.fill_normal(v);
  return v / v.norm();
}

}  // namespace metarisk

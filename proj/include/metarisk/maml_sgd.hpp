#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "metarisk/meta_model.hpp"
#include "metarisk/random.hpp"
#include "metarisk/spectra.hpp"

namespace metarisk {

using Vector = Eigen::VectorXd;
/// Design matrices are stored row-major: one sample per row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Everything needed to simulate one-step MAML trained by averaged SGD on
/// mixed linear regression and to evaluate its bounds.
struct ProblemConfig {
  std::size_t d = 0;
  std::size_t T = 0;
  std::size_t n1 = 40;  ///< inner-loop (train) samples per task
  std::size_t n2 = 10;  ///< validation samples per task
  std::size_t m = 40;   ///< test-time adaptation samples
  double alpha = 0.0;   ///< outer step size
  double beta_tr = 0.0;
  double beta_te = 0.0;
  double noise_sigma = 0.5;
  Vector theta_star;
  Vector omega0;
  Spectrum data_spectrum;
  TaskSpectrum task_spectrum;
  std::uint64_t seed = 0;
  RateParams rates;
};

/// Largest admissible outer step size 1/(c(beta_tr, Sigma) tr(Sigma)).
double stability_threshold(const ProblemConfig& config);

/// Checks dimensions, sample counts and |beta| < 1/lambda_1. When
/// `require_stable_alpha` is set also checks alpha < 1/(c(beta_tr) tr(Sigma)).
/// Throws ParameterDomainError / DimensionMismatchError / PreconditionError.
void validate_config(const ProblemConfig& config, bool require_stable_alpha);

/// One sampled task with its train (in) and validation (out) datasets.
struct TaskBatch {
  Vector theta;
  Matrix x_in;
  Vector y_in;
  Matrix x_out;
  Vector y_out;
};

/// theta = task_mean + Sigma_theta^{1/2} z with z standard normal.
Vector sample_task(const Vector& task_mean, const TaskSpectrum& task_spectrum, Rng& rng);

struct Dataset {
  Matrix x;
  Vector y;
};

/// Rows x_j = Lambda^{1/2} z_j, labels y_j = <x_j, theta> + N(0, noise_sigma^2).
Dataset sample_dataset(const Vector& theta, const Spectrum& data_spectrum, std::size_t n,
                       double noise_sigma, Rng& rng);

/// In-place variant reusing the buffers of `out`.
void sample_dataset_into(const Vector& theta, const Spectrum& data_spectrum, std::size_t n,
                         double noise_sigma, Rng& rng, Matrix& x, Vector& y);

/// One gradient step on the half mean squared error of (X, y) starting at omega:
/// omega - (beta/n) X^T (X omega - y). Never forms X^T X.
Vector inner_adapt(const Vector& omega, double beta, const Matrix& x, const Vector& y);

/// Loss of the adapted model on the validation set:
/// 1/(2 n2) || X_out A(omega) - y_out ||^2.
double meta_loss(const Vector& omega, double beta_tr, const TaskBatch& task);

/// Gradient of meta_loss with respect to omega, matrix-free:
/// (I - beta/n1 X_in^T X_in) (1/n2) X_out^T (X_out A(omega) - y_out).
Vector meta_gradient(const Vector& omega, double beta_tr, const TaskBatch& task);

/// Gradient and loss together; `loss` receives meta_loss(omega, ...).
Vector meta_gradient(const Vector& omega, double beta_tr, const TaskBatch& task, double& loss);

/// Checkpoint iterations: every t <= 10, ceil(1.3^k) deduplicated, the extra
/// iterations requested (those in [1, T]) and T itself, sorted.
std::vector<std::size_t> default_checkpoint_schedule(std::size_t T,
                                                     std::span<const std::size_t> extra = {});

/// t = 1..T.
std::vector<std::size_t> dense_checkpoint_schedule(std::size_t T);

struct Checkpoint {
  std::size_t t = 0;
  /// (1/t) sum_{k=0}^{t-1} omega_k
  Vector omega_bar;
  /// omega_{t-1}, the newest iterate included in omega_bar; empty unless
  /// iterates are recorded.
  Vector newest_iterate;
  /// Mean meta-training loss of the steps since the previous checkpoint.
  double mean_train_loss = 0.0;
};

struct Trajectory {
  std::vector<Checkpoint> checkpoints;
  Vector omega_final;  ///< omega_bar_T
  std::string fingerprint;
};

struct RunOptions {
  /// Index of the replication; selects the random streams.
  std::uint64_t replication = 0;
  bool record_iterates = false;
};

/// Algorithm: for t = 0..T-1 accumulate omega_t into the running average, then
/// draw a fresh task and take omega_{t+1} = omega_t - alpha * meta_gradient.
/// Emits omega_bar_t at each scheduled checkpoint. Throws DivergenceError if
/// an iterate is non-finite or its norm exceeds 1e6 (||theta*|| + 1).
Trajectory run_maml_sgd(const ProblemConfig& config, std::span<const std::size_t> schedule,
                        const RunOptions& options = {});

/// Same loop with every task parameter fixed at theta* and beta_tr = 0.
Trajectory run_single_task_sgd(const ProblemConfig& config,
                               std::span<const std::size_t> schedule,
                               const RunOptions& options = {});

/// Columns: t, index, value (omega_bar_t coordinates, 1-based index).
void write_trajectory_csv(std::ostream& out, const Trajectory& trajectory);

/// Unit-norm vector with a seeded uniformly random direction.
Vector random_unit_vector(std::size_t d, std::uint64_t seed);

}  // namespace metarisk

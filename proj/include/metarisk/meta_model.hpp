#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "json.hpp"

#include "metarisk/spectra.hpp"

namespace metarisk {

/// Constants of the fourth-moment condition plus the sub-Gaussian norm of the
/// whitened data. Defaults are the Gaussian values.
struct RateParams {
  double c1 = 3.0;
  double b1 = 2.0;
  double sigma_x = 1.0;
  /// Replaces the higher-order moment constant C(beta, Sigma) for every beta
  /// when set. Unset means the Gaussian closed form (see C_gauss).
  std::optional<double> C;
};

/// Throws ParameterDomainError unless |beta| < 1 / lambda_1. `name` is used in
/// the message, e.g. "βtr".
void require_admissible_beta(const Spectrum& sigma, double beta, const char* name = "β");

/// Eigenvalues mu_i of H_{n,beta} = E[(I - beta/n X^T X) Sigma (I - beta/n X^T X)]
/// for Gaussian rows, diagonal in the eigenbasis of Sigma.
class MetaCovariance {
 public:
  std::span<const double> mu() const noexcept { return mu_; }
  double operator[](std::size_t i) const { return mu_[i]; }
  std::size_t dim() const noexcept { return mu_.size(); }
  std::size_t n() const noexcept { return n_; }
  double beta() const noexcept { return beta_; }
  double trace() const;
  double min() const;

  friend MetaCovariance meta_covariance(const Spectrum& sigma, std::size_t n, double beta);

 private:
  MetaCovariance(std::vector<double> mu, std::size_t n, double beta)
      : mu_(std::move(mu)), n_(n), beta_(beta) {}

  std::vector<double> mu_;
  std::size_t n_ = 0;
  double beta_ = 0.0;
};

/// mu_i = (1 - beta lambda_i)^2 lambda_i + beta^2/n (lambda_i^3 + lambda_i tr(Sigma^2)).
MetaCovariance meta_covariance(const Spectrum& sigma, std::size_t n, double beta);

/// Monte-Carlo estimate of diag(H_{n,beta}) with per-entry standard errors.
struct MetaCovarianceEstimate {
  std::vector<double> mean;
  std::vector<double> std_error;
  /// max_{i != j} |mean of the (i, j) entry|; zero when off-diagonals are not
  /// tracked or d == 1.
  double max_abs_offdiag = 0.0;
  bool offdiag_tracked = false;
  std::size_t reps = 0;
};

/// Averages (I - beta/n X^T X) Sigma (I - beta/n X^T X) over `reps` Gaussian
/// draws of X (n x d). Replications are split into fixed-size chunks with
/// their own seeded streams, so the result does not depend on `jobs`.
MetaCovarianceEstimate estimate_meta_covariance_mc(const Spectrum& sigma, std::size_t n,
                                                   double beta, std::size_t reps,
                                                   std::uint64_t seed, unsigned jobs = 1,
                                                   bool track_offdiag = true);

/// Higher-order moment constant for Gaussian data: 1 at beta = 0, otherwise
/// 210 (1 + beta^4 tr(Sigma^2)^2 / (1 - beta lambda_1)^4).
double C_gauss(const Spectrum& sigma, double beta);

/// C(beta, Sigma) honouring RateParams::C.
double C_value(const Spectrum& sigma, double beta, const RateParams& params);

/// c(beta, Sigma) = c1 (1 + 8|beta| lambda_1 sqrt(C) sigma_x^2
///                       + 64 sqrt(C) sigma_x^4 beta^2 tr(Sigma^2)).
double c_rate(const Spectrum& sigma, double beta, const RateParams& params);

/// f = c(beta, Sigma) tr(Sigma_theta Sigma)
///     + 4 c1 sigma^2 sigma_x^2 beta^2 sqrt(C) tr(Sigma^2) + sigma^2 / n.
double f_rate(const Spectrum& sigma, const TaskSpectrum& task, double beta, std::size_t n,
              double noise_sigma, const RateParams& params);

/// g = sigma^2 + b1 tr(Sigma_theta H_{n,beta}) + beta^2 1{beta <= 0} b1 tr(Sigma^2) / n.
double g_rate(const Spectrum& sigma, const TaskSpectrum& task, double beta, std::size_t n,
              double noise_sigma, const RateParams& params);

struct RateBundle {
  double c_val = 0.0;
  double C_val = 0.0;
  double f_val = 0.0;
  double g_val = 0.0;
  double c1 = 0.0;
  double b1 = 0.0;
  double sigma_x = 0.0;
};

/// Rates as they enter the bounds: f at (beta_tr, n2), g at (beta_tr, n1).
RateBundle rate_bundle(const Spectrum& sigma, const TaskSpectrum& task, double beta_tr,
                       std::size_t n1, std::size_t n2, double noise_sigma,
                       const RateParams& params);

/// Per-eigendirection effective meta weights and the leading/tail split at
/// threshold mu_i(H_{n1,beta_tr}) >= 1/(alpha T).
struct EffectiveWeights {
  std::vector<double> xi;
  std::vector<bool> leading_mask;
  std::vector<double> mu_train;
  std::vector<double> mu_test;
  double alpha = 0.0;
  std::size_t T = 0;

  double sum() const;
  std::size_t leading_count() const;
  double threshold() const { return 1.0 / (alpha * static_cast<double>(T)); }
};

EffectiveWeights effective_meta_weights(const Spectrum& sigma, double alpha, std::size_t T,
                                        std::size_t n1, double beta_tr, std::size_t m,
                                        double beta_te);

/// Same, from precomputed train/test meta-covariances.
EffectiveWeights effective_meta_weights(const MetaCovariance& train, const MetaCovariance& test,
                                        double alpha, std::size_t T);

void to_json(nlohmann::json& j, const RateParams& p);
void to_json(nlohmann::json& j, const RateBundle& b);
void to_json(nlohmann::json& j, const EffectiveWeights& w);

/// Columns: index, lambda, mu_train, mu_test, xi, leading.
void write_weights_csv(std::ostream& out, const Spectrum& sigma, const EffectiveWeights& w);

}  // namespace metarisk

#include "metarisk/meta_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>

#include <Eigen/Dense>

#include "metarisk/csv.hpp"
#include "metarisk/error.hpp"
#include "metarisk/parallel.hpp"
#include "metarisk/random.hpp"

namespace metarisk {

void require_admissible_beta(const Spectrum& sigma, double beta, const char* name) {
  if (sigma.empty()) throw ParameterDomainError("empty data spectrum");
  if (!std::isfinite(beta) || !(std::abs(beta) * sigma.largest() < 1.0)) {
    std::ostringstream msg;
    msg << "|" << name << "| < 1/λ1 violated: " << name << " = " << format_double(beta)
        << ", 1/λ1 = " << format_double(1.0 / sigma.largest());
    throw ParameterDomainError(msg.str());
  }
}

double MetaCovariance::trace() const { return std::accumulate(mu_.begin(), mu_.end(), 0.0); }

double MetaCovariance::min() const { return *std::min_element(mu_.begin(), mu_.end()); }

MetaCovariance meta_covariance(const Spectrum& sigma, std::size_t n, double beta) {
  if (n == 0) throw ParameterDomainError("meta-covariance sample count n must be at least 1");
  require_admissible_beta(sigma, beta);
  const double tr2 = sigma.trace_sq();
  const double scale = beta * beta / static_cast<double>(n);
  std::vector<double> mu(sigma.dim());
  for (std::size_t i = 0; i < sigma.dim(); ++i) {
    const double l = sigma[i];
    const double shrink = 1.0 - beta * l;
    mu[i] = shrink * shrink * l + scale * (l * l * l + l * tr2);
    if (!(mu[i] > 0.0))
      throw ParameterDomainError("meta-covariance eigenvalue mu_" + std::to_string(i + 1) +
                                 " is not positive");
  }
  return MetaCovariance(std::move(mu), n, beta);
}

namespace {

constexpr std::size_t kMcChunk = 1024;

struct ChunkMoments {
  std::size_t count = 0;
  Eigen::VectorXd mean;
  Eigen::VectorXd m2;
  Eigen::MatrixXd sum_gram;       // sum of X^T X
  Eigen::MatrixXd sum_gram_sandwich;  // sum of X^T X Lambda X^T X
};

}  // namespace

MetaCovarianceEstimate estimate_meta_covariance_mc(const Spectrum& sigma, std::size_t n,
                                                   double beta, std::size_t reps,
                                                   std::uint64_t seed, unsigned jobs,
                                                   bool track_offdiag) {
  if (n == 0) throw ParameterDomainError("meta-covariance sample count n must be at least 1");
  if (reps < 100) throw ParameterDomainError("Monte-Carlo meta-covariance needs reps >= 100");
  require_admissible_beta(sigma, beta);

  const auto d = static_cast<Eigen::Index>(sigma.dim());
  const Eigen::Map<const Eigen::VectorXd> lambda(sigma.values().data(), d);
  const Eigen::VectorXd sqrt_lambda = lambda.array().sqrt();
  const double step = beta / static_cast<double>(n);
  const std::size_t n_chunks = (reps + kMcChunk - 1) / kMcChunk;
  std::vector<ChunkMoments> chunks(n_chunks);

  parallel_for(n_chunks, jobs, [&](std::size_t c) {
    const std::size_t begin = c * kMcChunk;
    const std::size_t end = std::min(reps, begin + kMcChunk);
    Rng rng(seed, Stream::meta_covariance_mc, {c});
    ChunkMoments acc;
    acc.mean = Eigen::VectorXd::Zero(d);
    acc.m2 = Eigen::VectorXd::Zero(d);
    if (track_offdiag) {
      acc.sum_gram = Eigen::MatrixXd::Zero(d, d);
      acc.sum_gram_sandwich = Eigen::MatrixXd::Zero(d, d);
    }
    Eigen::MatrixXd x(static_cast<Eigen::Index>(n), d);
    Eigen::MatrixXd gram(d, d);
    Eigen::VectorXd diag(d);
    for (std::size_t r = begin; r < end; ++r) {
      rng.fill_normal(x);
      x = x * sqrt_lambda.asDiagonal();
      gram.noalias() = x.transpose() * x;
      // diag of (I - s G) L (I - s G) = l_i - 2 s G_ii l_i + s^2 sum_k G_ik^2 l_k
      for (Eigen::Index i = 0; i < d; ++i) {
        double quad = 0.0;
        for (Eigen::Index k = 0; k < d; ++k) quad += gram(k, i) * gram(k, i) * lambda(k);
        diag(i) = lambda(i) - 2.0 * step * gram(i, i) * lambda(i) + step * step * quad;
      }
      ++acc.count;
      const Eigen::VectorXd delta = diag - acc.mean;
      acc.mean += delta / static_cast<double>(acc.count);
      acc.m2.array() += delta.array() * (diag - acc.mean).array();
      if (track_offdiag) {
        acc.sum_gram += gram;
        acc.sum_gram_sandwich.noalias() += gram * lambda.asDiagonal() * gram;
      }
    }
    chunks[c] = std::move(acc);
  });

  // Merge chunk moments in index order (Chan et al. pairwise update).
  ChunkMoments total = std::move(chunks.front());
  for (std::size_t c = 1; c < n_chunks; ++c) {
    const auto& b = chunks[c];
    const double na = static_cast<double>(total.count);
    const double nb = static_cast<double>(b.count);
    const double nt = na + nb;
    const Eigen::VectorXd delta = b.mean - total.mean;
    total.mean += delta * (nb / nt);
    total.m2 += b.m2 + (delta.array().square() * (na * nb / nt)).matrix();
    total.count += b.count;
    if (track_offdiag) {
      total.sum_gram += b.sum_gram;
      total.sum_gram_sandwich += b.sum_gram_sandwich;
    }
  }

  MetaCovarianceEstimate est;
  est.reps = total.count;
  const double nt = static_cast<double>(total.count);
  est.mean.assign(total.mean.data(), total.mean.data() + d);
  est.std_error.resize(sigma.dim());
  for (Eigen::Index i = 0; i < d; ++i)
    est.std_error[i] = std::sqrt(std::max(0.0, total.m2(i)) / (nt - 1.0) / nt);
  est.offdiag_tracked = track_offdiag;
  if (track_offdiag) {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < d; ++i) {
      for (Eigen::Index j = 0; j < d; ++j) {
        if (i == j) continue;
        const double g = total.sum_gram(i, j) / nt;
        const double gg = total.sum_gram_sandwich(i, j) / nt;
        const double entry = -step * g * (lambda(i) + lambda(j)) + step * step * gg;
        worst = std::max(worst, std::abs(entry));
      }
    }
    est.max_abs_offdiag = worst;
  }
  return est;
}

double C_gauss(const Spectrum& sigma, double beta) {
  require_admissible_beta(sigma, beta);
  if (beta == 0.0) return 1.0;
  const double tr2 = sigma.trace_sq();
  const double denom = 1.0 - beta * sigma.largest();
  const double b2 = beta * beta;
  return 210.0 * (1.0 + b2 * b2 * tr2 * tr2 / (denom * denom * denom * denom));
}

double C_value(const Spectrum& sigma, double beta, const RateParams& params) {
  if (params.C) {
    require_admissible_beta(sigma, beta);
    if (!(*params.C > 0.0)) throw ParameterDomainError("moment constant C must be positive");
    return *params.C;
  }
  return C_gauss(sigma, beta);
}

namespace {

void require_rate_params(const RateParams& params) {
  if (!(params.c1 > 0.0)) throw ParameterDomainError("c1 must be positive");
  if (!(params.b1 > 0.0)) throw ParameterDomainError("b1 must be positive");
  if (!(params.sigma_x > 0.0)) throw ParameterDomainError("sigma_x must be positive");
}

}  // namespace

double c_rate(const Spectrum& sigma, double beta, const RateParams& params) {
  require_rate_params(params);
  const double root_c = std::sqrt(C_value(sigma, beta, params));
  const double sx2 = params.sigma_x * params.sigma_x;
  return params.c1 * (1.0 + 8.0 * std::abs(beta) * sigma.largest() * root_c * sx2 +
                      64.0 * root_c * sx2 * sx2 * beta * beta * sigma.trace_sq());
}

double f_rate(const Spectrum& sigma, const TaskSpectrum& task, double beta, std::size_t n,
              double noise_sigma, const RateParams& params) {
  if (n == 0) throw ParameterDomainError("f rate sample count n must be at least 1");
  const double tr_task = trace_product(task, sigma);
  const double c = c_rate(sigma, beta, params);
  const double root_c = std::sqrt(C_value(sigma, beta, params));
  const double s2 = noise_sigma * noise_sigma;
  return c * tr_task +
         4.0 * params.c1 * s2 * params.sigma_x * params.sigma_x * beta * beta * root_c *
             sigma.trace_sq() +
         s2 / static_cast<double>(n);
}

double g_rate(const Spectrum& sigma, const TaskSpectrum& task, double beta, std::size_t n,
              double noise_sigma, const RateParams& params) {
  require_rate_params(params);
  if (task.dim() != sigma.dim())
    throw DimensionMismatchError("task spectrum dimension " + std::to_string(task.dim()) +
                                 " does not match data dimension " +
                                 std::to_string(sigma.dim()));
  const MetaCovariance h = meta_covariance(sigma, n, beta);
  double tr_task_h = 0.0;
  for (std::size_t i = 0; i < sigma.dim(); ++i) tr_task_h += task[i] * h[i];
  const double indicator = beta <= 0.0 ? 1.0 : 0.0;
  return noise_sigma * noise_sigma + params.b1 * tr_task_h +
         beta * beta * indicator * params.b1 * sigma.trace_sq() / static_cast<double>(n);
}

RateBundle rate_bundle(const Spectrum& sigma, const TaskSpectrum& task, double beta_tr,
                       std::size_t n1, std::size_t n2, double noise_sigma,
                       const RateParams& params) {
  RateBundle b;
  b.C_val = C_value(sigma, beta_tr, params);
  b.c_val = c_rate(sigma, beta_tr, params);
  b.f_val = f_rate(sigma, task, beta_tr, n2, noise_sigma, params);
  b.g_val = g_rate(sigma, task, beta_tr, n1, noise_sigma, params);
  b.c1 = params.c1;
  b.b1 = params.b1;
  b.sigma_x = params.sigma_x;
  return b;
}

double EffectiveWeights::sum() const { return std::accumulate(xi.begin(), xi.end(), 0.0); }

std::size_t EffectiveWeights::leading_count() const {
  return static_cast<std::size_t>(std::count(leading_mask.begin(), leading_mask.end(), true));
}

EffectiveWeights effective_meta_weights(const MetaCovariance& train, const MetaCovariance& test,
                                        double alpha, std::size_t T) {
  if (!(alpha > 0.0)) throw ParameterDomainError("step size alpha must be positive");
  if (T == 0) throw ParameterDomainError("iteration count T must be at least 1");
  if (train.dim() != test.dim())
    throw DimensionMismatchError("train and test meta-covariances differ in dimension");
  const double td = static_cast<double>(T);
  const double threshold = 1.0 / (alpha * td);
  EffectiveWeights w;
  w.alpha = alpha;
  w.T = T;
  w.mu_train.assign(train.mu().begin(), train.mu().end());
  w.mu_test.assign(test.mu().begin(), test.mu().end());
  w.xi.resize(train.dim());
  w.leading_mask.resize(train.dim());
  for (std::size_t i = 0; i < train.dim(); ++i) {
    const bool leading = train[i] >= threshold;
    w.leading_mask[i] = leading;
    w.xi[i] = leading ? test[i] / (td * train[i]) : td * alpha * alpha * train[i] * test[i];
  }
  return w;
}

EffectiveWeights effective_meta_weights(const Spectrum& sigma, double alpha, std::size_t T,
                                        std::size_t n1, double beta_tr, std::size_t m,
                                        double beta_te) {
  return effective_meta_weights(meta_covariance(sigma, n1, beta_tr),
                                meta_covariance(sigma, m, beta_te), alpha, T);
}

void to_json(nlohmann::json& j, const RateParams& p) {
  j = nlohmann::json{{"c1", p.c1}, {"b1", p.b1}, {"sigma_x", p.sigma_x}};
  j["C"] = p.C ? nlohmann::json(*p.C) : nlohmann::json(nullptr);
}

void to_json(nlohmann::json& j, const RateBundle& b) {
  j = nlohmann::json{{"c", b.c_val},   {"C", b.C_val},   {"f", b.f_val},
                     {"g", b.g_val},   {"c1", b.c1},     {"b1", b.b1},
                     {"sigma_x", b.sigma_x}};
}

void to_json(nlohmann::json& j, const EffectiveWeights& w) {
  j = nlohmann::json{{"alpha", w.alpha},
                     {"T", w.T},
                     {"threshold", w.threshold()},
                     {"xi", w.xi},
                     {"xi_sum", w.sum()},
                     {"leading_count", w.leading_count()},
                     {"mu_train", w.mu_train},
                     {"mu_test", w.mu_test}};
  auto mask = nlohmann::json::array();
  for (bool b : w.leading_mask) mask.push_back(b);
  j["leading"] = std::move(mask);
}

void write_weights_csv(std::ostream& out, const Spectrum& sigma, const EffectiveWeights& w) {
  if (w.xi.size() != sigma.dim())
    throw DimensionMismatchError("weights and spectrum differ in dimension");
  CsvWriter csv(out, {"index", "lambda", "mu_train", "mu_test", "xi", "leading"});
  for (std::size_t i = 0; i < sigma.dim(); ++i) {
    csv.field(i + 1).field(sigma[i]).field(w.mu_train[i]).field(w.mu_test[i]).field(w.xi[i]);
    csv.field(static_cast<bool>(w.leading_mask[i]));
    csv.end_row();
  }
}

}  // namespace metarisk

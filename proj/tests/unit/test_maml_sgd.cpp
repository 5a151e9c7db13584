#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "metarisk/error.hpp"
#include "metarisk/maml_sgd.hpp"
#include "metarisk/oracles.hpp"
#include "metarisk/risk.hpp"
#include "test_util.hpp"

using namespace metarisk;
using metarisk::testing::small_config;

TEST(Sampling, NoiselessProjection) {
  Vector theta = Vector::Zero(3);
  theta(0) = 1.0;
  Rng rng(1, Stream::data, {0});
  const auto ds = sample_dataset(theta, Spectrum::from_values({1.0, 0.5, 0.2}), 50, 0.0, rng);
  for (Eigen::Index j = 0; j < ds.x.rows(); ++j) EXPECT_EQ(ds.y(j), ds.x(j, 0));
}

TEST(Sampling, SampleVariance) {
  Rng rng(2, Stream::data, {0});
  const auto ds = sample_dataset(Vector::Zero(1), Spectrum::from_values({1.0}), 100000, 0.0, rng);
  const double mean = ds.x.col(0).mean();
  const double var = (ds.x.col(0).array() - mean).square().sum() / (ds.x.rows() - 1);
  EXPECT_NEAR(var, 1.0, 0.02);
}

TEST(Sampling, SecondMomentDiagonal) {
  const auto s = Spectrum::from_values({2.0, 0.5, 0.1});
  Rng rng(3, Stream::data, {0});
  const auto ds = sample_dataset(Vector::Zero(3), s, 100000, 0.0, rng);
  const double n = static_cast<double>(ds.x.rows());
  for (Eigen::Index i = 0; i < 3; ++i) {
    const Eigen::ArrayXd sq = ds.x.col(i).array().square();
    const double m = sq.mean();
    const double se = std::sqrt((sq - m).square().sum() / (n - 1) / n);
    EXPECT_LE(std::abs(m - s[static_cast<std::size_t>(i)]), 3.0 * se) << i;
  }
}

TEST(Sampling, TaskMeanAndZeroCovariance) {
  Vector mean(2);
  mean << 0.3, -0.7;
  Rng rng(4, Stream::task, {0});
  const Vector t = sample_task(mean, zero_task_spectrum(2), rng);
  EXPECT_EQ(t(0), 0.3);
  EXPECT_EQ(t(1), -0.7);
}

TEST(InnerAdapt, Examples) {
  Matrix x(1, 1);
  x << 2.0;
  Vector y(1);
  y << 4.0;
  EXPECT_DOUBLE_EQ(inner_adapt(Vector::Zero(1), 0.25, x, y)(0), 2.0);

  Matrix X(4, 3);
  X << 1, 2, 3, -1, 0.5, 2, 0.3, 0.3, -1, 4, 1, 0;
  Vector w(3);
  w << 0.1, -0.2, 0.4;
  const Vector yy = Vector::Random(4);
  EXPECT_EQ(inner_adapt(w, 0.0, X, yy), w);
  const Vector fixed = inner_adapt(w, 0.3, X, X * w);
  EXPECT_LT((fixed - w).lpNorm<Eigen::Infinity>(), 1e-15);
}

TEST(MetaGradient, NoInnerLoopSingleSample) {
  TaskBatch t;
  t.x_in = Matrix::Random(3, 4);
  t.y_in = Vector::Random(3);
  t.x_out = Matrix::Random(1, 4);
  t.y_out = Vector::Random(1);
  const Vector w = Vector::Random(4);
  const Vector x = t.x_out.row(0).transpose();
  const Vector expected = x * (x.dot(w) - t.y_out(0));
  EXPECT_LT((meta_gradient(w, 0.0, t) - expected).lpNorm<Eigen::Infinity>(), 1e-14);
  double loss = 0.0;
  meta_gradient(w, 0.0, t, loss);
  EXPECT_NEAR(loss, 0.5 * std::pow(x.dot(w) - t.y_out(0), 2), 1e-14);
}

TEST(MetaGradient, FiniteDifferenceAtD5) {
  auto c = small_config({1.0, 0.7, 0.5, 0.3, 0.1});
  const auto r = gradient_fd_oracle(c, 50, 5, 1e-5, 1e-6);
  EXPECT_TRUE(r.passed) << r.detail;
}

TEST(MetaGradient, DenseConstructionAtD8) {
  auto c = small_config({1.0, 0.9, 0.7, 0.5, 0.4, 0.3, 0.2, 0.1}, 0.2, -0.4);
  const auto r = gradient_dense_oracle(c, 50, 6);
  EXPECT_TRUE(r.passed) << r.detail;
  EXPECT_LT(r.observed, 1e-12);
}

TEST(MetaGradient, DenseLossMatches) {
  auto c = small_config();
  for (const auto& gc : gradient_cases(c, 5, 8)) {
    const auto dense = dense_meta_data(gc.task, c.beta_tr);
    const double ref = 0.5 * (dense.B * gc.omega - dense.gamma).squaredNorm();
    EXPECT_NEAR(meta_loss(gc.omega, c.beta_tr, gc.task), ref, 1e-12 * (1.0 + ref));
  }
}

TEST(Schedule, DefaultAndDense) {
  const std::vector<std::size_t> extra{150, 999, 0};
  const auto s = default_checkpoint_schedule(300, extra);
  for (std::size_t t = 1; t <= 10; ++t) EXPECT_EQ(s[t - 1], t);
  EXPECT_EQ(s.back(), 300u);
  EXPECT_NE(std::find(s.begin(), s.end(), 150u), s.end());
  EXPECT_EQ(std::find(s.begin(), s.end(), 999u), s.end());
  for (std::size_t k = 1; k < s.size(); ++k) EXPECT_LT(s[k - 1], s[k]);
  const auto d = dense_checkpoint_schedule(5);
  EXPECT_EQ(d, (std::vector<std::size_t>{1, 2, 3, 4, 5}));
}

TEST(MamlSgd, FirstAverageIsInitialization) {
  auto c = small_config();
  c.omega0 << 0.3, 0.2, 0.1;
  c.T = 1;
  const std::vector<std::size_t> sched{1};
  const auto tr = run_maml_sgd(c, sched);
  ASSERT_EQ(tr.checkpoints.size(), 1u);
  EXPECT_EQ(tr.checkpoints[0].omega_bar, c.omega0);
  EXPECT_EQ(tr.omega_final, c.omega0);
}

TEST(MamlSgd, FixedPointAtOptimum) {
  auto c = small_config({1.0, 0.5, 0.25}, 0.0, 0.2, 0.2, 0.0, 40);
  c.task_spectrum = zero_task_spectrum(3);
  c.omega0 = c.theta_star;
  const auto sched = dense_checkpoint_schedule(c.T);
  const auto tr = run_maml_sgd(c, sched, {0, true});
  for (const auto& cp : tr.checkpoints) {
    EXPECT_LT((cp.newest_iterate - c.theta_star).lpNorm<Eigen::Infinity>(), 1e-12);
    EXPECT_LT((cp.omega_bar - c.theta_star).lpNorm<Eigen::Infinity>(), 1e-12);
  }
  const auto single = run_single_task_sgd(c, sched);
  const auto test_cov = meta_covariance(c.data_spectrum, c.m, c.beta_te);
  for (double r : trajectory_risks(single, c.theta_star, test_cov)) EXPECT_LT(r, 1e-24);
}

TEST(MamlSgd, SingleTaskCoincidesWithoutTaskSpread) {
  auto c = small_config({1.0, 0.5, 0.25}, 0.0, 0.0, 0.2, 0.5, 60);
  c.task_spectrum = zero_task_spectrum(3);
  const auto sched = default_checkpoint_schedule(c.T);
  const auto a = run_maml_sgd(c, sched, {3, false});
  const auto b = run_single_task_sgd(c, sched, {3, false});
  ASSERT_EQ(a.checkpoints.size(), b.checkpoints.size());
  for (std::size_t k = 0; k < a.checkpoints.size(); ++k) {
    EXPECT_EQ(a.checkpoints[k].omega_bar, b.checkpoints[k].omega_bar);
    EXPECT_EQ(a.checkpoints[k].mean_train_loss, b.checkpoints[k].mean_train_loss);
  }
  EXPECT_EQ(a.fingerprint, b.fingerprint);
}

TEST(MamlSgd, RunningAverageIdentity) {
  auto c = small_config();
  c.T = 30;
  const auto tr = run_maml_sgd(c, dense_checkpoint_schedule(c.T), {0, true});
  for (std::size_t k = 0; k + 1 < tr.checkpoints.size(); ++k) {
    const auto& a = tr.checkpoints[k];
    const auto& b = tr.checkpoints[k + 1];
    const Vector lhs = b.omega_bar * static_cast<double>(b.t) - a.omega_bar * static_cast<double>(a.t);
    EXPECT_LT((lhs - b.newest_iterate).lpNorm<Eigen::Infinity>(), 1e-12) << b.t;
  }
}

TEST(MamlSgd, ScheduleIndependentAndDeterministic) {
  auto c = small_config();
  c.T = 80;
  const auto coarse = run_maml_sgd(c, default_checkpoint_schedule(c.T), {5, false});
  const auto dense = run_maml_sgd(c, dense_checkpoint_schedule(c.T), {5, false});
  const auto again = run_maml_sgd(c, default_checkpoint_schedule(c.T), {5, false});
  EXPECT_EQ(coarse.omega_final, dense.omega_final);
  EXPECT_EQ(coarse.omega_final, again.omega_final);
  for (const auto& cp : coarse.checkpoints) EXPECT_EQ(cp.omega_bar, dense.checkpoints[cp.t - 1].omega_bar);
  const auto other = run_maml_sgd(c, default_checkpoint_schedule(c.T), {6, false});
  EXPECT_NE(coarse.omega_final, other.omega_final);
}

TEST(MamlSgd, DivergenceCarriesIteration) {
  auto c = small_config();
  c.alpha = 50.0;
  c.T = 500;
  try {
    run_maml_sgd(c, default_checkpoint_schedule(c.T));
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    EXPECT_GT(e.iteration(), 0u);
    EXPECT_LE(e.iteration(), c.T);
  }
}

TEST(MamlSgd, RejectsInvalidConfig) {
  auto c = small_config();
  c.beta_tr = 1.5;
  EXPECT_THROW(run_maml_sgd(c, default_checkpoint_schedule(c.T)), ParameterDomainError);
  c = small_config();
  c.omega0 = Vector::Zero(2);
  EXPECT_THROW(run_maml_sgd(c, default_checkpoint_schedule(c.T)), DimensionMismatchError);
  c = small_config();
  c.alpha = 2.0 * stability_threshold(c);
  EXPECT_THROW(validate_config(c, true), PreconditionError);
  EXPECT_NO_THROW(validate_config(c, false));
}

TEST(MamlSgd, NoiselessPopulationRiskDecreases) {
  auto c = small_config({1.0, 0.5, 0.25}, 0.0, 0.2, 0.2, 0.0, 60);
  c.task_spectrum = zero_task_spectrum(3);
  const auto sched = dense_checkpoint_schedule(c.T);
  const auto test_cov = meta_covariance(c.data_spectrum, c.m, c.beta_te);
  std::vector<double> avg(sched.size(), 0.0);
  for (std::uint64_t r = 0; r < 20; ++r) {
    const auto tr = run_maml_sgd(c, sched, {r, true});
    for (std::size_t k = 0; k < sched.size(); ++k)
      avg[k] += excess_risk_closed(tr.checkpoints[k].newest_iterate, c.theta_star, test_cov) / 20.0;
  }
  for (std::size_t k = 1; k < avg.size(); ++k) EXPECT_LE(avg[k], avg[k - 1] * (1 + 1e-12)) << k;
}

TEST(MamlSgd, TrajectoryCsv) {
  auto c = small_config();
  c.T = 3;
  const std::vector<std::size_t> sched{1, 3};
  std::stringstream ss;
  write_trajectory_csv(ss, run_maml_sgd(c, sched));
  std::string line;
  std::getline(ss, line);
  EXPECT_EQ(line, "t,index,value");
  std::size_t rows = 0;
  while (std::getline(ss, line)) ++rows;
  EXPECT_EQ(rows, 6u);
}

TEST(RandomUnit, NormAndSeed) {
  const Vector a = random_unit_vector(50, 9);
  EXPECT_NEAR(a.norm(), 1.0, 1e-14);
  EXPECT_EQ(a, random_unit_vector(50, 9));
  EXPECT_NE(a, random_unit_vector(50, 10));
}

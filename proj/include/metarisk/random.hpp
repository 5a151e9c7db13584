#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

#include <Eigen/Core>

namespace metarisk {

/// Identifies an independent random stream derived from the top-level seed.
enum class Stream : std::uint64_t {
  theta_star = 1,
  task = 2,
  data = 3,
  test_tasks = 4,
  meta_covariance_mc = 5,
  battery = 6,
  oracle = 7,
};

/// Seeded Gaussian source. Streams are addressed by (seed, stream, indices...)
/// so that replication k of a run always sees the same draws no matter how
/// many workers execute the run or in which order.
class Rng {
 public:
  Rng(std::uint64_t seed, Stream stream, std::initializer_list<std::uint64_t> path = {});

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  std::uint64_t bits() { return engine_(); }

  template <typename Derived>
  void fill_normal(Eigen::DenseBase<Derived>& out) {
    auto* data = out.derived().data();
    const auto n = out.size();
    for (Eigen::Index i = 0; i < n; ++i) data[i] = normal_(engine_);
  }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace metarisk

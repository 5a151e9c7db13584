#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

namespace metarisk {

/// Eigenvalues of a data covariance in the shared eigenbasis.
///
/// Invariants: every value is strictly positive and the sequence is
/// non-increasing, so values()[0] is the largest eigenvalue lambda_1.
/// A default-constructed Spectrum is empty (dim() == 0) and is only useful as
/// a placeholder to be assigned over.
class Spectrum {
 public:
  Spectrum() = default;

  /// Throws ParameterDomainError if a value is non-positive or non-finite, or
  /// if the sequence increases anywhere.
  static Spectrum from_values(std::vector<double> values);

  std::span<const double> values() const noexcept { return values_; }
  std::size_t dim() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }
  double operator[](std::size_t i) const { return values_[i]; }

  double largest() const { return values_.front(); }
  double smallest() const { return values_.back(); }
  double trace() const;
  /// tr(Sigma^2) = sum of squared eigenvalues.
  double trace_sq() const;

 private:
  explicit Spectrum(std::vector<double> values) : values_(std::move(values)) {}
  std::vector<double> values_;
};

/// Eigenvalues of the task covariance Sigma_theta in the data eigenbasis.
///
/// Unlike Spectrum there is no ordering requirement (task spectra may grow
/// with the index) and zeros are allowed, which represents a degenerate task
/// distribution concentrated at its mean.
class TaskSpectrum {
 public:
  TaskSpectrum() = default;

  static TaskSpectrum from_values(std::vector<double> values);

  std::span<const double> values() const noexcept { return values_; }
  std::size_t dim() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }
  double operator[](std::size_t i) const { return values_[i]; }

  bool is_zero() const;
  /// Returns the common value when all entries are equal.
  std::optional<double> isotropic_value() const;

 private:
  explicit TaskSpectrum(std::vector<double> values) : values_(std::move(values)) {}
  std::vector<double> values_;
};

// Data spectra. All logarithms are natural.

/// lambda_k = 1 / (k * log^p(k + 1)).
Spectrum log_decay_spectrum(std::size_t d, double p);
/// lambda_k = k^-q, q > 1.
Spectrum poly_spectrum(std::size_t d, double q);
/// lambda_k = e^-k.
Spectrum exp_spectrum(std::size_t d);
/// s leading eigenvalues equal to 1/s followed by d - s equal to 1/(d - s).
Spectrum two_block_spectrum(std::size_t d, std::size_t s);

/// If the spectrum consists of a leading block of 1/s followed by a tail block
/// of 1/(d - s), returns s.
std::optional<std::size_t> two_block_size(const Spectrum& spectrum);

// Task spectra.

/// nu_k = scale * log^r(k + 1); increasing in k.
TaskSpectrum log_growth_task_spectrum(std::size_t d, double r, double scale);
TaskSpectrum isotropic_task_spectrum(std::size_t d, double eta_sq);
TaskSpectrum zero_task_spectrum(std::size_t d);

/// sum_i nu_i * lambda_i.
double trace_product(const TaskSpectrum& task, const Spectrum& data);

// One-column CSV with header "lambda".
void write_spectrum_csv(std::ostream& out, std::span<const double> values);
std::vector<double> read_spectrum_csv(std::istream& in);

}  // namespace metarisk

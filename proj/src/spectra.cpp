#include "metarisk/spectra.hpp"

#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>

#include "metarisk/csv.hpp"
#include "metarisk/error.hpp"

namespace metarisk {

namespace {

void require_dim(std::size_t d) {
  if (d == 0) throw ParameterDomainError("spectrum dimension must be at least 1");
}

std::string at_index(std::size_t i) { return " at index " + std::to_string(i); }

}  // namespace

Spectrum Spectrum::from_values(std::vector<double> values) {
  if (values.empty()) throw ParameterDomainError("spectrum must have at least one eigenvalue");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i]) || values[i] <= 0.0)
      throw ParameterDomainError("data spectrum eigenvalues must be finite and positive" +
                                 at_index(i));
    if (i > 0 && values[i] > values[i - 1])
      throw ParameterDomainError("data spectrum must be non-increasing" + at_index(i));
  }
  return Spectrum(std::move(values));
}

double Spectrum::trace() const { return std::accumulate(values_.begin(), values_.end(), 0.0); }

double Spectrum::trace_sq() const {
  double acc = 0.0;
  for (double v : values_) acc += v * v;
  return acc;
}

TaskSpectrum TaskSpectrum::from_values(std::vector<double> values) {
  if (values.empty()) throw ParameterDomainError("task spectrum must have at least one entry");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i]) || values[i] < 0.0)
      throw ParameterDomainError("task spectrum entries must be finite and non-negative" +
                                 at_index(i));
  }
  return TaskSpectrum(std::move(values));
}

bool TaskSpectrum::is_zero() const {
  for (double v : values_)
    if (v != 0.0) return false;
  return true;
}

std::optional<double> TaskSpectrum::isotropic_value() const {
  if (values_.empty()) return std::nullopt;
  for (double v : values_)
    if (v != values_.front()) return std::nullopt;
  return values_.front();
}

Spectrum log_decay_spectrum(std::size_t d, double p) {
  require_dim(d);
  if (!(p > 0.0)) throw ParameterDomainError("log-decay exponent p must be positive");
  std::vector<double> v(d);
  for (std::size_t k = 1; k <= d; ++k) {
    const double kd = static_cast<double>(k);
    v[k - 1] = 1.0 / (kd * std::pow(std::log(kd + 1.0), p));
  }
  return Spectrum::from_values(std::move(v));
}

Spectrum poly_spectrum(std::size_t d, double q) {
  require_dim(d);
  if (!(q > 1.0)) throw ParameterDomainError("polynomial decay exponent q must exceed 1");
  std::vector<double> v(d);
  for (std::size_t k = 1; k <= d; ++k) v[k - 1] = std::pow(static_cast<double>(k), -q);
  return Spectrum::from_values(std::move(v));
}

Spectrum exp_spectrum(std::size_t d) {
  require_dim(d);
  std::vector<double> v(d);
  for (std::size_t k = 1; k <= d; ++k) v[k - 1] = std::exp(-static_cast<double>(k));
  return Spectrum::from_values(std::move(v));
}

Spectrum two_block_spectrum(std::size_t d, std::size_t s) {
  require_dim(d);
  if (s == 0 || s >= d)
    throw ParameterDomainError("two-block spectrum requires 1 <= s < d");
  if (d < 2 * s)
    throw ParameterDomainError("two-block spectrum requires d >= 2s so that 1/s >= 1/(d-s)");
  std::vector<double> v(d);
  const double lead = 1.0 / static_cast<double>(s);
  const double tail = 1.0 / static_cast<double>(d - s);
  for (std::size_t k = 0; k < d; ++k) v[k] = k < s ? lead : tail;
  return Spectrum::from_values(std::move(v));
}

std::optional<std::size_t> two_block_size(const Spectrum& spectrum) {
  const std::size_t d = spectrum.dim();
  if (d < 2) return std::nullopt;
  const auto values = spectrum.values();
  std::size_t s = 1;
  while (s < d && values[s] == values[0]) ++s;
  if (s >= d) return std::nullopt;
  for (std::size_t k = s; k < d; ++k)
    if (values[k] != values[s]) return std::nullopt;
  const double lead = 1.0 / static_cast<double>(s);
  const double tail = 1.0 / static_cast<double>(d - s);
  auto close = [](double a, double b) { return std::abs(a - b) <= 1e-12 * std::abs(b); };
  if (!close(values[0], lead) || !close(values[s], tail)) return std::nullopt;
  return s;
}

TaskSpectrum log_growth_task_spectrum(std::size_t d, double r, double scale) {
  require_dim(d);
  if (!(r > 0.0)) throw ParameterDomainError("task log-growth exponent r must be positive");
  if (!(scale > 0.0)) throw ParameterDomainError("task spectrum scale must be positive");
  std::vector<double> v(d);
  for (std::size_t k = 1; k <= d; ++k)
    v[k - 1] = scale * std::pow(std::log(static_cast<double>(k) + 1.0), r);
  return TaskSpectrum::from_values(std::move(v));
}

TaskSpectrum isotropic_task_spectrum(std::size_t d, double eta_sq) {
  require_dim(d);
  if (!(eta_sq > 0.0)) throw ParameterDomainError("isotropic task variance must be positive");
  return TaskSpectrum::from_values(std::vector<double>(d, eta_sq));
}

TaskSpectrum zero_task_spectrum(std::size_t d) {
  require_dim(d);
  return TaskSpectrum::from_values(std::vector<double>(d, 0.0));
}

double trace_product(const TaskSpectrum& task, const Spectrum& data) {
  if (task.dim() != data.dim())
    throw DimensionMismatchError("task spectrum has dimension " + std::to_string(task.dim()) +
                                 " but data spectrum has dimension " +
                                 std::to_string(data.dim()));
  double acc = 0.0;
  for (std::size_t i = 0; i < data.dim(); ++i) acc += task[i] * data[i];
  return acc;
}

void write_spectrum_csv(std::ostream& out, std::span<const double> values) {
  CsvWriter csv(out, {"lambda"});
  for (double v : values) {
    csv.field(v);
    csv.end_row();
  }
}

std::vector<double> read_spectrum_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("spectrum CSV is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "lambda") throw ConfigError("spectrum CSV header must be 'lambda', got '" + line + "'");
  std::vector<double> values;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(line, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != line.size())
      throw ConfigError("spectrum CSV line " + std::to_string(line_no) + ": not a number: '" +
                        line + "'");
    values.push_back(v);
  }
  return values;
}

}  // namespace metarisk

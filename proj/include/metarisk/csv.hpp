#pragma once

#include <initializer_list>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace metarisk {

/// Shortest round-trip decimal representation; identical bytes for identical
/// doubles on every platform with IEEE-754 binary64.
std::string format_double(double value);

/// Minimal CSV writer. Fields are written verbatim except strings containing a
/// separator or quote, which are quoted.
class CsvWriter {
 public:
  CsvWriter(std::ostream& out, std::initializer_list<std::string_view> header);
  CsvWriter(std::ostream& out, const std::vector<std::string>& header);

  CsvWriter& field(std::string_view text);
  CsvWriter& field(double value);
  CsvWriter& field(std::optional<double> value);
  CsvWriter& field(long long value);
  CsvWriter& field(unsigned long long value);
  CsvWriter& field(std::size_t value) { return field(static_cast<unsigned long long>(value)); }
  CsvWriter& field(int value) { return field(static_cast<long long>(value)); }
  CsvWriter& field(bool value) { return field(value ? std::string_view("true") : std::string_view("false")); }
  CsvWriter& empty();
  void end_row();

  std::size_t columns() const noexcept { return columns_; }

 private:
  void separator();

  std::ostream& out_;
  std::size_t columns_;
  std::size_t in_row_ = 0;
};

/// Parses a CSV line into fields (supports double-quoted fields).
std::vector<std::string> split_csv_line(std::string_view line);

}  // namespace metarisk

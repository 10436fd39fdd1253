#pragma once

#include <initializer_list>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace gdw {

/// Shortest decimal form that reads back to the same double.
[[nodiscard]] std::string format_real(double x);

/// 64-bit FNV-1a digest rendered as 16 hex digits.
[[nodiscard]] std::string fnv1a_hex(std::string_view text);

/// Quotes a field when it contains a comma, quote, CR or LF (RFC 4180).
[[nodiscard]] std::string csv_escape(std::string_view field);

/// Minimal RFC 4180 row writer.
class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& os) : os_(os) {}

  void row(std::initializer_list<std::string> fields);
  void row(const std::vector<std::string>& fields);

 private:
  std::ostream& os_;
};

}  // namespace gdw

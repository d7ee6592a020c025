#ifndef LUNARDOP_IO_HPP
#define LUNARDOP_IO_HPP

#include <cstddef>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace lunardop {

/// Malformed input file. `row()` is the 1-based line number, 0 if unknown.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t row)
      : std::runtime_error(what), row_(row) {}
  std::size_t row() const { return row_; }

 private:
  std::size_t row_;
};

/// Shortest text that round-trips the double exactly.
std::string format_double(double value);

std::vector<std::string> split_csv_line(std::string_view line);

/// Parses a full field as double; throws ParseError tagged with `row`.
double parse_double(std::string_view field, std::size_t row);
long parse_long(std::string_view field, std::size_t row);

/// Writes to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

std::string read_file(const std::filesystem::path& path);

/// 64-bit FNV-1a, hex encoded.
std::string fnv1a_hex(std::string_view data);

}  // namespace lunardop

#endif  // LUNARDOP_IO_HPP

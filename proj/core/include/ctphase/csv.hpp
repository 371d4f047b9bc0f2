#pragma once

#include <string>
#include <vector>

namespace ctphase::csv {

/// Shortest round-trip decimal form of v. NaN is written as the literal
/// token "NaN", the missing-value spelling used by every file format here.
std::string format_double(double v);

/// Parses a double; the token "NaN" (case-insensitive) yields quiet NaN.
double parse_double(const std::string& s);

long parse_long(const std::string& s);

std::vector<std::string> split_line(const std::string& line);

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Column index by header name, -1 if absent.
  int column(const std::string& name) const;
  int require_column(const std::string& name) const;
};

Table read_file(const std::string& path);

void write_file(const std::string& path, const std::vector<std::string>& header,
                const std::vector<std::vector<std::string>>& rows);

}  // namespace ctphase::csv

#include "ctphase/csv.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <system_error>

#include "ctphase/errors.hpp"

namespace ctphase::csv {

std::string format_double(double v) {
  if (std::isnan(v)) return "NaN";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
  if (s.size() == 3 && (s[0] == 'N' || s[0] == 'n') && (s[1] == 'A' || s[1] == 'a') &&
      (s[2] == 'N' || s[2] == 'n')) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last) {
    throw DataError("not a number: '" + s + "'");
  }
  return v;
}

long parse_long(const std::string& s) {
  long v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw DataError("not an integer: '" + s + "'");
  }
  return v;
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (const char c : line) {
    if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(std::move(cur));
  return out;
}

int Table::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return static_cast<int>(i);
  }
  return -1;
}

int Table::require_column(const std::string& name) const {
  const int idx = column(name);
  if (idx < 0) throw DataError("missing CSV column '" + name + "'");
  return idx;
}

Table read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  Table table;
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty CSV file '" + path + "'");
  table.header = split_line(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto fields = split_line(line);
    if (fields.size() != table.header.size()) {
      throw DataError("ragged CSV row in '" + path + "'");
    }
    table.rows.push_back(std::move(fields));
  }
  return table;
}

void write_file(const std::string& path, const std::vector<std::string>& header,
                const std::vector<std::vector<std::string>>& rows) {
  std::ofstream out(path, std::ios::binary);  // '\n' line endings everywhere
  if (!out) throw DataError("cannot write '" + path + "'");
  auto emit = [&out](const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i > 0) out << ',';
      out << fields[i];
    }
    out << '\n';
  };
  emit(header);
  for (const auto& row : rows) emit(row);
  if (!out) throw DataError("write failed for '" + path + "'");
}

}  // namespace ctphase::csv

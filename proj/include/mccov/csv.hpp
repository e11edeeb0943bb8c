#pragma once

#include <string>
#include <vector>

namespace mccov::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const;  // -1 if absent
};

// Reads a comma-separated file. No quoting support: the formats this
// project defines carry identifiers and numbers only. CR stripped.
Table read_file(const std::string& path);

// Verifies the header matches `expected` exactly (order included).
void require_header(const Table& t, const std::vector<std::string>& expected,
                    const std::string& path);

// Shortest round-trip decimal form (std::to_chars).
std::string format_double(double v);

double parse_double(const std::string& s, const std::string& context);
long parse_long(const std::string& s, const std::string& context);

}  // namespace mccov::csv

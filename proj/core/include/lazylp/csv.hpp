#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

namespace lazylp::csv {

// Minimal comma-separated reader: no quoting, which is all the formats here need.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

Table read(const std::filesystem::path& path);
Table parse(std::istream& in);

// Throws IoError if the header does not match `expected` exactly.
void require_header(const Table& table, const std::vector<std::string>& expected,
                    std::string_view what);

double to_double(std::string_view field);
long long to_int(std::string_view field);

// Shortest round-trip representation.
std::string format(double value);

std::ofstream open_for_write(const std::filesystem::path& path);

}  // namespace lazylp::csv

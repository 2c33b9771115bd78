#include "lazylp/csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "lazylp/error.hpp"

namespace lazylp {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::EmptyData: return "EmptyData";
    case ErrorCode::UnsortedInput: return "UnsortedInput";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::WindowTooShort: return "WindowTooShort";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::DegenerateDiffusion: return "DegenerateDiffusion";
    case ErrorCode::InconsistentDeposit: return "InconsistentDeposit";
    case ErrorCode::EpisodeFinished: return "EpisodeFinished";
    case ErrorCode::ShapeError: return "ShapeError";
    case ErrorCode::BufferTooSmall: return "BufferTooSmall";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

namespace csv {
namespace {

std::vector<std::string> split(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.emplace_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.remove_suffix(1);
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  return s;
}

}  // namespace

Table parse(std::istream& in) {
  Table table;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    auto view = trim(line);
    if (first) {
      // Tolerate a UTF-8 byte-order mark.
      if (view.size() >= 3 && view.substr(0, 3) == "\xEF\xBB\xBF") view.remove_prefix(3);
      table.header = split(view);
      first = false;
      continue;
    }
    if (view.empty()) continue;
    table.rows.push_back(split(view));
    if (table.rows.back().size() != table.header.size()) {
      throw Error(ErrorCode::IoError, "row " + std::to_string(table.rows.size()) +
                                          " has wrong field count");
    }
  }
  if (first) throw Error(ErrorCode::IoError, "missing CSV header");
  return table;
}

Table read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  return parse(in);
}

void require_header(const Table& table, const std::vector<std::string>& expected,
                    std::string_view what) {
  if (table.header != expected) {
    throw Error(ErrorCode::IoError, std::string("unexpected header for ") + std::string(what));
  }
}

double to_double(std::string_view field) {
  field = trim(field);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw Error(ErrorCode::IoError, "not a number: '" + std::string(field) + "'");
  }
  return value;
}

long long to_int(std::string_view field) {
  field = trim(field);
  long long value = 0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw Error(ErrorCode::IoError, "not an integer: '" + std::string(field) + "'");
  }
  return value;
}

std::string format(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ec == std::errc() ? ptr : buf);
}

std::ofstream open_for_write(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  return out;
}

}  // namespace csv
}  // namespace lazylp

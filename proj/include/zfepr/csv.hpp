#pragma once

#include <filesystem>
#include <istream>
#include <map>
#include <string>
#include <vector>

#include "zfepr/cavity.hpp"
#include "zfepr/fit.hpp"
#include "zfepr/lineshape.hpp"

namespace zfepr {

/// Comma-separated table with '#' comment lines and a mandatory header row.
/// Comment lines of the form "# key=value" are collected as metadata.
struct CsvTable {
  std::string source;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<int> line_numbers;  // 1-based source line of each row
  std::map<std::string, std::string> metadata;

  /// Column index, or -1 when absent.
  [[nodiscard]] int column(const std::string& name) const;
  /// Column index; throws DataError when absent.
  [[nodiscard]] int require_column(const std::string& name) const;
  /// Parses a numeric cell; DataError carries the source line number.
  [[nodiscard]] double number(std::size_t row, int col) const;
};

CsvTable parse_csv(std::istream& in, const std::string& source);
CsvTable read_csv_file(const std::filesystem::path& path);

SweepResult sweep_from_csv(const CsvTable& table);
LineProfile profile_from_csv(const CsvTable& table);
std::vector<ObservedLine> observed_from_csv(const CsvTable& table);

/// Builds CSV text: "# key=value" comments, header row, then rows.
class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header) : header_(std::move(header)) {}

  void comment(const std::string& key, const std::string& value) { comments_.emplace_back(key, value); }
  void row(std::vector<std::string> cells);
  [[nodiscard]] std::string str() const;

 private:
  std::vector<std::string> header_;
  std::vector<std::pair<std::string, std::string>> comments_;
  std::vector<std::vector<std::string>> rows_;
};

/// Round-trippable decimal rendering used by every output file.
std::string format_number(double value);

std::string sweep_to_csv(const SweepResult& sweep, const std::string& config_hash);
std::string profile_to_csv(const LineProfile& profile, const std::map<std::string, std::string>& metadata);

/// Writes through a temporary sibling file and renames it into place.
void write_atomically(const std::filesystem::path& path, const std::string& content);

}  // namespace zfepr

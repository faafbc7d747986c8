#include "zfepr/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "zfepr/errors.hpp"

namespace zfepr {
namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    cells.push_back(trim(std::string_view(line).substr(start, comma == std::string::npos ? std::string::npos : comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return cells;
}

}  // namespace

int CsvTable::column(const std::string& name) const {
  for (std::size_t k = 0; k < header.size(); ++k) {
    if (header[k] == name) return static_cast<int>(k);
  }
  return -1;
}

int CsvTable::require_column(const std::string& name) const {
  const int c = column(name);
  if (c < 0) throw DataError(fmt::format("{}: missing required column '{}'", source, name));
  return c;
}

double CsvTable::number(std::size_t row, int col) const {
  const std::string& cell = rows.at(row).at(static_cast<std::size_t>(col));
  double value = 0.0;
  const char* begin = cell.data();
  const char* end = cell.data() + cell.size();
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (cell.empty() || ec != std::errc() || ptr != end) {
    throw DataError(fmt::format("{}:{}: column '{}' is not a number: '{}'", source, line_numbers.at(row),
                                header.at(static_cast<std::size_t>(col)), cell));
  }
  return value;
}

CsvTable parse_csv(std::istream& in, const std::string& source) {
  CsvTable table;
  table.source = source;
  std::string line;
  int number = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++number;
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;
    if (stripped.front() == '#') {
      const std::string body = trim(std::string_view(stripped).substr(1));
      const auto eq = body.find('=');
      if (eq != std::string::npos) table.metadata[trim(std::string_view(body).substr(0, eq))] = trim(std::string_view(body).substr(eq + 1));
      continue;
    }
    auto cells = split(stripped);
    if (!have_header) {
      for (const auto& c : cells) {
        if (c.empty()) throw DataError(fmt::format("{}:{}: empty column name in header", source, number));
      }
      table.header = std::move(cells);
      have_header = true;
      continue;
    }
    if (cells.size() != table.header.size()) {
      throw DataError(fmt::format("{}:{}: expected {} fields, found {}", source, number, table.header.size(), cells.size()));
    }
    table.rows.push_back(std::move(cells));
    table.line_numbers.push_back(number);
  }
  if (!have_header) throw DataError(fmt::format("{}:{}: missing header row", source, number));
  return table;
}

CsvTable read_csv_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("{}: cannot open file", path.string()));
  return parse_csv(in, path.string());
}

SweepResult sweep_from_csv(const CsvTable& table) {
  const int f = table.require_column("frequency_mhz");
  const int s = table.require_column("s21_squared");
  SweepResult sweep;
  sweep.metadata = table.metadata;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const double freq = table.number(r, f);
    const double value = table.number(r, s);
    if (value < 0.0) throw DataError(fmt::format("{}:{}: negative s21_squared", table.source, table.line_numbers[r]));
    if (!sweep.frequencies.empty() && !(freq > sweep.frequencies.back())) {
      throw DataError(fmt::format("{}:{}: frequencies must be strictly ascending", table.source, table.line_numbers[r]));
    }
    sweep.frequencies.push_back(freq);
    sweep.s21_squared.push_back(value);
  }
  if (sweep.frequencies.size() < 3) throw DataError(fmt::format("{}: sweep needs at least three rows", table.source));
  return sweep;
}

LineProfile profile_from_csv(const CsvTable& table) {
  const int f = table.require_column("frequency_mhz");
  const int d = table.require_column("density_per_mhz");
  LineProfile profile;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    profile.frequencies.push_back(table.number(r, f));
    profile.density.push_back(table.number(r, d));
  }
  return profile;
}

std::vector<ObservedLine> observed_from_csv(const CsvTable& table) {
  const int f = table.require_column("frequency_mhz");
  const int u = table.column("uncertainty_mhz");
  const int s = table.column("site_hint");
  const int a = table.column("assignment");
  std::vector<ObservedLine> lines;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    ObservedLine line;
    line.frequency = table.number(r, f);
    if (u >= 0 && !table.rows[r][static_cast<std::size_t>(u)].empty()) line.uncertainty = table.number(r, u);
    if (s >= 0 && !table.rows[r][static_cast<std::size_t>(s)].empty()) line.site_hint = table.rows[r][static_cast<std::size_t>(s)];
    if (a >= 0 && !table.rows[r][static_cast<std::size_t>(a)].empty()) {
      const double v = table.number(r, a);
      if (v != std::floor(v) || v < 0) {
        throw DataError(fmt::format("{}:{}: assignment must be a non-negative integer", table.source, table.line_numbers[r]));
      }
      line.assignment = static_cast<int>(v);
    }
    if (!(line.frequency > 0.0) || !(line.uncertainty > 0.0)) {
      throw DataError(fmt::format("{}:{}: frequency and uncertainty must be > 0", table.source, table.line_numbers[r]));
    }
    lines.push_back(std::move(line));
  }
  return lines;
}

void CsvWriter::row(std::vector<std::string> cells) {
  if (cells.size() != header_.size()) throw std::logic_error("CsvWriter: row width does not match header");
  rows_.push_back(std::move(cells));
}

std::string CsvWriter::str() const {
  std::string out;
  for (const auto& [k, v] : comments_) out += fmt::format("# {}={}\n", k, v);
  out += fmt::format("{}\n", fmt::join(header_, ","));
  for (const auto& r : rows_) out += fmt::format("{}\n", fmt::join(r, ","));
  return out;
}

std::string format_number(double value) { return fmt::format("{:.12g}", value); }

std::string sweep_to_csv(const SweepResult& sweep, const std::string& config_hash) {
  CsvWriter w({"frequency_mhz", "s21_squared"});
  w.comment("config_hash", config_hash);
  for (const auto& [k, v] : sweep.metadata) {
    if (k != "config_hash") w.comment(k, v);
  }
  for (std::size_t i = 0; i < sweep.frequencies.size(); ++i) {
    w.row({format_number(sweep.frequencies[i]), format_number(sweep.s21_squared[i])});
  }
  return w.str();
}

std::string profile_to_csv(const LineProfile& profile, const std::map<std::string, std::string>& metadata) {
  CsvWriter w({"frequency_mhz", "density_per_mhz"});
  for (const auto& [k, v] : metadata) w.comment(k, v);
  for (std::size_t i = 0; i < profile.size(); ++i) {
    w.row({format_number(profile.frequencies[i]), format_number(profile.density[i])});
  }
  return w.str();
}

void write_atomically(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError(fmt::format("{}: cannot open for writing", tmp.string()));
    out << content;
    if (!out.flush()) throw DataError(fmt::format("{}: write failed", tmp.string()));
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace zfepr

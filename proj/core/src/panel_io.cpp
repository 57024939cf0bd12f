#include "panelqlm/panel_io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace panelqlm {

namespace {

std::string format_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_double(const std::string& field, const char* what) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(field, &pos);
    if (pos != field.size()) throw std::invalid_argument(field);
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error(std::string("malformed CSV: bad ") + what + " value '" + field + "'");
  }
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

}  // namespace

void write_long_csv(std::ostream& os, const PanelData& data) {
  os << "id,t,y\n";
  for (int i = 0; i < data.n(); ++i)
    for (int t = 0; t < data.t_len(); ++t)
      os << (i + 1) << ',' << (t + 1) << ',' << format_value(data.y(i, t)) << '\n';
}

void write_wide_csv(std::ostream& os, const PanelData& data) {
  for (int i = 0; i < data.n(); ++i) {
    for (int t = 0; t < data.t_len(); ++t) {
      if (t) os << ',';
      os << format_value(data.y(i, t));
    }
    os << '\n';
  }
}

PanelData read_long_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("malformed CSV: empty input");
  {
    auto header = split_csv_line(line);
    if (header.size() != 3 || header[0] != "id" || header[1] != "t" || header[2] != "y")
      throw std::runtime_error("malformed CSV: expected header 'id,t,y'");
  }
  std::map<std::pair<long, long>, double> cells;
  long max_id = 0, max_t = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != 3) throw std::runtime_error("malformed CSV: expected 3 fields per row");
    const long id = std::lround(parse_double(fields[0], "id"));
    const long t = std::lround(parse_double(fields[1], "t"));
    if (id < 1 || t < 1) throw std::runtime_error("malformed CSV: ids and times are 1-based");
    cells[{id, t}] = parse_double(fields[2], "y");
    max_id = std::max(max_id, id);
    max_t = std::max(max_t, t);
  }
  if (max_id < 1 || max_t < 3)
    throw std::runtime_error("malformed CSV: panel needs at least one individual and T >= 3");
  if (cells.size() != static_cast<std::size_t>(max_id * max_t))
    throw std::runtime_error("malformed CSV: panel is unbalanced or has duplicate cells");
  PanelData out;
  out.y.resize(max_id, max_t);
  for (const auto& [key, value] : cells) out.y(key.first - 1, key.second - 1) = value;
  out.source = "long-csv";
  return out;
}

PanelData read_wide_csv(std::istream& is) {
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    std::vector<double> row;
    row.reserve(fields.size());
    for (const auto& f : fields) row.push_back(parse_double(f, "y"));
    if (!rows.empty() && row.size() != rows.front().size())
      throw std::runtime_error("malformed CSV: ragged rows in wide panel");
    rows.push_back(std::move(row));
  }
  if (rows.empty() || rows.front().size() < 3)
    throw std::runtime_error("malformed CSV: wide panel needs T >= 3 columns");
  PanelData out;
  out.y.resize(static_cast<int>(rows.size()), static_cast<int>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t t = 0; t < rows[i].size(); ++t) out.y(i, t) = rows[i][t];
  out.source = "wide-csv";
  return out;
}

void write_panel_csv(const std::string& path, const PanelData& data, bool wide) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open output file: " + path);
  wide ? write_wide_csv(os, data) : write_long_csv(os, data);
}

PanelData read_panel_csv(const std::string& path, bool wide) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open input file: " + path);
  return wide ? read_wide_csv(is) : read_long_csv(is);
}

}  // namespace panelqlm

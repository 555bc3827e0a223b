#include "ljcr/report.hpp"

#include "ljcr/simulate.hpp"

#include <algorithm>
#include <cstdio>
#include <ostream>

namespace ljcr {

Table& Table::add(std::vector<Cell> row) {
  detail::require(row.size() == columns.size(), "Table::add: row width differs from the header");
  rows.push_back(std::move(row));
  return *this;
}

std::string cell_text(const Cell& cell, bool exact) {
  if (const double* d = std::get_if<double>(&cell)) {
    if (exact) return format_double(*d);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", *d);
    return buf;
  }
  if (const long* i = std::get_if<long>(&cell)) return std::to_string(*i);
  return std::get<std::string>(cell);
}

namespace {

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

void write_csv(std::ostream& out, const Table& table) {
  for (std::size_t c = 0; c < table.columns.size(); ++c)
    out << (c ? "," : "") << csv_escape(table.columns[c]);
  out << '\n';
  for (const auto& row : table.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "," : "") << csv_escape(cell_text(row[c], true));
    out << '\n';
  }
}

void write_text(std::ostream& out, const Table& table) {
  std::vector<std::size_t> width(table.columns.size());
  std::vector<std::vector<std::string>> text;
  for (std::size_t c = 0; c < width.size(); ++c) width[c] = table.columns[c].size();
  for (const auto& row : table.rows) {
    text.emplace_back();
    for (std::size_t c = 0; c < row.size(); ++c) {
      text.back().push_back(cell_text(row[c], false));
      width[c] = std::max(width[c], text.back().back().size());
    }
  }
  const auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t c = 0; c < cells.size(); ++c)
      out << (c ? "  " : "") << std::string(width[c] - cells[c].size(), ' ') << cells[c];
    out << '\n';
  };
  if (!table.title.empty()) out << table.title << '\n';
  line(table.columns);
  std::size_t total = 0;
  for (std::size_t w : width) total += w;
  out << std::string(total + 2 * (width.empty() ? 0 : width.size() - 1), '-') << '\n';
  for (const auto& row : text) line(row);
}

void write_dat(std::ostream& out, const std::string& comment, const std::vector<double>& x,
               const std::vector<double>& y) {
  detail::require(x.size() == y.size(), "write_dat: x and y differ in length");
  out << "# " << comment << '\n';
  for (std::size_t k = 0; k < x.size(); ++k) out << format_double(x[k]) << ' ' << format_double(y[k]) << '\n';
}

}  // namespace ljcr

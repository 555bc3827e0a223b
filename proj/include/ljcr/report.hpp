#pragma once

// Tabular reports: one table written as CSV (round-trip decimals), as an
// aligned text table, or as gnuplot two-column data.

#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

namespace ljcr {

using Cell = std::variant<double, long, std::string>;

struct Table {
  std::string title;
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  Table& add(std::vector<Cell> row);
};

/// Cells in CSV use shortest round-trip formatting; strings are quoted only
/// when they hold a comma or a quote.
void write_csv(std::ostream& out, const Table& table);

/// Right-aligned columns, doubles with 6 significant digits.
void write_text(std::ostream& out, const Table& table);

/// `# x y` header comment then one "x y" line per point.
void write_dat(std::ostream& out, const std::string& comment, const std::vector<double>& x,
               const std::vector<double>& y);

std::string cell_text(const Cell& cell, bool exact);

}  // namespace ljcr

#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace cnmt {

/// Shortest decimal form that parses back to the same double.
std::string format_double(double value);

/// Fixed-point with `digits` decimals, used for human-facing percentages.
std::string format_fixed(double value, int digits);

double parse_double(std::string_view text, const std::string& source, std::size_t line);
/// Empty field parses as NaN; format_double writes NaN as an empty field.
double parse_optional_double(std::string_view text, const std::string& source, std::size_t line);
long long parse_int(std::string_view text, const std::string& source, std::size_t line);

struct TableRow {
  std::size_t line = 0;  ///< 1-based, header is line 1
  std::vector<std::string> fields;
};

struct Table {
  std::vector<std::string> header;
  std::vector<TableRow> rows;
};

/// Reads a delimited text file whose first line must equal `expected_header`.
/// Blank lines are skipped; every other row must have the header's width.
/// Throws Error when the file cannot be opened and ParseError on shape errors.
Table read_table(const std::string& path, char delimiter,
                 const std::vector<std::string>& expected_header);

std::vector<std::string> split(std::string_view line, char delimiter);

}  // namespace cnmt

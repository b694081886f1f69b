#include "cnmt/text_io.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "cnmt/error.hpp"

namespace cnmt {

std::string format_double(double value) {
  if (std::isnan(value)) return "";
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  if (ec != std::errc{}) throw Error("format_double: conversion failed");
  return std::string(buf.data(), ptr);
}

std::string format_fixed(double value, int digits) {
  std::array<char, 64> buf{};
  // Avoid printing "-0.00" for tiny negative values.
  const double scale = std::pow(10.0, digits);
  if (std::round(value * scale) == 0.0) value = 0.0;
  auto [ptr, ec] =
      std::to_chars(buf.data(), buf.data() + buf.size(), value, std::chars_format::fixed, digits);
  if (ec != std::errc{}) throw Error("format_fixed: conversion failed");
  return std::string(buf.data(), ptr);
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

double parse_double(std::string_view text, const std::string& source, std::size_t line) {
  text = trim(text);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size() ||
      !std::isfinite(value)) {
    throw ParseError(source, line, "'" + std::string(text) + "' is not a finite number");
  }
  return value;
}

double parse_optional_double(std::string_view text, const std::string& source, std::size_t line) {
  if (trim(text).empty()) return std::nan("");
  return parse_double(text, source, line);
}

long long parse_int(std::string_view text, const std::string& source, std::size_t line) {
  text = trim(text);
  long long value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size()) {
    throw ParseError(source, line, "'" + std::string(text) + "' is not an integer");
  }
  return value;
}

std::vector<std::string> split(std::string_view line, char delimiter) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(delimiter, start);
    out.emplace_back(line.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

Table read_table(const std::string& path, char delimiter,
                 const std::vector<std::string>& expected_header) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");

  Table table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1) {
      table.header = split(line, delimiter);
      for (auto& h : table.header) h = std::string(trim(h));
      if (table.header != expected_header) {
        std::string want;
        for (const auto& h : expected_header) want += (want.empty() ? "" : std::string(1, delimiter)) + h;
        throw ParseError(path, line_no, "expected header '" + want + "'");
      }
      continue;
    }
    if (trim(line).empty()) continue;
    auto fields = split(line, delimiter);
    if (fields.size() != expected_header.size()) {
      throw ParseError(path, line_no,
                       "expected " + std::to_string(expected_header.size()) + " fields, got " +
                           std::to_string(fields.size()));
    }
    table.rows.push_back({line_no, std::move(fields)});
  }
  if (line_no == 0) throw ParseError(path, 1, "missing header");
  return table;
}

}  // namespace cnmt

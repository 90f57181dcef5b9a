#pragma once

// Minimal CSV I/O. Numbers are written with 17 significant digits so files
// parse back losslessly.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace bayesbench::io {

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

inline void write_csv(const std::filesystem::path& path, const CsvTable& table) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_csv: cannot open " + path.string());
  for (std::size_t i = 0; i < table.header.size(); ++i)
    out << (i ? "," : "") << table.header[i];
  out << "\n";
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
    out << "\n";
  }
  if (!out) throw std::runtime_error("write_csv: write failed for " + path.string());
}

inline void write_numeric_csv(const std::filesystem::path& path,
                              const std::vector<std::string>& header,
                              const std::vector<std::vector<double>>& rows) {
  CsvTable table;
  table.header = header;
  table.rows.reserve(rows.size());
  for (const auto& row : rows) {
    std::vector<std::string> cells;
    cells.reserve(row.size());
    for (double v : row) cells.push_back(format_double(v));
    table.rows.push_back(std::move(cells));
  }
  write_csv(path, table);
}

inline CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_csv: cannot open " + path.string());
  CsvTable table;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (first) {
      table.header = std::move(cells);
      first = false;
    } else {
      table.rows.push_back(std::move(cells));
    }
  }
  return table;
}

inline std::vector<std::vector<double>> numeric_rows(const CsvTable& table,
                                                     std::size_t first_column = 0) {
  std::vector<std::vector<double>> out;
  out.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    std::vector<double> values;
    values.reserve(row.size() - first_column);
    for (std::size_t i = first_column; i < row.size(); ++i) values.push_back(std::stod(row[i]));
    out.push_back(std::move(values));
  }
  return out;
}

}  // namespace bayesbench::io

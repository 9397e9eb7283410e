// csv.hpp
// Versioned CSV schemas shared by the CLI and the analysis layer.
// Files are UTF-8, comma separated, first line "# schema=<name>/v1",
// second line the column headers. Floating point uses 9 significant
// digits.

#pragma once

#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace sagnac {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed input data (bad schema line, bad row); message carries the
/// offending row number.
struct SchemaError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline std::string format_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", x);
  return buf;
}

class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::string& schema,
            const std::vector<std::string>& columns)
      : out_(path) {
    if (!out_) throw IoError("cannot open for writing: " + path);
    out_ << "# schema=" << schema << "\n";
    for (std::size_t i = 0; i < columns.size(); ++i) {
      out_ << columns[i] << (i + 1 < columns.size() ? "," : "\n");
    }
  }

  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      out_ << cells[i] << (i + 1 < cells.size() ? "," : "\n");
    }
  }

  void close() {
    out_.close();
    if (out_.fail()) throw IoError("write failure on close");
  }

 private:
  std::ofstream out_;
};

struct CsvTable {
  std::string schema;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  std::vector<int> row_numbers;  ///< 1-based file line of each data row
};

/// Read a schema-versioned CSV of numeric columns. Rejects unknown
/// schema versions and malformed rows, naming the line number.
inline CsvTable read_csv(const std::string& path, const std::string& expected_schema) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open for reading: " + path);
  CsvTable table;
  std::string line;
  int lineno = 0;
  if (!std::getline(in, line)) throw SchemaError(path + ": empty file");
  ++lineno;
  const std::string prefix = "# schema=";
  if (line.rfind(prefix, 0) != 0) {
    throw SchemaError(path + " line 1: missing '# schema=' header");
  }
  table.schema = line.substr(prefix.size());
  if (!table.schema.empty() && table.schema.back() == '\r') table.schema.pop_back();
  if (table.schema != expected_schema) {
    throw SchemaError(path + " line 1: unsupported schema '" + table.schema +
                      "' (expected '" + expected_schema + "')");
  }
  if (!std::getline(in, line)) throw SchemaError(path + ": missing column header");
  ++lineno;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      if (!cell.empty() && cell.back() == '\r') cell.pop_back();
      table.columns.push_back(cell);
    }
  }
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      std::size_t used = 0;
      double value = 0.0;
      try {
        value = std::stod(cell, &used);
      } catch (const std::exception&) {
        throw SchemaError(path + " line " + std::to_string(lineno) +
                          ": non-numeric cell '" + cell + "'");
      }
      while (used < cell.size() && std::isspace(static_cast<unsigned char>(cell[used]))) {
        ++used;
      }
      if (used != cell.size()) {
        throw SchemaError(path + " line " + std::to_string(lineno) +
                          ": trailing junk in cell '" + cell + "'");
      }
      row.push_back(value);
    }
    if (row.size() != table.columns.size()) {
      throw SchemaError(path + " line " + std::to_string(lineno) + ": expected " +
                        std::to_string(table.columns.size()) + " cells, got " +
                        std::to_string(row.size()));
    }
    table.rows.push_back(std::move(row));
    table.row_numbers.push_back(lineno);
  }
  return table;
}

}  // namespace sagnac

#pragma once

#include <Eigen/Dense>

#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "srelasso/data_model.hpp"
#include "srelasso/error.hpp"

namespace srelasso {

/// Adds lags 1..order of `column` to the covariate pool, named "<column>_lag<k>".
struct LagDirective {
  std::string column;
  int order = 1;
};

struct EquationSchema {
  std::string response;
  std::vector<std::string> covariates;
  bool intercept = true;
};

struct PanelSchema {
  std::vector<LagDirective> lags;
  std::vector<EquationSchema> equations;
};

inline std::string lag_name(const std::string& column, int lag) { return column + "_lag" + std::to_string(lag); }

/// Shortest round-trip representation: 17 significant digits.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  bool quoted = false;
  for (char ch : line) {
    if (ch == '"') {
      quoted = !quoted;
    } else if (ch == ',' && !quoted) {
      cells.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  cells.push_back(trim(cur));
  return cells;
}

inline double parse_cell(const std::string& cell, std::size_t row, const std::string& column) {
  double v = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  if (!cell.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (cell.empty() || ec != std::errc() || ptr != last || !std::isfinite(v))
    throw DataError("non-numeric or missing value '" + cell + "' at row " + std::to_string(row) + ", column '" +
                    column + "'");
  return v;
}

}  // namespace detail

/// Raw CSV table: header names and row-major numeric values in file order.
struct CsvTable {
  std::vector<std::string> names;
  Eigen::MatrixXd values;
};

inline CsvTable read_csv_table(std::istream& in, const std::string& source = "<stream>") {
  std::string line;
  if (!std::getline(in, line)) throw DataError(source + ": empty file");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // UTF-8 BOM
  CsvTable table;
  table.names = detail::split_csv_line(line);
  std::map<std::string, int> seen;
  for (const auto& name : table.names) {
    if (name.empty()) throw DataError(source + ": empty column name in header");
    if (seen[name]++) throw DataError(source + ": duplicate column name '" + name + "'");
  }
  std::vector<std::vector<double>> rows;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (detail::trim(line).empty()) continue;
    auto cells = detail::split_csv_line(line);
    if (cells.size() != table.names.size())
      throw DataError(source + ": row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                      " cells, header has " + std::to_string(table.names.size()));
    std::vector<double> values(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) values[c] = detail::parse_cell(cells[c], row, table.names[c]);
    rows.push_back(std::move(values));
  }
  table.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(table.names.size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c)
      table.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  return table;
}

/// Builds a dataset from a CSV table. The pool holds every CSV column in
/// header order followed by lag columns in directive order; the first
/// max-lag rows are dropped.
inline PanelDataset panel_from_table(const CsvTable& table, const PanelSchema& schema) {
  std::map<std::string, int> column_of;
  for (std::size_t c = 0; c < table.names.size(); ++c) column_of[table.names[c]] = static_cast<int>(c);

  int max_lag = 0;
  for (const auto& lag : schema.lags) {
    if (!column_of.count(lag.column)) throw DataError("lag directive references unknown column '" + lag.column + "'");
    if (lag.order < 1) throw ConfigError("lag order for '" + lag.column + "' must be >= 1");
    max_lag = std::max(max_lag, lag.order);
  }
  const Eigen::Index rows = table.values.rows() - max_lag;
  if (rows < 2)
    throw DataError("only " + std::to_string(std::max<Eigen::Index>(rows, 0)) + " usable rows after lagging");

  std::vector<std::string> pool_names = table.names;
  std::vector<Eigen::VectorXd> pool_cols;
  for (std::size_t c = 0; c < table.names.size(); ++c)
    pool_cols.push_back(table.values.col(static_cast<Eigen::Index>(c)).segment(max_lag, rows));
  for (const auto& lag : schema.lags) {
    const int src = column_of.at(lag.column);
    for (int k = 1; k <= lag.order; ++k) {
      const std::string name = lag_name(lag.column, k);
      if (std::find(pool_names.begin(), pool_names.end(), name) != pool_names.end())
        throw ConfigError("lag column '" + name + "' defined twice");
      pool_names.push_back(name);
      pool_cols.push_back(table.values.col(src).segment(max_lag - k, rows));
    }
  }
  std::map<std::string, int> pool_of;
  for (std::size_t p = 0; p < pool_names.size(); ++p) pool_of[pool_names[p]] = static_cast<int>(p);

  Eigen::MatrixXd pool(rows, static_cast<Eigen::Index>(pool_cols.size()));
  for (std::size_t p = 0; p < pool_cols.size(); ++p) pool.col(static_cast<Eigen::Index>(p)) = pool_cols[p];

  if (schema.equations.empty()) throw ConfigError("schema declares no equations");
  Eigen::MatrixXd responses(rows, static_cast<Eigen::Index>(schema.equations.size()));
  std::vector<std::string> response_names;
  std::vector<EquationSpec> specs;
  for (std::size_t j = 0; j < schema.equations.size(); ++j) {
    const auto& eq = schema.equations[j];
    auto it = pool_of.find(eq.response);
    if (it == pool_of.end()) throw DataError("equation " + std::to_string(j) + ": unknown response column '" + eq.response + "'");
    responses.col(static_cast<Eigen::Index>(j)) = pool.col(it->second);
    response_names.push_back(eq.response);
    EquationSpec spec;
    spec.response_index = static_cast<int>(j);
    spec.intercept = eq.intercept;
    for (const auto& name : eq.covariates) {
      auto ct = pool_of.find(name);
      if (ct == pool_of.end())
        throw DataError("equation " + std::to_string(j) + ": unknown covariate column '" + name + "'");
      spec.covariate_indices.push_back(ct->second);
    }
    specs.push_back(std::move(spec));
  }
  return PanelDataset(std::move(responses), std::move(pool), std::move(specs), std::move(response_names),
                      std::move(pool_names));
}

inline PanelDataset load_panel_csv(const std::string& path, const PanelSchema& schema) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset '" + path + "'");
  return panel_from_table(read_csv_table(in, path), schema);
}

/// Writes the covariate pool (plus any response not already in the pool) with
/// 17 significant digits. Reloading with a lag-free schema that names the same
/// columns reproduces the data bit-exactly.
inline void write_panel_csv(std::ostream& out, const PanelDataset& data) {
  std::vector<std::string> names;
  std::vector<Eigen::VectorXd> cols;
  for (int p = 0; p < data.pool_size(); ++p) {
    names.push_back(data.pool_names().empty() ? "x" + std::to_string(p + 1) : data.pool_names()[static_cast<std::size_t>(p)]);
    cols.push_back(data.covariate_pool().col(p));
  }
  for (int r = 0; r < data.num_responses(); ++r) {
    const std::string name =
        data.response_names().empty() ? "y" + std::to_string(r + 1) : data.response_names()[static_cast<std::size_t>(r)];
    if (std::find(names.begin(), names.end(), name) != names.end()) continue;
    names.push_back(name);
    cols.push_back(data.responses().col(r));
  }
  for (std::size_t c = 0; c < names.size(); ++c) out << (c ? "," : "") << names[c];
  out << '\n';
  for (int t = 0; t < data.n(); ++t) {
    for (std::size_t c = 0; c < cols.size(); ++c) out << (c ? "," : "") << format_double(cols[c][t]);
    out << '\n';
  }
}

inline void save_panel_csv(const std::string& path, const PanelDataset& data) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  write_panel_csv(out, data);
}

}  // namespace srelasso

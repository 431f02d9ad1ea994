#ifndef FOLDDIFF_IO_HPP
#define FOLDDIFF_IO_HPP

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "folddiff/data.hpp"

namespace folddiff {

// Delimited-text ingestion. Outcome file: header row, first column sample id,
// remaining columns one category each. Metadata file: header row with a
// sample-id column (first column unless named), the exposure column and any
// covariate columns. No quoting, no imputation: an empty, "NA" or "NaN" cell
// is an error.

struct IngestSchema {
  std::string exposure;
  std::vector<std::string> covariates;
  char delimiter = ',';
  std::string id_column;  // empty: first metadata column
};

namespace detail {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

inline std::vector<std::string> split_line(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, delim)) out.push_back(field);
  if (!line.empty() && line.back() == delim) out.emplace_back();
  return out;
}

inline Table read_table(const std::string& path, char delim) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  Table t;
  std::string line;
  bool first = true;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_line(line, delim);
    if (first) {
      t.header = std::move(fields);
      first = false;
      continue;
    }
    if (fields.size() != t.header.size()) {
      throw std::runtime_error(path + ": line " + std::to_string(lineno) + " has " +
                               std::to_string(fields.size()) + " fields, expected " +
                               std::to_string(t.header.size()));
    }
    t.rows.push_back(std::move(fields));
  }
  if (first) throw std::runtime_error(path + ": empty file");
  return t;
}

inline bool is_missing(const std::string& s) {
  return s.empty() || s == "NA" || s == "na" || s == "NaN" || s == "nan" || s == "NAN";
}

inline bool parse_number(const std::string& s, double* out) {
  if (is_missing(s)) return false;
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    while (used < s.size() && (s[used] == ' ' || s[used] == '\t')) ++used;
    if (used != s.size()) return false;
    *out = v;
    return true;
  } catch (const std::exception&) {
    return false;
  }
}

inline std::size_t find_column(const Table& t, const std::string& name, const std::string& path) {
  for (std::size_t k = 0; k < t.header.size(); ++k) {
    if (t.header[k] == name) return k;
  }
  throw std::runtime_error(path + ": missing column '" + name + "'");
}

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

inline Dataset load_dataset(const std::string& counts_path, const std::string& meta_path,
                            const IngestSchema& schema) {
  if (schema.exposure.empty()) throw std::invalid_argument("ingest: exposure column not named");
  const detail::Table counts = detail::read_table(counts_path, schema.delimiter);
  const detail::Table meta = detail::read_table(meta_path, schema.delimiter);
  if (counts.header.size() < 2) throw std::runtime_error(counts_path + ": no category columns");
  if (counts.rows.empty()) throw std::runtime_error(counts_path + ": no samples");

  Dataset d;
  d.category_names.assign(counts.header.begin() + 1, counts.header.end());
  const Eigen::Index n = static_cast<Eigen::Index>(counts.rows.size());
  const Eigen::Index J = static_cast<Eigen::Index>(d.category_names.size());
  d.W.resize(n, J);
  d.sample_ids.resize(static_cast<std::size_t>(n));

  std::map<std::string, std::size_t> meta_index;
  const std::size_t id_col =
      schema.id_column.empty() ? 0 : detail::find_column(meta, schema.id_column, meta_path);
  for (std::size_t r = 0; r < meta.rows.size(); ++r) {
    const std::string& id = meta.rows[r][id_col];
    if (!meta_index.emplace(id, r).second) {
      throw std::runtime_error(meta_path + ": duplicate sample id '" + id + "'");
    }
  }

  const std::size_t exp_col = detail::find_column(meta, schema.exposure, meta_path);
  std::vector<std::size_t> cov_cols;
  for (const auto& c : schema.covariates) cov_cols.push_back(detail::find_column(meta, c, meta_path));

  d.A.resize(n);
  std::map<std::string, Eigen::Index> seen_ids;
  std::vector<std::size_t> meta_row(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = counts.rows[static_cast<std::size_t>(i)];
    const std::string& id = row[0];
    if (!seen_ids.emplace(id, i).second) {
      throw std::runtime_error(counts_path + ": duplicate sample id '" + id + "'");
    }
    d.sample_ids[static_cast<std::size_t>(i)] = id;
    const auto it = meta_index.find(id);
    if (it == meta_index.end()) {
      throw std::runtime_error(meta_path + ": no metadata row for sample id '" + id + "'");
    }
    meta_row[static_cast<std::size_t>(i)] = it->second;
    for (Eigen::Index j = 0; j < J; ++j) {
      double v = 0.0;
      if (!detail::parse_number(row[static_cast<std::size_t>(j + 1)], &v)) {
        throw std::runtime_error(counts_path + ": non-numeric or missing outcome for sample '" +
                                 id + "', category '" + d.category_names[static_cast<std::size_t>(j)] + "'");
      }
      if (!(v >= 0.0) || !std::isfinite(v)) {
        throw std::runtime_error(counts_path + ": negative or non-finite outcome for sample '" + id + "'");
      }
      d.W(i, j) = v;
    }
    const std::string& a = meta.rows[it->second][exp_col];
    double av = 0.0;
    if (!detail::parse_number(a, &av) || (av != 0.0 && av != 1.0)) {
      throw std::runtime_error(meta_path + ": exposure column '" + schema.exposure +
                               "' is not binary 0/1 (sample '" + id + "' has '" + a + "')");
    }
    d.A[i] = static_cast<int>(av);
  }

  // Covariates: numeric columns pass through; any column with a non-numeric
  // entry is treated as categorical and expanded into baseline-omitted
  // indicators, levels ordered lexicographically with the first as baseline.
  std::vector<Eigen::VectorXd> xcols;
  for (std::size_t c = 0; c < cov_cols.size(); ++c) {
    const std::string& cname = schema.covariates[c];
    std::vector<std::string> raw(static_cast<std::size_t>(n));
    bool numeric = true;
    for (Eigen::Index i = 0; i < n; ++i) {
      raw[static_cast<std::size_t>(i)] = meta.rows[meta_row[static_cast<std::size_t>(i)]][cov_cols[c]];
      if (detail::is_missing(raw[static_cast<std::size_t>(i)])) {
        throw std::runtime_error(meta_path + ": missing value in covariate '" + cname +
                                 "' for sample '" + d.sample_ids[static_cast<std::size_t>(i)] + "'");
      }
      double v = 0.0;
      if (!detail::parse_number(raw[static_cast<std::size_t>(i)], &v)) numeric = false;
    }
    if (numeric) {
      Eigen::VectorXd col(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        double v = 0.0;
        detail::parse_number(raw[static_cast<std::size_t>(i)], &v);
        if (!std::isfinite(v)) {
          throw std::runtime_error(meta_path + ": non-finite covariate '" + cname + "'");
        }
        col[i] = v;
      }
      xcols.push_back(col);
      d.covariate_names.push_back(cname);
    } else {
      std::vector<std::string> levels(raw.begin(), raw.end());
      std::sort(levels.begin(), levels.end());
      levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
      for (std::size_t l = 1; l < levels.size(); ++l) {
        Eigen::VectorXd col(n);
        for (Eigen::Index i = 0; i < n; ++i) {
          col[i] = (raw[static_cast<std::size_t>(i)] == levels[l]) ? 1.0 : 0.0;
        }
        xcols.push_back(col);
        d.covariate_names.push_back(cname + "=" + levels[l]);
      }
    }
  }
  d.X.resize(n, static_cast<Eigen::Index>(xcols.size()));
  for (std::size_t k = 0; k < xcols.size(); ++k) d.X.col(static_cast<Eigen::Index>(k)) = xcols[k];

  check_dataset(d);
  return d;
}

// Writes a Dataset back to the interchange format with full precision, so a
// reload reproduces W, A and X bit-exactly.
inline void write_dataset(const Dataset& d, const std::string& counts_path,
                          const std::string& meta_path, char delimiter = ',') {
  std::ofstream wc(counts_path);
  if (!wc) throw std::runtime_error("cannot write '" + counts_path + "'");
  wc << "sample_id";
  for (Eigen::Index j = 0; j < d.J(); ++j) {
    wc << delimiter
       << (d.category_names.empty() ? "cat" + std::to_string(j) : d.category_names[static_cast<std::size_t>(j)]);
  }
  wc << "\n";
  for (Eigen::Index i = 0; i < d.n(); ++i) {
    wc << (d.sample_ids.empty() ? "s" + std::to_string(i) : d.sample_ids[static_cast<std::size_t>(i)]);
    for (Eigen::Index j = 0; j < d.J(); ++j) wc << delimiter << detail::format_double(d.W(i, j));
    wc << "\n";
  }

  std::ofstream wm(meta_path);
  if (!wm) throw std::runtime_error("cannot write '" + meta_path + "'");
  wm << "sample_id" << delimiter << "exposure";
  for (Eigen::Index k = 0; k < d.p(); ++k) {
    wm << delimiter
       << (d.covariate_names.empty() ? "x" + std::to_string(k) : d.covariate_names[static_cast<std::size_t>(k)]);
  }
  wm << "\n";
  for (Eigen::Index i = 0; i < d.n(); ++i) {
    wm << (d.sample_ids.empty() ? "s" + std::to_string(i) : d.sample_ids[static_cast<std::size_t>(i)]);
    wm << delimiter << d.A[i];
    for (Eigen::Index k = 0; k < d.p(); ++k) wm << delimiter << detail::format_double(d.X(i, k));
    wm << "\n";
  }
}

}  // namespace folddiff

#endif

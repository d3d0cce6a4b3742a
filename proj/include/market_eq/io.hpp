#pragma once

// Instance files.
//
// A market is stored under a path prefix:
//   PREFIX.utilities.{mtx,csv}   utility matrix U
//   PREFIX.budgets.txt           Fisher budgets, one value per line
//   PREFIX.endowments.{mtx,csv}  exchange endowments E
//
// mtx is Matrix Market coordinate real general with 1-based indices. csv is
// one "i,j,value" triplet per line with 0-based indices; an optional
// "# shape: n,m" line fixes the dimensions, which are otherwise inferred from
// the largest indices. Blank lines and lines starting with '#' (csv, budgets)
// or '%' (mtx) are skipped.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "market_eq/errors.hpp"
#include "market_eq/instance.hpp"
#include "market_eq/sparse.hpp"

namespace market_eq::io {

enum class Format { matrix_market, csv };

inline Format parse_format(const std::string& s) {
  if (s == "mtx" || s == "matrix-market") return Format::matrix_market;
  if (s == "csv" || s == "csv-triplets") return Format::csv;
  throw std::invalid_argument("unknown matrix format '" + s + "' (expected mtx or csv)");
}

inline const char* extension(Format f) { return f == Format::matrix_market ? "mtx" : "csv"; }

namespace detail {

inline std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return in;
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  return out;
}

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline bool skippable(const std::string& line, char comment) {
  for (char c : line) {
    if (c == comment) return true;
    if (c != ' ' && c != '\t' && c != '\r') return false;
  }
  return true;
}

// Reads exactly the listed fields from a line; trailing text is an error.
template <class... T>
void parse_fields(const std::string& path, std::size_t line_no, std::string line, char sep, T&... fields) {
  if (sep != ' ') {
    for (char& c : line) {
      if (c == sep) c = ' ';
    }
  }
  std::istringstream is(line);
  bool ok = (static_cast<bool>(is >> fields) && ...);
  std::string rest;
  if (!ok || (is >> rest)) throw ParseError(path, line_no, "malformed line '" + line + "'");
}

}  // namespace detail

inline SparseMatrix read_matrix_market(const std::string& path) {
  auto in = detail::open_in(path);
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw ParseError(path, 1, "empty file");
  ++line_no;
  {
    std::istringstream hs(line);
    std::string banner, object, layout, field, symmetry;
    hs >> banner >> object >> layout >> field >> symmetry;
    if (banner != "%%MatrixMarket" || object != "matrix" || layout != "coordinate" ||
        (field != "real" && field != "integer" && field != "double") || symmetry != "general") {
      throw ParseError(path, line_no, "expected '%%MatrixMarket matrix coordinate real general'");
    }
  }
  long long rows = -1, cols = -1, declared = -1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::skippable(line, '%')) continue;
    detail::parse_fields(path, line_no, line, ' ', rows, cols, declared);
    break;
  }
  if (rows < 0 || cols < 0 || declared < 0) throw ParseError(path, line_no, "missing size line");
  std::vector<Triplet> entries;
  entries.reserve(static_cast<std::size_t>(declared));
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::skippable(line, '%')) continue;
    long long i = 0, j = 0;
    double v = 0.0;
    detail::parse_fields(path, line_no, line, ' ', i, j, v);
    if (i < 1 || i > rows || j < 1 || j > cols) throw ParseError(path, line_no, "index out of range");
    if (v < 0.0 || !std::isfinite(v)) throw ValidationError(path + ":" + std::to_string(line_no) + ": negative or non-finite value");
    entries.push_back({static_cast<Index>(i - 1), static_cast<Index>(j - 1), v});
  }
  if (static_cast<long long>(entries.size()) != declared) {
    throw ParseError(path, line_no, "header declares " + std::to_string(declared) + " entries, found " +
                                        std::to_string(entries.size()));
  }
  return SparseMatrix::from_triplets(static_cast<Index>(rows), static_cast<Index>(cols), std::move(entries));
}

inline void write_matrix_market(const SparseMatrix& M, const std::string& path) {
  auto out = detail::open_out(path);
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << M.rows() << ' ' << M.cols() << ' ' << M.nnz() << '\n';
  for (Index i = 0; i < M.rows(); ++i) {
    const RowView r = M.row(i);
    for (std::size_t k = 0; k < r.size(); ++k) {
      out << i + 1 << ' ' << r.cols[k] + 1 << ' ' << detail::format_double(r.values[k]) << '\n';
    }
  }
}

inline SparseMatrix read_csv_triplets(const std::string& path) {
  auto in = detail::open_in(path);
  std::string line;
  std::size_t line_no = 0;
  long long rows = -1, cols = -1;
  long long max_i = -1, max_j = -1;
  std::vector<Triplet> entries;
  while (std::getline(in, line)) {
    ++line_no;
    const auto shape_at = line.find("# shape:");
    if (shape_at != std::string::npos) {
      detail::parse_fields(path, line_no, line.substr(shape_at + 8), ',', rows, cols);
      continue;
    }
    if (detail::skippable(line, '#')) continue;
    long long i = 0, j = 0;
    double v = 0.0;
    detail::parse_fields(path, line_no, line, ',', i, j, v);
    if (i < 0 || j < 0) throw ParseError(path, line_no, "negative index");
    if (v < 0.0 || !std::isfinite(v)) throw ValidationError(path + ":" + std::to_string(line_no) + ": negative or non-finite value");
    max_i = std::max(max_i, i);
    max_j = std::max(max_j, j);
    entries.push_back({static_cast<Index>(i), static_cast<Index>(j), v});
  }
  if (rows < 0) rows = max_i + 1;
  if (cols < 0) cols = max_j + 1;
  if (max_i >= rows || max_j >= cols) throw ParseError(path, line_no, "index outside the declared shape");
  return SparseMatrix::from_triplets(static_cast<Index>(rows), static_cast<Index>(cols), std::move(entries));
}

inline void write_csv_triplets(const SparseMatrix& M, const std::string& path) {
  auto out = detail::open_out(path);
  out << "# shape: " << M.rows() << ',' << M.cols() << '\n';
  for (Index i = 0; i < M.rows(); ++i) {
    const RowView r = M.row(i);
    for (std::size_t k = 0; k < r.size(); ++k) {
      out << i << ',' << r.cols[k] << ',' << detail::format_double(r.values[k]) << '\n';
    }
  }
}

inline SparseMatrix read_matrix(const std::string& path, Format f) {
  return f == Format::matrix_market ? read_matrix_market(path) : read_csv_triplets(path);
}

inline void write_matrix(const SparseMatrix& M, const std::string& path, Format f) {
  if (f == Format::matrix_market) {
    write_matrix_market(M, path);
  } else {
    write_csv_triplets(M, path);
  }
}

inline std::vector<double> read_vector(const std::string& path) {
  auto in = detail::open_in(path);
  std::string line;
  std::size_t line_no = 0;
  std::vector<double> v;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::skippable(line, '#')) continue;
    double x = 0.0;
    detail::parse_fields(path, line_no, line, ' ', x);
    v.push_back(x);
  }
  return v;
}

inline void write_vector(std::span<const double> v, const std::string& path) {
  auto out = detail::open_out(path);
  for (double x : v) out << detail::format_double(x) << '\n';
}

struct Paths {
  std::string utilities, budgets, endowments;
};

inline Paths paths_for(const std::string& prefix, Format f) {
  const std::string ext = extension(f);
  return {prefix + ".utilities." + ext, prefix + ".budgets.txt", prefix + ".endowments." + ext};
}

inline FisherInstance load_fisher(const std::string& prefix, Format f) {
  const Paths p = paths_for(prefix, f);
  FisherInstance inst{read_matrix(p.utilities, f), read_vector(p.budgets)};
  if (static_cast<Index>(inst.budgets.size()) != inst.utilities.rows()) {
    throw StructuralError(p.budgets + ": " + std::to_string(inst.budgets.size()) + " budgets for " +
                          std::to_string(inst.utilities.rows()) + " buyers");
  }
  return inst;
}

inline void save_fisher(const FisherInstance& inst, const std::string& prefix, Format f) {
  const Paths p = paths_for(prefix, f);
  write_matrix(inst.utilities, p.utilities, f);
  write_vector(inst.budgets, p.budgets);
}

inline ExchangeInstance load_exchange(const std::string& prefix, Format f) {
  const Paths p = paths_for(prefix, f);
  ExchangeInstance inst{read_matrix(p.utilities, f), read_matrix(p.endowments, f)};
  if (inst.endowments.rows() != inst.utilities.rows() || inst.endowments.cols() != inst.utilities.cols()) {
    throw StructuralError(p.endowments + ": shape differs from the utility matrix");
  }
  return inst;
}

inline void save_exchange(const ExchangeInstance& inst, const std::string& prefix, Format f) {
  const Paths p = paths_for(prefix, f);
  write_matrix(inst.utilities, p.utilities, f);
  write_matrix(inst.endowments, p.endowments, f);
}

inline bool is_exchange(const std::string& prefix, Format f) {
  return std::filesystem::exists(paths_for(prefix, f).endowments);
}

}  // namespace market_eq::io

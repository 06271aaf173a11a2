#include "geolift/ingestion.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>

namespace geolift {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::string line_ref(Index line) { return "line " + std::to_string(line); }

}  // namespace

// ---------------------------------------------------------------------------
// CSV

CsvTable parse_csv(const std::string& text) {
  CsvTable table;
  std::vector<std::string> row;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  Index line = 1;
  Index row_line = 1;
  auto end_row = [&] {
    row.push_back(std::move(field));
    field.clear();
    // A bare empty line carries no fields.
    if (!(row.size() == 1 && row[0].empty() && !field_started)) {
      table.rows.push_back(std::move(row));
      table.lines.push_back(row_line);
    }
    row.clear();
    field_started = false;
  };
  for (std::size_t k = 0; k < text.size(); ++k) {
    const char c = text[k];
    if (in_quotes) {
      if (c == '"') {
        if (k + 1 < text.size() && text[k + 1] == '"') {
          field.push_back('"');
          ++k;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        if (!field.empty()) {
          throw ValidationError("CSV " + line_ref(line) + ": quote inside unquoted field");
        }
        in_quotes = true;
        field_started = true;
        break;
      case ',':
        row.push_back(std::move(field));
        field.clear();
        field_started = true;
        break;
      case '\r':
        if (k + 1 < text.size() && text[k + 1] == '\n') break;
        field.push_back(c);
        break;
      case '\n':
        end_row();
        ++line;
        row_line = line;
        break;
      default:
        field.push_back(c);
    }
  }
  if (in_quotes) throw ValidationError("CSV: unterminated quoted field starting near " + line_ref(row_line));
  if (!field.empty() || !row.empty() || field_started) end_row();
  return table;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write file: " + path.string());
  out << text;
  if (!out) throw ValidationError("write failed: " + path.string());
}

CsvTable read_csv(const std::filesystem::path& path) { return parse_csv(read_text_file(path)); }

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::optional<double> parse_double(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

// ---------------------------------------------------------------------------
// Edge lists

EdgeListData parse_edge_list(const std::string& text, EdgePolicy policy,
                             std::span<const std::string> vertices) {
  struct Record {
    Index a, b;
    double w;
    Index line;
  };
  EdgeListData out;
  std::unordered_map<std::string, Index> index;
  for (const auto& label : vertices) {
    if (!index.try_emplace(label, out.labels.size()).second) {
      throw ValidationError("duplicate vertex label '" + label + "'");
    }
    out.labels.push_back(label);
  }
  const bool fixed = !vertices.empty();
  Index line = 0;
  auto vertex = [&](const std::string& label) {
    if (fixed) {
      const auto it = index.find(label);
      if (it == index.end()) {
        throw ValidationError("edge list " + line_ref(line) + ": unknown vertex '" + label + "'");
      }
      return it->second;
    }
    auto [it, inserted] = index.try_emplace(label, out.labels.size());
    if (inserted) out.labels.push_back(label);
    return it->second;
  };

  std::vector<Record> records;
  std::istringstream in(text);
  std::string raw;
  while (std::getline(in, raw)) {
    ++line;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    if (trim(raw).empty() || raw.front() == '#') continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (;;) {
      const auto tab = raw.find('\t', start);
      fields.push_back(raw.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (fields.size() < 2 || fields.size() > 3 || fields[0].empty() || fields[1].empty()) {
      throw ValidationError("edge list " + line_ref(line) +
                            ": expected 'src<TAB>dst[<TAB>weight]'");
    }
    double w = 1.0;
    if (fields.size() == 3) {
      const auto parsed = parse_double(fields[2]);
      if (!parsed || !std::isfinite(*parsed)) {
        throw ValidationError("edge list " + line_ref(line) + ": cannot parse weight '" +
                              fields[2] + "'");
      }
      w = *parsed;
      out.weighted = true;
    }
    const Index a = vertex(fields[0]);
    const Index b = vertex(fields[1]);
    if (a == b) {
      ++out.self_loops;
      continue;
    }
    records.push_back({std::min(a, b), std::max(a, b), w, line});
  }

  std::map<std::pair<Index, Index>, double> weights;
  for (const auto& r : records) {
    auto [it, inserted] = weights.try_emplace({r.a, r.b}, r.w);
    if (inserted) continue;
    ++out.repeats;
    if (!out.weighted) continue;
    if (policy == EdgePolicy::symmetrize_union) {
      it->second += r.w;
    } else if (it->second != r.w) {
      throw ValidationError("edge list " + line_ref(r.line) + ": pair " + out.labels[r.a] + ", " +
                            out.labels[r.b] + " repeats with a different weight");
    }
  }
  std::vector<MatrixEntry> entries;
  entries.reserve(weights.size());
  for (const auto& [key, w] : weights) {
    if (w != 0.0) entries.push_back({key.first, key.second, w});
  }
  out.matrix = SimilarityMatrix::sparse(out.labels.size(), std::move(entries),
                                        out.weighted ? MatrixKind::generic : MatrixKind::adjacency);
  return out;
}

EdgeListData load_edge_list(const std::filesystem::path& path, EdgePolicy policy,
                            std::span<const std::string> vertices) {
  return parse_edge_list(read_text_file(path), policy, vertices);
}

std::string format_edge_list(const SimilarityMatrix& m, const std::vector<std::string>& labels) {
  if (labels.size() != m.size()) throw DimensionError("edge list labels do not match matrix size");
  std::vector<MatrixEntry> entries;
  if (m.is_sparse()) {
    entries = m.entries();
  } else {
    for (Index i = 0; i < m.size(); ++i) {
      for (Index j = i; j < m.size(); ++j) {
        if (m(i, j) != 0.0) entries.push_back({i, j, m(i, j)});
      }
    }
  }
  bool binary = true;
  for (const auto& e : entries) binary = binary && e.value == 1.0;
  std::string out;
  for (const auto& e : entries) {
    if (e.i == e.j || e.value == 0.0) continue;
    out += labels[e.i];
    out += '\t';
    out += labels[e.j];
    if (!binary) {
      out += '\t';
      out += format_double(e.value);
    }
    out += '\n';
  }
  return out;
}

void save_edge_list(const std::filesystem::path& path, const SimilarityMatrix& m,
                    const std::vector<std::string>& labels) {
  write_text_file(path, format_edge_list(m, labels));
}

// ---------------------------------------------------------------------------
// Dense matrices

MatrixKind infer_kind(const Matrix& m) {
  bool binary = true, unit_diag = true, bounded = true;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      const double v = m(i, j);
      if (i == j) {
        binary = binary && v == 0.0;
        unit_diag = unit_diag && v == 1.0;
      } else {
        binary = binary && (v == 0.0 || v == 1.0);
      }
      bounded = bounded && v >= -1.0 && v <= 1.0;
    }
  }
  if (binary) return MatrixKind::adjacency;
  if (unit_diag && bounded) return MatrixKind::correlation;
  return MatrixKind::generic;
}

DenseMatrixData parse_dense_matrix(const std::string& text, std::optional<MatrixKind> kind) {
  const CsvTable csv = parse_csv(text);
  DenseMatrixData out;
  std::size_t first = 0;
  if (!csv.rows.empty()) {
    for (const auto& cell : csv.rows[0]) {
      if (!parse_double(cell)) {
        out.had_header = true;
        break;
      }
    }
  }
  if (out.had_header) {
    out.labels = csv.rows[0];
    first = 1;
  }
  const std::size_t n = csv.rows.size() - first;
  if (n == 0) throw ValidationError("dense matrix file has no numeric rows");
  if (out.had_header && out.labels.size() != n) {
    throw ValidationError("dense matrix header has " + std::to_string(out.labels.size()) +
                          " labels for " + std::to_string(n) + " rows");
  }
  Matrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t r = 0; r < n; ++r) {
    const auto& row = csv.rows[first + r];
    const Index line = csv.lines[first + r];
    if (row.size() != n) {
      throw ValidationError("dense matrix is not square: " + line_ref(line) + " has " +
                            std::to_string(row.size()) + " columns, expected " + std::to_string(n));
    }
    for (std::size_t c = 0; c < n; ++c) {
      const auto v = parse_double(row[c]);
      if (!v) {
        throw ValidationError("dense matrix " + line_ref(line) + ", column " + std::to_string(c + 1) +
                              ": non-numeric value '" + row[c] + "'");
      }
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = *v;
    }
  }
  if (!out.had_header) {
    out.labels.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.labels.push_back(std::to_string(i));
  }
  const MatrixKind k = kind ? *kind : infer_kind(m);
  out.matrix = SimilarityMatrix::dense(std::move(m), k, 1e-9);
  return out;
}

DenseMatrixData load_dense_matrix(const std::filesystem::path& path, std::optional<MatrixKind> kind) {
  return parse_dense_matrix(read_text_file(path), kind);
}

std::string format_dense_matrix(const SimilarityMatrix& m, const std::vector<std::string>& labels) {
  if (!labels.empty() && labels.size() != m.size()) {
    throw DimensionError("dense matrix labels do not match matrix size");
  }
  std::string out;
  for (std::size_t i = 0; i < labels.size(); ++i) out += (i ? "," : "") + csv_escape(labels[i]);
  if (!labels.empty()) out += '\n';
  const Matrix d = m.to_dense();
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    for (Eigen::Index j = 0; j < d.cols(); ++j) {
      if (j) out += ',';
      out += format_double(d(i, j));
    }
    out += '\n';
  }
  return out;
}

void save_dense_matrix(const std::filesystem::path& path, const SimilarityMatrix& m,
                       const std::vector<std::string>& labels) {
  write_text_file(path, format_dense_matrix(m, labels));
}

// ---------------------------------------------------------------------------
// Time series

TimeSeriesTable::TimeSeriesTable(std::vector<std::string> entities, std::vector<std::string> timestamps,
                                 Matrix values,
                                 Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> observed)
    : entities_(std::move(entities)),
      timestamps_(std::move(timestamps)),
      values_(std::move(values)),
      observed_(std::move(observed)) {
  const auto n = static_cast<Eigen::Index>(entities_.size());
  const auto t = static_cast<Eigen::Index>(timestamps_.size());
  if (n == 0 || t == 0) throw ValidationError("time-series table needs entities and timestamps");
  if (values_.rows() != n || values_.cols() != t || observed_.rows() != n || observed_.cols() != t) {
    throw DimensionError("time-series values do not match the label counts");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < t; ++j) {
      if (observed_(i, j) && !std::isfinite(values_(i, j))) {
        throw ValidationError("non-finite observed value for entity " + entities_[i]);
      }
    }
  }
}

Index TimeSeriesTable::missing_count() const {
  return static_cast<Index>((!observed_).count());
}

DropReport drop_incomplete(const TimeSeriesTable& t) {
  const Index n = t.entities_count();
  const Index m = t.timestamps_count();
  const auto& obs = t.observed();
  std::vector<Index> row_missing(n, 0), col_missing(m, 0);
  std::vector<bool> row_alive(n, true), col_alive(m, true);
  Index total = 0;
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < m; ++j) {
      if (!obs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))) {
        ++row_missing[i];
        ++col_missing[j];
        ++total;
      }
    }
  }
  Index rows_left = n, cols_left = m;
  std::vector<std::string> dropped_e, dropped_t;
  while (total > 0) {
    // Fractions a/b compared exactly as a*d vs c*b.
    Index best_num = 0, best_den = 1;
    bool best_is_row = true;
    Index best = n + m;
    for (Index i = 0; i < n; ++i) {
      if (row_alive[i] && row_missing[i] * best_den > best_num * cols_left) {
        best_num = row_missing[i];
        best_den = cols_left;
        best = i;
      }
    }
    for (Index j = 0; j < m; ++j) {
      if (col_alive[j] && col_missing[j] * best_den > best_num * rows_left) {
        best_num = col_missing[j];
        best_den = rows_left;
        best = j;
        best_is_row = false;
      }
    }
    if (best_is_row) {
      row_alive[best] = false;
      --rows_left;
      total -= row_missing[best];
      dropped_e.push_back(t.entities()[best]);
      for (Index j = 0; j < m; ++j) {
        if (col_alive[j] && !obs(static_cast<Eigen::Index>(best), static_cast<Eigen::Index>(j))) --col_missing[j];
      }
    } else {
      col_alive[best] = false;
      --cols_left;
      total -= col_missing[best];
      dropped_t.push_back(t.timestamps()[best]);
      for (Index i = 0; i < n; ++i) {
        if (row_alive[i] && !obs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(best))) --row_missing[i];
      }
    }
    if (rows_left == 0 || cols_left == 0) {
      throw DataError("removing incomplete entities and timestamps leaves an empty table");
    }
  }
  std::vector<Eigen::Index> rows, cols;
  std::vector<std::string> ents, stamps;
  for (Index i = 0; i < n; ++i) {
    if (row_alive[i]) {
      rows.push_back(static_cast<Eigen::Index>(i));
      ents.push_back(t.entities()[i]);
    }
  }
  for (Index j = 0; j < m; ++j) {
    if (col_alive[j]) {
      cols.push_back(static_cast<Eigen::Index>(j));
      stamps.push_back(t.timestamps()[j]);
    }
  }
  Matrix values = t.values()(rows, cols);
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> observed =
      Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(values.rows(), values.cols(), true);
  return DropReport{TimeSeriesTable(std::move(ents), std::move(stamps), std::move(values), std::move(observed)),
                    std::move(dropped_e), std::move(dropped_t)};
}

SimilarityMatrix correlation_matrix(const TimeSeriesTable& t) {
  if (t.missing_count() != 0) {
    throw ValidationError("time series has missing values; remove incomplete rows and dates first");
  }
  if (t.entities_count() < 2) throw ValidationError("correlation needs at least 2 entities");
  if (t.timestamps_count() < 2) throw ValidationError("correlation needs at least 2 timestamps");
  const Matrix& v = t.values();
  Matrix c = v.colwise() - v.rowwise().mean();
  for (Eigen::Index i = 0; i < c.rows(); ++i) {
    const double norm = c.row(i).norm();
    if (!(norm > 0.0)) throw DataError("zero-variance time series for entity " + t.entities()[i]);
    c.row(i) /= norm;
  }
  const Eigen::Index n = c.rows();
  Matrix r(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    r(i, i) = 1.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double x = std::clamp(c.row(i).dot(c.row(j)), -1.0, 1.0);
      r(i, j) = x;
      r(j, i) = x;
    }
  }
  return SimilarityMatrix::dense(std::move(r), MatrixKind::correlation);
}

TimeSeriesTable parse_time_series(const std::string& text) {
  const CsvTable csv = parse_csv(text);
  if (csv.rows.size() < 2) throw ValidationError("time-series file needs a header and at least one entity row");
  const auto& header = csv.rows[0];
  if (header.size() < 2) throw ValidationError("time-series header needs at least one timestamp");
  std::vector<std::string> stamps(header.begin() + 1, header.end());
  const Index m = stamps.size();
  const Index n = csv.rows.size() - 1;
  Matrix values = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> observed(values.rows(), values.cols());
  std::vector<std::string> entities;
  for (Index r = 0; r < n; ++r) {
    const auto& row = csv.rows[r + 1];
    const Index line = csv.lines[r + 1];
    if (row.size() != m + 1) {
      throw ValidationError("time-series " + line_ref(line) + " has " + std::to_string(row.size()) +
                            " cells, expected " + std::to_string(m + 1));
    }
    entities.push_back(row[0]);
    for (Index j = 0; j < m; ++j) {
      const auto cell = trim(row[j + 1]);
      const auto ri = static_cast<Eigen::Index>(r);
      const auto cj = static_cast<Eigen::Index>(j);
      if (cell.empty()) {
        observed(ri, cj) = false;
        continue;
      }
      const auto v = parse_double(cell);
      if (!v || !std::isfinite(*v)) {
        throw ValidationError("time-series " + line_ref(line) + ": cannot parse '" + row[j + 1] + "'");
      }
      values(ri, cj) = *v;
      observed(ri, cj) = true;
    }
  }
  return TimeSeriesTable(std::move(entities), std::move(stamps), std::move(values), std::move(observed));
}

TimeSeriesTable load_time_series(const std::filesystem::path& path) {
  return parse_time_series(read_text_file(path));
}

// ---------------------------------------------------------------------------
// Points

std::string format_points(const PointCloud& x, const std::vector<std::string>& labels,
                          const std::string& prefix) {
  if (labels.size() != x.size()) throw DimensionError("point labels do not match point count");
  std::string out = "label";
  for (Index c = 0; c < x.dim(); ++c) out += "," + prefix + std::to_string(c + 1);
  out += '\n';
  for (Index i = 0; i < x.size(); ++i) {
    out += csv_escape(labels[i]);
    for (Index c = 0; c < x.dim(); ++c) {
      out += ',';
      out += format_double(x.coords()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)));
    }
    out += '\n';
  }
  return out;
}

void save_points(const std::filesystem::path& path, const PointCloud& x,
                 const std::vector<std::string>& labels, const std::string& prefix) {
  write_text_file(path, format_points(x, labels, prefix));
}

LabeledPoints parse_points(const std::string& text) {
  const CsvTable csv = parse_csv(text);
  if (csv.rows.size() < 2) throw ValidationError("point file needs a header and at least one row");
  const Index dim = csv.rows[0].size() - 1;
  if (dim == 0) throw ValidationError("point file needs at least one coordinate column");
  Matrix m(static_cast<Eigen::Index>(csv.rows.size() - 1), static_cast<Eigen::Index>(dim));
  LabeledPoints out;
  for (std::size_t r = 1; r < csv.rows.size(); ++r) {
    const auto& row = csv.rows[r];
    if (row.size() != dim + 1) {
      throw ValidationError("point file " + line_ref(csv.lines[r]) + " has " + std::to_string(row.size()) +
                            " cells, expected " + std::to_string(dim + 1));
    }
    out.labels.push_back(row[0]);
    for (Index c = 0; c < dim; ++c) {
      const auto v = parse_double(row[c + 1]);
      if (!v) {
        throw ValidationError("point file " + line_ref(csv.lines[r]) + ": cannot parse '" + row[c + 1] + "'");
      }
      m(static_cast<Eigen::Index>(r - 1), static_cast<Eigen::Index>(c)) = *v;
    }
  }
  out.points = PointCloud(std::move(m));
  return out;
}

LabeledPoints load_points(const std::filesystem::path& path) { return parse_points(read_text_file(path)); }

std::vector<std::pair<std::string, double>> load_label_values(const std::filesystem::path& path,
                                                              const std::string& column) {
  const CsvTable csv = read_csv(path);
  if (csv.rows.empty()) throw ValidationError("empty file: " + path.string());
  const auto& header = csv.rows[0];
  std::size_t col = 0;
  for (std::size_t c = 1; c < header.size(); ++c) {
    if (header[c] == column) col = c;
  }
  if (col == 0) throw ValidationError("column '" + column + "' not found in " + path.string());
  std::vector<std::pair<std::string, double>> out;
  for (std::size_t r = 1; r < csv.rows.size(); ++r) {
    const auto& row = csv.rows[r];
    if (row.size() != header.size()) {
      throw ValidationError(path.string() + " " + line_ref(csv.lines[r]) + ": wrong number of cells");
    }
    const auto v = parse_double(row[col]);
    if (!v) throw ValidationError(path.string() + " " + line_ref(csv.lines[r]) + ": cannot parse '" + row[col] + "'");
    out.emplace_back(row[0], *v);
  }
  return out;
}

}  // namespace geolift

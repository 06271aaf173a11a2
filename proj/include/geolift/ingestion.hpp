#ifndef GEOLIFT_INGESTION_HPP
#define GEOLIFT_INGESTION_HPP

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "geolift/core.hpp"

namespace geolift {

// ---------------------------------------------------------------------------
// CSV plumbing (RFC 4180 quoting, LF or CRLF)

struct CsvTable {
  std::vector<std::vector<std::string>> rows;
  std::vector<Index> lines;  ///< 1-based source line where each row starts
};

CsvTable parse_csv(const std::string& text);
CsvTable read_csv(const std::filesystem::path& path);
std::string csv_escape(const std::string& field);
/// Shortest text that is guaranteed to read back to the same double ("%.17g").
std::string format_double(double v);
/// Strict full-string parse; nullopt on failure.
std::optional<double> parse_double(std::string_view s);

std::string read_text_file(const std::filesystem::path& path);
/// Truncates, then writes.
void write_text_file(const std::filesystem::path& path, const std::string& text);

// ---------------------------------------------------------------------------
// Edge lists

enum class EdgePolicy {
  /// Repeated pairs (either direction) must agree on weight.
  symmetrize_error,
  /// Repeated pairs collapse; weighted repeats are summed.
  symmetrize_union,
};

struct EdgeListData {
  SimilarityMatrix matrix = SimilarityMatrix::sparse(0, {}, MatrixKind::adjacency);
  std::vector<std::string> labels;  ///< vertex labels in index order
  Index self_loops = 0;             ///< dropped self-loop lines
  Index repeats = 0;                ///< lines naming an already seen pair
  bool weighted = false;
};

/// `src<TAB>dst[<TAB>weight]` per line, '#' comments. Vertices are indexed
/// by first appearance, or by `vertices` when given (which then must name
/// every endpoint and may include isolated vertices). Unweighted files give
/// a binary adjacency matrix.
EdgeListData parse_edge_list(const std::string& text,
                             EdgePolicy policy = EdgePolicy::symmetrize_union,
                             std::span<const std::string> vertices = {});
EdgeListData load_edge_list(const std::filesystem::path& path,
                            EdgePolicy policy = EdgePolicy::symmetrize_union,
                            std::span<const std::string> vertices = {});
/// Upper-triangle nonzeros as `label<TAB>label[<TAB>weight]`; weights are
/// written unless every value is exactly 1.
std::string format_edge_list(const SimilarityMatrix& m, const std::vector<std::string>& labels);
void save_edge_list(const std::filesystem::path& path, const SimilarityMatrix& m,
                    const std::vector<std::string>& labels);

// ---------------------------------------------------------------------------
// Dense matrices

struct DenseMatrixData {
  SimilarityMatrix matrix = SimilarityMatrix::sparse(0, {}, MatrixKind::generic);
  std::vector<std::string> labels;  ///< header labels, or "0".."n-1"
  bool had_header = false;
};

/// Kind inferred when absent: binary with zero diagonal -> adjacency; unit
/// diagonal within [-1, 1] -> correlation; otherwise generic.
MatrixKind infer_kind(const Matrix& m);

DenseMatrixData parse_dense_matrix(const std::string& text,
                                   std::optional<MatrixKind> kind = std::nullopt);
DenseMatrixData load_dense_matrix(const std::filesystem::path& path,
                                  std::optional<MatrixKind> kind = std::nullopt);
std::string format_dense_matrix(const SimilarityMatrix& m,
                                const std::vector<std::string>& labels = {});
void save_dense_matrix(const std::filesystem::path& path, const SimilarityMatrix& m,
                       const std::vector<std::string>& labels = {});

// ---------------------------------------------------------------------------
// Time series

class TimeSeriesTable {
 public:
  /// `observed(i, t)` false marks a missing value (the value is ignored).
  TimeSeriesTable(std::vector<std::string> entities, std::vector<std::string> timestamps,
                  Matrix values, Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> observed);

  Index entities_count() const noexcept { return entities_.size(); }
  Index timestamps_count() const noexcept { return timestamps_.size(); }
  const std::vector<std::string>& entities() const noexcept { return entities_; }
  const std::vector<std::string>& timestamps() const noexcept { return timestamps_; }
  const Matrix& values() const noexcept { return values_; }
  const Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>& observed() const noexcept {
    return observed_;
  }
  Index missing_count() const;

 private:
  std::vector<std::string> entities_;
  std::vector<std::string> timestamps_;
  Matrix values_;
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> observed_;
};

struct DropReport {
  TimeSeriesTable table;
  std::vector<std::string> dropped_entities;    ///< in removal order
  std::vector<std::string> dropped_timestamps;  ///< in removal order
};

/// Greedy removal of the entity or timestamp with the highest missing
/// fraction until nothing is missing. Ties: entities before timestamps,
/// then lowest index.
DropReport drop_incomplete(const TimeSeriesTable& t);

/// Pearson correlations between entity rows; the table must be complete.
SimilarityMatrix correlation_matrix(const TimeSeriesTable& t);

/// First column entity label, first row timestamp labels, empty cell missing.
TimeSeriesTable parse_time_series(const std::string& text);
TimeSeriesTable load_time_series(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Labelled point clouds: header `label,<prefix>1,...`, one point per row.

struct LabeledPoints {
  std::vector<std::string> labels;
  PointCloud points;
};

std::string format_points(const PointCloud& x, const std::vector<std::string>& labels,
                          const std::string& prefix);
void save_points(const std::filesystem::path& path, const PointCloud& x,
                 const std::vector<std::string>& labels, const std::string& prefix);
LabeledPoints parse_points(const std::string& text);
LabeledPoints load_points(const std::filesystem::path& path);

/// (label, value) pairs from the named column of a headed CSV whose first
/// column holds labels.
std::vector<std::pair<std::string, double>> load_label_values(const std::filesystem::path& path,
                                                              const std::string& column);

}  // namespace geolift

#endif  // GEOLIFT_INGESTION_HPP

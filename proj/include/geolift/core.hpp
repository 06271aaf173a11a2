#ifndef GEOLIFT_CORE_HPP
#define GEOLIFT_CORE_HPP

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cstddef>
#include <limits>
#include <span>
#include <string_view>
#include <vector>

#include "geolift/error.hpp"
#include "geolift/random.hpp"

namespace geolift {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = std::size_t;

enum class MatrixKind { adjacency, correlation, generic };

std::string_view to_string(MatrixKind kind);

/// One stored entry of a sparse symmetric matrix, upper triangle (i <= j).
struct MatrixEntry {
  Index i = 0;
  Index j = 0;
  double value = 0.0;
};

/// Symmetric n x n similarity matrix, dense or sparse. Sparse storage holds
/// the upper triangle only; reads mirror it. Immutable after construction.
class SimilarityMatrix {
 public:
  /// Validates symmetry (to `symmetry_tol`, relative) and the kind's value
  /// constraints, then stores an exactly symmetric copy.
  static SimilarityMatrix dense(Matrix values, MatrixKind kind,
                                double symmetry_tol = 1e-12);
  /// Entries may be given in either triangle; (i,j) and (j,i) denote the same
  /// slot and may appear at most once.
  static SimilarityMatrix sparse(Index n, std::vector<MatrixEntry> entries,
                                 MatrixKind kind);

  Index size() const noexcept { return n_; }
  MatrixKind kind() const noexcept { return kind_; }
  bool is_sparse() const noexcept { return sparse_; }

  double operator()(Index i, Index j) const;
  Matrix to_dense() const;
  /// Upper-triangle entries (sparse storage), sorted by (i, j).
  const std::vector<MatrixEntry>& entries() const noexcept { return upper_; }
  /// Number of stored upper-triangle nonzeros (dense: counted).
  Index nonzeros_upper() const;

  Matrix multiply(const Matrix& x) const;
  double frobenius_norm() const;

 private:
  SimilarityMatrix() = default;
  void validate_kind() const;

  Index n_ = 0;
  MatrixKind kind_ = MatrixKind::generic;
  bool sparse_ = false;
  Matrix dense_;
  std::vector<MatrixEntry> upper_;
  Eigen::SparseMatrix<double, Eigen::RowMajor> full_;
};

/// n x dim point coordinates, one point per row.
class PointCloud {
 public:
  PointCloud() = default;
  explicit PointCloud(Matrix coords);

  Index size() const noexcept { return static_cast<Index>(coords_.rows()); }
  Index dim() const noexcept { return static_cast<Index>(coords_.cols()); }
  const Matrix& coords() const noexcept { return coords_; }
  auto row(Index i) const { return coords_.row(static_cast<Eigen::Index>(i)); }

  PointCloud select_rows(std::span<const Index> rows) const;

 private:
  Matrix coords_;
};

/// Square matrix of nonnegative distances with zero diagonal. Disconnected
/// pairs hold the `unreachable` sentinel.
class DistanceMatrix {
 public:
  static constexpr double unreachable = std::numeric_limits<double>::infinity();

  DistanceMatrix() = default;
  explicit DistanceMatrix(Matrix entries);

  static DistanceMatrix euclidean(const PointCloud& points);

  Index size() const noexcept { return static_cast<Index>(d_.rows()); }
  double operator()(Index i, Index j) const {
    return d_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }
  static bool is_unreachable(double v) noexcept { return v == unreachable; }
  bool all_finite() const;
  const Matrix& entries() const noexcept { return d_; }

  DistanceMatrix restrict(std::span<const Index> keep) const;

 private:
  Matrix d_;
};

enum class EigenOrder {
  /// Descending |lambda|; ties toward the positive value, then lowest index.
  magnitude,
  /// Descending signed value.
  algebraic,
};

struct EigenOptions {
  EigenOrder order = EigenOrder::magnitude;
  /// Matrices larger than this use the Lanczos path.
  Index dense_threshold = 2048;
  double dense_tol = 1e-8;
  double iterative_tol = 1e-6;
  /// Upper bound on total Lanczos steps before giving up.
  Index max_iterations = 20000;
  Seed seed{0x5eed};
};

struct EigenPairs {
  std::vector<double> values;
  /// n x p, orthonormal columns; column k pairs with values[k].
  Matrix vectors;
};

/// Leading p eigenpairs of a symmetric matrix. Each eigenvector is signed so
/// that its largest-magnitude component (lowest index on ties) is positive.
EigenPairs symmetric_eigs(const SimilarityMatrix& m, Index p,
                          const EigenOptions& opts = {});
EigenPairs symmetric_eigs(const Matrix& m, Index p, const EigenOptions& opts = {});

/// B = -1/2 J D^2 J with J the centering matrix.
Matrix double_center(const DistanceMatrix& d);

}  // namespace geolift

#endif  // GEOLIFT_CORE_HPP

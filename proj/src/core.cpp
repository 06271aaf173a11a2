#include "geolift/core.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace geolift {

std::string_view to_string(MatrixKind kind) {
  switch (kind) {
    case MatrixKind::adjacency:
      return "adjacency";
    case MatrixKind::correlation:
      return "correlation";
    case MatrixKind::generic:
      return "generic";
  }
  return "generic";
}

namespace {

std::string position(Index i, Index j) {
  std::ostringstream os;
  os << "(" << i << ", " << j << ")";
  return os.str();
}

void check_kind_value(MatrixKind kind, Index i, Index j, double v) {
  if (!std::isfinite(v)) {
    throw ValidationError("non-finite entry at " + position(i, j));
  }
  switch (kind) {
    case MatrixKind::adjacency:
      if (v != 0.0 && v != 1.0) {
        throw ValidationError("adjacency entry not in {0,1} at " + position(i, j));
      }
      if (i == j && v != 0.0) {
        throw ValidationError("adjacency diagonal must be zero at " + position(i, j));
      }
      break;
    case MatrixKind::correlation:
      if (v < -1.0 || v > 1.0) {
        throw ValidationError("correlation entry outside [-1,1] at " + position(i, j));
      }
      if (i == j && v != 1.0) {
        throw ValidationError("correlation diagonal must be one at " + position(i, j));
      }
      break;
    case MatrixKind::generic:
      break;
  }
}

}  // namespace

SimilarityMatrix SimilarityMatrix::dense(Matrix values, MatrixKind kind,
                                         double symmetry_tol) {
  if (values.rows() != values.cols()) {
    throw DimensionError("similarity matrix must be square");
  }
  const Eigen::Index n = values.rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i; j < n; ++j) {
      const double a = values(i, j);
      const double b = values(j, i);
      if (!std::isfinite(a) || !std::isfinite(b)) {
        throw ValidationError("non-finite entry at " + position(i, j));
      }
      const double scale = std::max({1.0, std::abs(a), std::abs(b)});
      if (std::abs(a - b) > symmetry_tol * scale) {
        throw ValidationError("matrix is not symmetric at " + position(i, j));
      }
      values(j, i) = a;
    }
  }
  SimilarityMatrix m;
  m.n_ = static_cast<Index>(n);
  m.kind_ = kind;
  m.sparse_ = false;
  m.dense_ = std::move(values);
  m.validate_kind();
  return m;
}

SimilarityMatrix SimilarityMatrix::sparse(Index n, std::vector<MatrixEntry> entries,
                                          MatrixKind kind) {
  for (auto& e : entries) {
    if (e.i >= n || e.j >= n) {
      throw DimensionError("sparse entry " + position(e.i, e.j) + " out of range");
    }
    if (e.i > e.j) std::swap(e.i, e.j);
  }
  std::sort(entries.begin(), entries.end(), [](const MatrixEntry& a, const MatrixEntry& b) {
    return a.i != b.i ? a.i < b.i : a.j < b.j;
  });
  for (std::size_t k = 1; k < entries.size(); ++k) {
    if (entries[k].i == entries[k - 1].i && entries[k].j == entries[k - 1].j) {
      throw ValidationError("duplicate sparse entry " + position(entries[k].i, entries[k].j));
    }
  }
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(entries.size() * 2);
  for (const auto& e : entries) {
    const auto i = static_cast<int>(e.i);
    const auto j = static_cast<int>(e.j);
    triplets.emplace_back(i, j, e.value);
    if (i != j) triplets.emplace_back(j, i, e.value);
  }
  SimilarityMatrix m;
  m.n_ = n;
  m.kind_ = kind;
  m.sparse_ = true;
  m.upper_ = std::move(entries);
  m.full_.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  m.full_.setFromTriplets(triplets.begin(), triplets.end());
  m.full_.makeCompressed();
  m.validate_kind();
  return m;
}

void SimilarityMatrix::validate_kind() const {
  if (sparse_) {
    for (const auto& e : upper_) check_kind_value(kind_, e.i, e.j, e.value);
    if (kind_ == MatrixKind::correlation) {
      // Implicit zeros on the diagonal would violate diag = 1.
      std::vector<bool> seen(n_, false);
      for (const auto& e : upper_) {
        if (e.i == e.j) seen[e.i] = true;
      }
      for (Index i = 0; i < n_; ++i) {
        if (!seen[i]) throw ValidationError("correlation diagonal must be one at " + position(i, i));
      }
    }
    return;
  }
  for (Index i = 0; i < n_; ++i) {
    for (Index j = i; j < n_; ++j) {
      check_kind_value(kind_, i, j, dense_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    }
  }
}

double SimilarityMatrix::operator()(Index i, Index j) const {
  if (i >= n_ || j >= n_) throw DimensionError("index out of range");
  if (!sparse_) return dense_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  return full_.coeff(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
}

Matrix SimilarityMatrix::to_dense() const {
  if (!sparse_) return dense_;
  return Matrix(full_);
}

Index SimilarityMatrix::nonzeros_upper() const {
  if (sparse_) {
    return static_cast<Index>(std::count_if(upper_.begin(), upper_.end(),
                                            [](const MatrixEntry& e) { return e.value != 0.0; }));
  }
  Index count = 0;
  for (Index i = 0; i < n_; ++i) {
    for (Index j = i; j < n_; ++j) {
      if (dense_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) != 0.0) ++count;
    }
  }
  return count;
}

Matrix SimilarityMatrix::multiply(const Matrix& x) const {
  if (static_cast<Index>(x.rows()) != n_) throw DimensionError("multiply: shape mismatch");
  if (sparse_) return full_ * x;
  return dense_ * x;
}

double SimilarityMatrix::frobenius_norm() const {
  if (!sparse_) return dense_.norm();
  double acc = 0.0;
  for (const auto& e : upper_) acc += (e.i == e.j ? 1.0 : 2.0) * e.value * e.value;
  return std::sqrt(acc);
}

PointCloud::PointCloud(Matrix coords) : coords_(std::move(coords)) {
  if (coords_.cols() < 1) throw DimensionError("point cloud needs dim >= 1");
  if (!coords_.allFinite()) throw ValidationError("point cloud has non-finite coordinates");
}

PointCloud PointCloud::select_rows(std::span<const Index> rows) const {
  Matrix out(static_cast<Eigen::Index>(rows.size()), coords_.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k] >= size()) throw DimensionError("row index out of range");
    out.row(static_cast<Eigen::Index>(k)) = coords_.row(static_cast<Eigen::Index>(rows[k]));
  }
  return PointCloud(std::move(out));
}

DistanceMatrix::DistanceMatrix(Matrix entries) : d_(std::move(entries)) {
  if (d_.rows() != d_.cols()) throw DimensionError("distance matrix must be square");
  const Eigen::Index n = d_.rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (d_(i, i) != 0.0) throw ValidationError("distance matrix diagonal must be zero");
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double a = d_(i, j);
      if (std::isnan(a) || a < 0.0) {
        throw ValidationError("distance entry must be nonnegative at " + position(i, j));
      }
      if (a != d_(j, i)) throw ValidationError("distance matrix not symmetric at " + position(i, j));
    }
  }
}

DistanceMatrix DistanceMatrix::euclidean(const PointCloud& points) {
  const auto n = static_cast<Eigen::Index>(points.size());
  Matrix d = Matrix::Zero(n, n);
  const Matrix& x = points.coords();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double v = (x.row(i) - x.row(j)).norm();
      d(i, j) = v;
      d(j, i) = v;
    }
  }
  return DistanceMatrix(std::move(d));
}

bool DistanceMatrix::all_finite() const { return d_.allFinite(); }

DistanceMatrix DistanceMatrix::restrict(std::span<const Index> keep) const {
  const auto m = static_cast<Eigen::Index>(keep.size());
  Matrix out(m, m);
  for (Eigen::Index a = 0; a < m; ++a) {
    for (Eigen::Index b = 0; b < m; ++b) {
      out(a, b) = d_(static_cast<Eigen::Index>(keep[a]), static_cast<Eigen::Index>(keep[b]));
    }
  }
  return DistanceMatrix(std::move(out));
}

Matrix double_center(const DistanceMatrix& d) {
  if (!d.all_finite()) {
    throw DataError(
        "distance matrix has unreachable pairs; restrict to a connected component "
        "(e.g. component_policy = largest_component) before double centering");
  }
  const Eigen::Index n = static_cast<Eigen::Index>(d.size());
  if (n == 0) return Matrix(0, 0);
  Matrix sq = d.entries().array().square().matrix();
  const Vector row_mean = sq.rowwise().mean();
  const double grand = row_mean.mean();
  Matrix b(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i; j < n; ++j) {
      b(i, j) = -0.5 * (sq(i, j) - row_mean(i) - row_mean(j) + grand);
      b(j, i) = b(i, j);
    }
  }
  return b;
}

}  // namespace geolift

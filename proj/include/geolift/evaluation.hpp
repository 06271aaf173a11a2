#ifndef GEOLIFT_EVALUATION_HPP
#define GEOLIFT_EVALUATION_HPP

#include <span>
#include <vector>

#include "geolift/core.hpp"

namespace geolift {

/// target_i ~ scale * rotation * source_i + translation.
struct AlignmentResult {
  double scale = 1.0;
  Matrix rotation;  ///< orthogonal, reflections allowed
  Vector translation;
  double residual_rms = 0.0;

  PointCloud apply(const PointCloud& source) const;
};

/// Least-squares similarity transform (scale, orthogonal map, translation)
/// from source onto target.
AlignmentResult procrustes_align(const PointCloud& source, const PointCloud& target);

/// Orthogonal Q minimizing sum |Q source_i - target_i|^2, no scale and no
/// translation. Returned as a dim x dim matrix acting on column vectors.
Matrix orthogonal_procrustes(const PointCloud& source, const PointCloud& target);

/// Per-point RMS residual after procrustes_align(zhat, z).
double recovery_error(const PointCloud& zhat, const PointCloud& z);

/// Spearman rank correlation with average ranks for ties.
double monotonicity_diagnostic(std::span<const double> zhat, std::span<const double> covariate);

/// Average ranks (1-based) of the values.
std::vector<double> average_ranks(std::span<const double> values);

struct GeodesicRegression {
  double slope = 0.0;  ///< through the origin
  double r2 = 0.0;     ///< 1 - SS_res / SS_tot, SS_tot centered
  Index pairs = 0;     ///< finite pairs used
  Index excluded = 0;  ///< pairs with an unreachable entry
};

/// Regression of dhat on dz over the strict upper triangle.
GeodesicRegression geodesic_regression(const DistanceMatrix& dhat, const DistanceMatrix& dz);

struct Assignment {
  std::vector<Index> column;  ///< column assigned to each row
  double cost = 0.0;          ///< sum of cost(i, column[i]) in row order
};

/// Exact minimum-cost perfect matching of a square cost matrix
/// (shortest augmenting paths with potentials).
Assignment solve_assignment(const Matrix& cost);

struct EmdResult {
  double mean = 0.0;
  double standard_error = 0.0;  ///< sample sd / sqrt(reps); 0 for one repetition
  std::vector<double> per_rep;
};

/// Balanced Earth Mover's distance between `sample`-point subsets of two
/// groups under the distance matrix, averaged over repetitions.
EmdResult earth_mover_distance(const DistanceMatrix& d, std::span<const Index> group_a,
                               std::span<const Index> group_b, Index sample, Seed seed,
                               Index reps = 1);

}  // namespace geolift

#endif  // GEOLIFT_EVALUATION_HPP

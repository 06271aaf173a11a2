#ifndef GEOLIFT_SPECTRAL_HPP
#define GEOLIFT_SPECTRAL_HPP

#include <optional>
#include <span>
#include <vector>

#include "geolift/core.hpp"

namespace geolift {

/// Embedding dimension p: explicit, or chosen from the spectrum.
struct SpectralConfig {
  std::optional<Index> p;  ///< nullopt = auto
  Index max_p = 10;        ///< search range and spectrum length for auto
  Index rank_elbow = 1;    ///< which profile-likelihood elbow auto picks
  bool degree_correct = false;
  EigenOptions eigen{};
};

/// X = U |S|^{1/2}: rows are the embedded points.
PointCloud spectral_embed(const SimilarityMatrix& a, Index p, const EigenOptions& opts = {});

/// Same, from precomputed eigenpairs (first p columns used).
PointCloud spectral_embed(const EigenPairs& pairs, Index p);

/// Profile-likelihood elbow of a magnitude-sorted spectrum: the split q in
/// [1, max_p] maximizing the two-group Gaussian log-likelihood with a shared
/// variance. Returns 1 when every split has zero pooled variance.
Index select_rank(std::span<const double> spectrum, Index max_p);

/// First `count` elbows: each one reapplies select_rank to the spectrum tail
/// after the previous elbow. Elbow positions are cumulative (1-based).
std::vector<Index> select_rank_elbows(std::span<const double> spectrum, Index max_p,
                                      Index count);

struct DegreeCorrected {
  PointCloud points;           ///< unit-norm rows, zero rows removed
  std::vector<Index> kept;     ///< original row index of each output row
  std::vector<Index> dropped;  ///< rows with norm < 1e-12
};

/// Spherical projection: each row divided by its Euclidean norm.
DegreeCorrected degree_correct(const PointCloud& x);

struct SpectralResult {
  PointCloud embedding;
  std::vector<double> spectrum;  ///< leading eigenvalues (signed), magnitude order
  Index p = 0;
  bool p_auto = false;
  std::vector<Index> kept;  ///< rows of `embedding` in input indexing
  std::vector<Index> dropped;
};

/// Full embedding stage: eigenpairs, optional rank selection and optional
/// degree correction.
SpectralResult embed(const SimilarityMatrix& a, const SpectralConfig& cfg);

}  // namespace geolift

#endif  // GEOLIFT_SPECTRAL_HPP

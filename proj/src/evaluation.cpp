#include "geolift/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace geolift {

namespace {

void check_matched(const PointCloud& a, const PointCloud& b) {
  if (a.size() != b.size() || a.dim() != b.dim()) {
    std::ostringstream msg;
    msg << "point clouds differ in shape: " << a.size() << "x" << a.dim() << " vs " << b.size()
        << "x" << b.dim();
    throw DimensionError(msg.str());
  }
  if (a.size() < a.dim()) {
    throw DimensionError("alignment needs at least as many points as dimensions");
  }
}

}  // namespace

PointCloud AlignmentResult::apply(const PointCloud& source) const {
  Matrix out = scale * source.coords() * rotation.transpose();
  out.rowwise() += translation.transpose();
  return PointCloud(std::move(out));
}

AlignmentResult procrustes_align(const PointCloud& source, const PointCloud& target) {
  check_matched(source, target);
  const Matrix& x = source.coords();
  const Matrix& y = target.coords();
  const Vector mx = x.colwise().mean();
  const Vector my = y.colwise().mean();
  const Matrix xc = x.rowwise() - mx.transpose();
  const Matrix yc = y.rowwise() - my.transpose();
  const double sx = xc.squaredNorm();
  if (!(sx > 0.0)) throw DataError("degenerate source: all points coincide");

  // Maximize tr(Q C) with C = Xc^T Yc = U S V^T: Q = V U^T.
  Eigen::JacobiSVD<Matrix> svd(xc.transpose() * yc, Eigen::ComputeFullU | Eigen::ComputeFullV);
  AlignmentResult r;
  r.rotation = svd.matrixV() * svd.matrixU().transpose();
  r.scale = svd.singularValues().sum() / sx;
  r.translation = my - r.scale * r.rotation * mx;
  const Matrix resid = r.scale * xc * r.rotation.transpose() - yc;
  r.residual_rms = std::sqrt(resid.squaredNorm() / static_cast<double>(x.rows()));
  return r;
}

Matrix orthogonal_procrustes(const PointCloud& source, const PointCloud& target) {
  check_matched(source, target);
  Eigen::JacobiSVD<Matrix> svd(source.coords().transpose() * target.coords(),
                               Eigen::ComputeFullU | Eigen::ComputeFullV);
  return svd.matrixV() * svd.matrixU().transpose();
}

double recovery_error(const PointCloud& zhat, const PointCloud& z) {
  return procrustes_align(zhat, z).residual_rms;
}

std::vector<double> average_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

double monotonicity_diagnostic(std::span<const double> zhat, std::span<const double> covariate) {
  if (zhat.size() != covariate.size()) throw DimensionError("diagnostic inputs differ in length");
  if (zhat.size() < 3) throw ValidationError("diagnostic needs at least 3 points");
  for (double v : zhat) {
    if (!std::isfinite(v)) throw ValidationError("non-finite embedding coordinate");
  }
  for (double v : covariate) {
    if (!std::isfinite(v)) throw ValidationError("non-finite covariate value");
  }
  const auto rx = average_ranks(zhat);
  const auto ry = average_ranks(covariate);
  const double n = static_cast<double>(rx.size());
  const double mean = (n + 1.0) / 2.0;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mean) * (ry[i] - mean);
    sxx += (rx[i] - mean) * (rx[i] - mean);
    syy += (ry[i] - mean) * (ry[i] - mean);
  }
  if (sxx == 0.0) throw DataError("correlation undefined: embedding coordinate is constant");
  if (syy == 0.0) throw DataError("correlation undefined: covariate is constant");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

GeodesicRegression geodesic_regression(const DistanceMatrix& dhat, const DistanceMatrix& dz) {
  if (dhat.size() != dz.size()) throw DimensionError("distance matrices differ in size");
  const Index n = dz.size();
  GeodesicRegression r;
  double sxy = 0.0, sxx = 0.0, sy = 0.0, syy = 0.0;
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      const double x = dz(i, j);
      const double y = dhat(i, j);
      if (!std::isfinite(x) || !std::isfinite(y)) {
        ++r.excluded;
        continue;
      }
      ++r.pairs;
      sxy += x * y;
      sxx += x * x;
      sy += y;
      syy += y * y;
    }
  }
  if (r.pairs < 2) throw DataError("regression needs at least 2 finite pairs");
  if (!(sxx > 0.0)) throw DataError("regression undefined: all latent distances are zero");
  r.slope = sxy / sxx;
  const double ss_res = syy - 2.0 * r.slope * sxy + r.slope * r.slope * sxx;
  const double ss_tot = syy - sy * sy / static_cast<double>(r.pairs);
  r.r2 = ss_tot > 0.0 ? 1.0 - std::max(ss_res, 0.0) / ss_tot : 1.0;
  return r;
}

Assignment solve_assignment(const Matrix& cost) {
  if (cost.rows() != cost.cols()) throw DimensionError("assignment needs a square cost matrix");
  if (!cost.allFinite()) throw DataError("assignment cost matrix has non-finite entries");
  const Index n = static_cast<Index>(cost.rows());
  Assignment out;
  if (n == 0) return out;
  const double inf = std::numeric_limits<double>::infinity();
  // 1-based potentials; column 0 is a virtual source.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<Index> match(n + 1, 0), way(n + 1, 0);
  for (Index row = 1; row <= n; ++row) {
    match[0] = row;
    Index col0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[col0] = 1;
      const Index r0 = match[col0];
      double delta = inf;
      Index col1 = 0;
      for (Index c = 1; c <= n; ++c) {
        if (used[c]) continue;
        const double cur = cost(static_cast<Eigen::Index>(r0 - 1), static_cast<Eigen::Index>(c - 1)) -
                           u[r0] - v[c];
        if (cur < minv[c]) {
          minv[c] = cur;
          way[c] = col0;
        }
        if (minv[c] < delta) {
          delta = minv[c];
          col1 = c;
        }
      }
      for (Index c = 0; c <= n; ++c) {
        if (used[c]) {
          u[match[c]] += delta;
          v[c] -= delta;
        } else {
          minv[c] -= delta;
        }
      }
      col0 = col1;
    } while (match[col0] != 0);
    do {
      const Index col1 = way[col0];
      match[col0] = match[col1];
      col0 = col1;
    } while (col0 != 0);
  }
  out.column.assign(n, 0);
  for (Index c = 1; c <= n; ++c) out.column[match[c] - 1] = c - 1;
  for (Index i = 0; i < n; ++i) {
    out.cost += cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(out.column[i]));
  }
  return out;
}

EmdResult earth_mover_distance(const DistanceMatrix& d, std::span<const Index> group_a,
                               std::span<const Index> group_b, Index sample, Seed seed,
                               Index reps) {
  if (sample == 0) throw ValidationError("EMD sample size must be positive");
  if (reps == 0) throw ValidationError("EMD needs at least one repetition");
  if (group_a.size() < sample || group_b.size() < sample) {
    std::ostringstream msg;
    msg << "EMD sample " << sample << " exceeds group sizes " << group_a.size() << " and "
        << group_b.size();
    throw ValidationError(msg.str());
  }
  for (auto groups : {group_a, group_b}) {
    for (Index g : groups) {
      if (g >= d.size()) throw DimensionError("EMD group index outside the distance matrix");
    }
  }
  EmdResult r;
  r.per_rep.reserve(reps);
  for (Index rep = 0; rep < reps; ++rep) {
    Rng rng(seed.derive(rep));
    const auto pick_a = rng.sample_without_replacement(group_a.size(), sample);
    const auto pick_b = rng.sample_without_replacement(group_b.size(), sample);
    Matrix cost(static_cast<Eigen::Index>(sample), static_cast<Eigen::Index>(sample));
    for (Index i = 0; i < sample; ++i) {
      for (Index j = 0; j < sample; ++j) {
        const double c = d(group_a[pick_a[i]], group_b[pick_b[j]]);
        if (!std::isfinite(c)) {
          std::ostringstream msg;
          msg << "infinite geodesic distance between points " << group_a[pick_a[i]] << " and "
              << group_b[pick_b[j]] << "; restrict the graph to its largest component";
          throw DataError(msg.str());
        }
        cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = c;
      }
    }
    r.per_rep.push_back(solve_assignment(cost).cost / static_cast<double>(sample));
  }
  const double k = static_cast<double>(reps);
  r.mean = std::accumulate(r.per_rep.begin(), r.per_rep.end(), 0.0) / k;
  if (reps > 1) {
    double ss = 0.0;
    for (double x : r.per_rep) ss += (x - r.mean) * (x - r.mean);
    r.standard_error = std::sqrt(ss / (k - 1.0)) / std::sqrt(k);
  }
  return r;
}

}  // namespace geolift

#include "geolift/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace geolift {

PointCloud spectral_embed(const EigenPairs& pairs, Index p) {
  if (p < 1 || p > pairs.values.size()) {
    throw DimensionError("embedding dimension exceeds available eigenpairs");
  }
  Matrix x = pairs.vectors.leftCols(static_cast<Eigen::Index>(p));
  for (Index k = 0; k < p; ++k) {
    x.col(static_cast<Eigen::Index>(k)) *= std::sqrt(std::abs(pairs.values[k]));
  }
  return PointCloud(std::move(x));
}

PointCloud spectral_embed(const SimilarityMatrix& a, Index p, const EigenOptions& opts) {
  EigenOptions o = opts;
  o.order = EigenOrder::magnitude;
  return spectral_embed(symmetric_eigs(a, p, o), p);
}

namespace {

// Within-group sum of squares for the split {x[0..q)} | {x[q..)}.
double split_sum_of_squares(const std::vector<double>& x, Index q) {
  auto ss = [](auto first, auto last) {
    const auto count = static_cast<double>(std::distance(first, last));
    if (count == 0) return 0.0;
    double mean = 0.0;
    for (auto it = first; it != last; ++it) mean += *it;
    mean /= count;
    double acc = 0.0;
    for (auto it = first; it != last; ++it) acc += (*it - mean) * (*it - mean);
    return acc;
  };
  const auto mid = x.begin() + static_cast<std::ptrdiff_t>(q);
  return ss(x.begin(), mid) + ss(mid, x.end());
}

}  // namespace

Index select_rank(std::span<const double> spectrum, Index max_p) {
  if (spectrum.size() < 2) throw ValidationError("select_rank needs at least 2 eigenvalues");
  if (max_p < 1) throw ValidationError("select_rank needs max_p >= 1");
  std::vector<double> x;
  x.reserve(spectrum.size());
  double energy = 0.0;
  for (double v : spectrum) {
    if (!std::isfinite(v)) throw ValidationError("select_rank: non-finite eigenvalue");
    x.push_back(std::abs(v));
    energy += v * v;
  }
  const Index len = x.size();
  const Index last = std::min(max_p, len - 1);
  if (len == 2) return 1;

  // Pooled variance on len - 2 degrees of freedom; the profile likelihood is
  // -len/2 log(2 pi s2) - ss / (2 s2).
  const double zero_ss = 1e-20 * std::max(energy, std::numeric_limits<double>::min());
  const double df = static_cast<double>(len - 2);
  Index best = 1;
  double best_ll = -std::numeric_limits<double>::infinity();
  bool any_positive = false;
  Index first_zero = 0;
  for (Index q = 1; q <= last; ++q) {
    const double ss = split_sum_of_squares(x, q);
    if (ss <= zero_ss) {
      if (first_zero == 0) first_zero = q;
      continue;
    }
    any_positive = true;
    const double s2 = ss / df;
    const double ll = -0.5 * static_cast<double>(len) * std::log(2.0 * std::numbers::pi * s2) -
                      ss / (2.0 * s2);
    if (ll > best_ll) {
      best_ll = ll;
      best = q;
    }
  }
  if (!any_positive) return 1;
  // A split with zero pooled variance has unbounded likelihood.
  if (first_zero != 0) return first_zero;
  return best;
}

std::vector<Index> select_rank_elbows(std::span<const double> spectrum, Index max_p,
                                      Index count) {
  std::vector<Index> elbows;
  Index offset = 0;
  while (elbows.size() < count) {
    const auto tail = spectrum.subspan(offset);
    if (tail.size() < 2 || max_p <= offset) break;
    offset += select_rank(tail, max_p - offset);
    elbows.push_back(offset);
  }
  return elbows;
}

DegreeCorrected degree_correct(const PointCloud& x) {
  DegreeCorrected out;
  for (Index i = 0; i < x.size(); ++i) {
    if (x.row(i).norm() < 1e-12) {
      out.dropped.push_back(i);
    } else {
      out.kept.push_back(i);
    }
  }
  Matrix rows(static_cast<Eigen::Index>(out.kept.size()), static_cast<Eigen::Index>(x.dim()));
  for (std::size_t k = 0; k < out.kept.size(); ++k) {
    const auto r = x.row(out.kept[k]);
    rows.row(static_cast<Eigen::Index>(k)) = r / r.norm();
  }
  out.points = PointCloud(std::move(rows));
  return out;
}

SpectralResult embed(const SimilarityMatrix& a, const SpectralConfig& cfg) {
  const Index n = a.size();
  if (cfg.p && (*cfg.p < 1 || *cfg.p > n)) {
    throw DimensionError("embedding dimension p=" + std::to_string(*cfg.p) +
                         " must lie in [1, n=" + std::to_string(n) + "]");
  }
  if (cfg.max_p < 1) throw ValidationError("max_p must be at least 1");
  if (cfg.rank_elbow < 1) throw ValidationError("rank_elbow must be at least 1");

  Index wanted = std::min(n, std::max<Index>(2 * cfg.max_p, cfg.max_p + 1));
  if (cfg.p) wanted = std::max(wanted, *cfg.p);
  wanted = std::min(wanted, n);

  EigenOptions opts = cfg.eigen;
  opts.order = EigenOrder::magnitude;
  const EigenPairs pairs = symmetric_eigs(a, wanted, opts);

  SpectralResult out;
  out.spectrum = pairs.values;
  if (cfg.p) {
    out.p = *cfg.p;
  } else {
    out.p_auto = true;
    if (pairs.values.size() < 2) {
      out.p = 1;
    } else {
      const auto elbows = select_rank_elbows(pairs.values, cfg.max_p, cfg.rank_elbow);
      out.p = elbows.empty() ? 1 : elbows.back();
    }
  }
  PointCloud x = spectral_embed(pairs, out.p);
  if (cfg.degree_correct) {
    auto dc = degree_correct(x);
    out.embedding = std::move(dc.points);
    out.kept = std::move(dc.kept);
    out.dropped = std::move(dc.dropped);
  } else {
    out.embedding = std::move(x);
    out.kept.resize(n);
    for (Index i = 0; i < n; ++i) out.kept[i] = i;
  }
  return out;
}

}  // namespace geolift

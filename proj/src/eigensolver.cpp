// Leading eigenpairs of symmetric matrices.
//
// Small problems go through a full Householder tridiagonalization + implicit
// QR (Eigen's SelfAdjointEigenSolver). Large ones use Lanczos with full
// reorthogonalization: converged Ritz pairs are locked, the next run works in
// the orthogonal complement of the locked set, and a final verification run
// checks that nothing in the complement outranks the locked pairs. Locking
// recovers repeated eigenvalues that a single Krylov sequence cannot see.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "geolift/core.hpp"

namespace geolift {
namespace {

using MatVec = std::function<Vector(const Vector&)>;

// Indices of `values` in output order.
std::vector<Index> rank_values(const std::vector<double>& values, EigenOrder order) {
  std::vector<Index> idx(values.size());
  std::iota(idx.begin(), idx.end(), Index{0});
  if (order == EigenOrder::algebraic) {
    std::stable_sort(idx.begin(), idx.end(),
                     [&](Index a, Index b) { return values[a] > values[b]; });
    return idx;
  }
  std::stable_sort(idx.begin(), idx.end(), [&](Index a, Index b) {
    return std::abs(values[a]) > std::abs(values[b]);
  });
  // Magnitude ties (+lambda vs -lambda) resolve toward the positive value,
  // then the lower original index.
  double scale = 0.0;
  for (double v : values) scale = std::max(scale, std::abs(v));
  const double tie_tol = 1e-12 * scale;
  std::size_t start = 0;
  while (start < idx.size()) {
    std::size_t end = start + 1;
    while (end < idx.size() &&
           std::abs(std::abs(values[idx[end - 1]]) - std::abs(values[idx[end]])) <= tie_tol) {
      ++end;
    }
    std::sort(idx.begin() + static_cast<std::ptrdiff_t>(start),
              idx.begin() + static_cast<std::ptrdiff_t>(end), [&](Index a, Index b) {
                if (values[a] != values[b]) return values[a] > values[b];
                return a < b;
              });
    start = end;
  }
  return idx;
}

void normalize_signs(Matrix& v) {
  for (Eigen::Index k = 0; k < v.cols(); ++k) {
    Eigen::Index best = 0;
    double best_abs = -1.0;
    for (Eigen::Index i = 0; i < v.rows(); ++i) {
      if (std::abs(v(i, k)) > best_abs) {
        best_abs = std::abs(v(i, k));
        best = i;
      }
    }
    if (v.rows() > 0 && v(best, k) < 0.0) v.col(k) = -v.col(k);
  }
}

double residual_norm(const MatVec& apply, const Vector& v, double lambda) {
  return (apply(v) - lambda * v).norm();
}

void check_request(Index n, Index p) {
  if (p < 1) throw DimensionError("number of eigenpairs must be at least 1");
  if (p > n) {
    std::ostringstream os;
    os << "requested " << p << " eigenpairs of a " << n << "x" << n << " matrix";
    throw DimensionError(os.str());
  }
}

EigenPairs dense_path(const Matrix& a, Index p, const EigenOptions& opts, double norm) {
  // The implicit QR sweep occasionally stalls on matrices with large exactly
  // repeated eigenvalue clusters. A diagonal shift leaves the eigenvectors
  // alone but changes the iteration, so retry with one before giving up.
  Eigen::SelfAdjointEigenSolver<Matrix> solver(a, Eigen::ComputeEigenvectors);
  double shift = 0.0;
  for (const double s : {norm, -norm, 0.5 * norm}) {
    if (solver.info() == Eigen::Success || !(s != 0.0)) break;
    shift = s;
    solver.compute(a + Matrix::Identity(a.rows(), a.cols()) * shift, Eigen::ComputeEigenvectors);
  }
  if (solver.info() != Eigen::Success) {
    throw ConvergenceError("dense symmetric eigensolver failed to converge",
                           std::numeric_limits<double>::infinity());
  }
  const Vector lambda = solver.eigenvalues().array() - shift;
  std::vector<double> values(lambda.data(), lambda.data() + lambda.size());
  const auto order = rank_values(values, opts.order);

  EigenPairs out;
  out.vectors.resize(a.rows(), static_cast<Eigen::Index>(p));
  for (Index k = 0; k < p; ++k) {
    out.values.push_back(values[order[k]]);
    out.vectors.col(static_cast<Eigen::Index>(k)) =
        solver.eigenvectors().col(static_cast<Eigen::Index>(order[k]));
  }
  normalize_signs(out.vectors);
  for (Index k = 0; k < p; ++k) {
    const Vector v = out.vectors.col(static_cast<Eigen::Index>(k));
    const double r = (a * v - out.values[k] * v).norm();
    if (r > opts.dense_tol * std::max(norm, 1e-300)) {
      std::ostringstream os;
      os << "dense eigenpair " << k << " residual " << r << " exceeds tolerance";
      throw ConvergenceError(os.str(), r);
    }
  }
  return out;
}

void orthogonalize(Vector& w, const Matrix& basis, Eigen::Index cols) {
  if (cols == 0) return;
  // Two passes of classical Gram-Schmidt ("twice is enough").
  for (int pass = 0; pass < 2; ++pass) {
    const Vector coeff = basis.leftCols(cols).transpose() * w;
    w.noalias() -= basis.leftCols(cols) * coeff;
  }
}

struct RitzSet {
  std::vector<double> values;
  Matrix vectors;  // n x m
};

// One Lanczos run of at most `steps` steps in the complement of `locked`.
RitzSet lanczos_run(const MatVec& apply, Index n, Index steps, const Matrix& locked,
                    Rng& rng, double norm) {
  const auto nn = static_cast<Eigen::Index>(n);
  const auto m = static_cast<Eigen::Index>(steps);
  Matrix q(nn, m);
  Vector alpha = Vector::Zero(m);
  Vector beta = Vector::Zero(m);

  auto fresh_vector = [&](Eigen::Index filled) -> bool {
    for (int attempt = 0; attempt < 8; ++attempt) {
      Vector v(nn);
      for (Eigen::Index i = 0; i < nn; ++i) v(i) = rng.normal();
      orthogonalize(v, locked, locked.cols());
      orthogonalize(v, q, filled);
      const double len = v.norm();
      if (len > 1e-8) {
        q.col(filled) = v / len;
        return true;
      }
    }
    return false;
  };

  if (!fresh_vector(0)) return {};
  Eigen::Index used = m;
  for (Eigen::Index j = 0; j < m; ++j) {
    Vector w = apply(q.col(j));
    alpha(j) = q.col(j).dot(w);
    orthogonalize(w, locked, locked.cols());
    orthogonalize(w, q, j + 1);
    if (j + 1 == m) {
      beta(j) = w.norm();
      break;
    }
    const double b = w.norm();
    if (b <= 1e-12 * std::max(norm, 1e-300)) {
      // Invariant subspace: restart the recurrence with a new direction.
      beta(j) = 0.0;
      if (!fresh_vector(j + 1)) {
        used = j + 1;
        break;
      }
    } else {
      beta(j) = b;
      q.col(j + 1) = w / b;
    }
  }

  Matrix t = Matrix::Zero(used, used);
  for (Eigen::Index j = 0; j < used; ++j) {
    t(j, j) = alpha(j);
    if (j + 1 < used) {
      t(j, j + 1) = beta(j);
      t(j + 1, j) = beta(j);
    }
  }
  Eigen::SelfAdjointEigenSolver<Matrix> small(t);
  RitzSet out;
  out.values.assign(small.eigenvalues().data(), small.eigenvalues().data() + used);
  out.vectors = q.leftCols(used) * small.eigenvectors();
  return out;
}

EigenPairs lanczos_path(const MatVec& apply, Index n, Index p, const EigenOptions& opts,
                        double norm) {
  const double tol = opts.iterative_tol * std::max(norm, 1e-300);
  Rng rng(opts.seed);
  std::vector<double> locked_values;
  Matrix locked(static_cast<Eigen::Index>(n), 0);
  Index krylov = std::max<Index>(2 * p + 20, 50);
  Index total_steps = 0;
  double last_residual = std::numeric_limits<double>::infinity();

  auto lock = [&](double value, const Vector& v) {
    locked_values.push_back(value);
    locked.conservativeResize(Eigen::NoChange, locked.cols() + 1);
    locked.col(locked.cols() - 1) = v;
  };
  auto budget_check = [&]() {
    if (total_steps > opts.max_iterations) {
      std::ostringstream os;
      os << "Lanczos did not converge within " << opts.max_iterations
         << " steps; last residual " << last_residual << " (tolerance " << tol << ")";
      throw ConvergenceError(os.str(), last_residual);
    }
  };

  // Rank of a candidate against the current locked set under the ordering.
  auto outranks = [&](double cand, double incumbent) {
    const auto r = rank_values({incumbent, cand}, opts.order);
    return r.front() == 1;
  };

  bool verified = false;
  while (!verified) {
    while (locked_values.size() < p) {
      const Index remaining = n - locked_values.size();
      const Index steps = std::min(krylov, remaining);
      RitzSet ritz = lanczos_run(apply, n, steps, locked, rng, norm);
      total_steps += steps;
      const auto order = rank_values(ritz.values, opts.order);
      Index accepted = 0;
      for (Index k : order) {
        if (locked_values.size() >= p) break;
        const Vector v = ritz.vectors.col(static_cast<Eigen::Index>(k)).normalized();
        const double r = residual_norm(apply, v, ritz.values[k]);
        last_residual = r;
        if (r > 0.5 * tol) break;
        lock(ritz.values[k], v);
        ++accepted;
      }
      if (accepted == 0) {
        if (steps == remaining) {
          throw ConvergenceError("Lanczos exhausted the space without converging; residual " +
                                     std::to_string(last_residual),
                                 last_residual);
        }
        krylov = std::min(2 * krylov, n);
      }
      budget_check();
    }
    verified = true;
    if (locked_values.size() == n) break;
    // Anything left in the complement that should have been ranked ahead of
    // the weakest locked pair?
    const auto current = rank_values(locked_values, opts.order);
    const double weakest = locked_values[current.back()];
    const Index remaining = n - locked_values.size();
    RitzSet ritz = lanczos_run(apply, n, std::min(krylov, remaining), locked, rng, norm);
    total_steps += std::min(krylov, remaining);
    for (Index k : rank_values(ritz.values, opts.order)) {
      if (!outranks(ritz.values[k], weakest)) break;
      const Vector v = ritz.vectors.col(static_cast<Eigen::Index>(k)).normalized();
      const double r = residual_norm(apply, v, ritz.values[k]);
      last_residual = r;
      if (r > 0.5 * tol) continue;
      lock(ritz.values[k], v);
      verified = false;
    }
    if (!verified) {
      // Drop the surplus weakest pairs and look again.
      const auto ranked = rank_values(locked_values, opts.order);
      std::vector<double> vals;
      Matrix vecs(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
      for (Index k = 0; k < p; ++k) {
        vals.push_back(locked_values[ranked[k]]);
        vecs.col(static_cast<Eigen::Index>(k)) = locked.col(static_cast<Eigen::Index>(ranked[k]));
      }
      locked_values = std::move(vals);
      locked = std::move(vecs);
    }
    budget_check();
  }

  const auto ranked = rank_values(locked_values, opts.order);
  EigenPairs out;
  out.vectors.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
  for (Index k = 0; k < p; ++k) {
    out.values.push_back(locked_values[ranked[k]]);
    out.vectors.col(static_cast<Eigen::Index>(k)) = locked.col(static_cast<Eigen::Index>(ranked[k]));
  }
  normalize_signs(out.vectors);
  for (Index k = 0; k < p; ++k) {
    const double r = residual_norm(apply, out.vectors.col(static_cast<Eigen::Index>(k)), out.values[k]);
    if (r > tol) {
      std::ostringstream os;
      os << "Lanczos eigenpair " << k << " residual " << r << " exceeds tolerance " << tol;
      throw ConvergenceError(os.str(), r);
    }
  }
  return out;
}

}  // namespace

EigenPairs symmetric_eigs(const SimilarityMatrix& m, Index p, const EigenOptions& opts) {
  const Index n = m.size();
  check_request(n, p);
  const double norm = m.frobenius_norm();
  if (n <= opts.dense_threshold) return dense_path(m.to_dense(), p, opts, norm);
  MatVec apply = [&m](const Vector& x) -> Vector { return m.multiply(x); };
  return lanczos_path(apply, n, p, opts, norm);
}

EigenPairs symmetric_eigs(const Matrix& a, Index p, const EigenOptions& opts) {
  if (a.rows() != a.cols()) throw DimensionError("eigensolver needs a square matrix");
  if (!a.allFinite()) throw ValidationError("matrix has non-finite entries");
  const auto n = static_cast<Index>(a.rows());
  check_request(n, p);
  const double norm = a.norm();
  if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(norm, 1.0)) {
    throw ValidationError("eigensolver needs a symmetric matrix");
  }
  if (n <= opts.dense_threshold) return dense_path(a, p, opts, norm);
  MatVec apply = [&a](const Vector& x) -> Vector { return a * x; };
  return lanczos_path(apply, n, p, opts, norm);
}

}  // namespace geolift

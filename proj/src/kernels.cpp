#include "geolift/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace geolift {

Index domain_dim(const Domain& d) {
  if (const auto* box = std::get_if<BoxDomain>(&d)) return static_cast<Index>(box->lo.size());
  return std::get<SphereDomain>(d).dim;
}

bool domain_contains(const Domain& d, const Vector& z, double tol) {
  if (static_cast<Index>(z.size()) != domain_dim(d)) return false;
  if (!z.allFinite()) return false;
  if (const auto* box = std::get_if<BoxDomain>(&d)) {
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      if (z(i) < box->lo(i) - tol || z(i) > box->hi(i) + tol) return false;
    }
    return true;
  }
  return std::abs(z.norm() - 1.0) <= tol;
}

ScalarKernel phase_cosine(double linear, double quadratic) {
  ScalarKernel s;
  std::ostringstream name;
  name << "phase-cosine(" << linear << ", " << quadratic << ")";
  s.name = name.str();
  auto w = [=](double t) { return linear * t + quadratic * t * t; };
  auto dw = [=](double t) { return linear + 2.0 * quadratic * t; };
  s.f = [w](double x, double y) { return std::cos(w(x) - w(y)); };
  s.mixed_diag = [dw](double xi) { return dw(xi) * dw(xi); };
  s.features = [w](double x) {
    Vector v(2);
    v << std::cos(w(x)), std::sin(w(x));
    return v;
  };
  return s;
}

KernelModel::KernelModel(std::string name, KernelVariant variant, Domain domain, double rho,
                         std::optional<FiniteRank> features)
    : name_(std::move(name)),
      variant_(std::move(variant)),
      domain_(std::move(domain)),
      rho_(rho),
      features_(std::move(features)) {
  if (!(std::isfinite(rho_) && rho_ >= 0.0)) {
    throw ValidationError("kernel sparsity factor rho must be finite and nonnegative");
  }
  if (const auto* box = std::get_if<BoxDomain>(&domain_)) {
    if (box->lo.size() != box->hi.size() || box->lo.size() == 0) {
      throw ValidationError("box domain needs matching, non-empty bounds");
    }
    for (Eigen::Index i = 0; i < box->lo.size(); ++i) {
      if (!(box->lo(i) <= box->hi(i))) throw ValidationError("box domain needs lo <= hi");
    }
  } else if (std::get<SphereDomain>(domain_).dim < 1) {
    throw ValidationError("sphere domain needs dim >= 1");
  }
  if (const auto* ip = std::get_if<InnerProduct>(&variant_)) {
    if (!std::holds_alternative<SphereDomain>(domain_)) {
      throw ValidationError("inner-product kernels live on the unit sphere");
    }
    (void)ip;
  }
  if (const auto* add = std::get_if<Additive>(&variant_)) {
    if (!std::holds_alternative<BoxDomain>(domain_)) {
      throw ValidationError("additive kernels need a product-of-intervals domain");
    }
    if (add->parts.size() != add->weights.size() ||
        add->parts.size() != static_cast<std::size_t>(latent_dim())) {
      throw ValidationError("additive kernel needs one part and one weight per coordinate");
    }
    for (double a : add->weights) {
      if (!(a > 0.0)) throw ValidationError("additive kernel weights must be positive");
    }
  }
  if (std::holds_alternative<FiniteRank>(variant_) && !features_) {
    features_ = std::get<FiniteRank>(variant_);
  }
}

void KernelModel::check_domain(const Vector& z) const {
  if (!domain_contains(domain_, z)) {
    std::ostringstream os;
    os << "point (" << z.transpose() << ") is outside the domain of kernel " << name_;
    throw ValidationError(os.str());
  }
}

double KernelModel::operator()(const Vector& x, const Vector& y) const {
  const double base = std::visit(
      [&](const auto& v) -> double {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, TranslationInvariant>) {
          return v.g(x - y);
        } else if constexpr (std::is_same_v<T, RadialTI>) {
          return v.h((x - y).squaredNorm());
        } else if constexpr (std::is_same_v<T, InnerProduct>) {
          return v.g(x.dot(y));
        } else if constexpr (std::is_same_v<T, Additive>) {
          double acc = v.offset;
          for (std::size_t i = 0; i < v.parts.size(); ++i) {
            const auto c = static_cast<Eigen::Index>(i);
            acc += v.weights[i] * v.parts[i].f(x(c), y(c));
          }
          return acc;
        } else {
          return v.phi(x).dot(v.phi(y));
        }
      },
      variant_);
  return rho_ * base;
}

KernelModel KernelModel::with_rho(double rho) const {
  KernelModel copy = *this;
  if (!(std::isfinite(rho) && rho >= 0.0)) throw ValidationError("rho must be nonnegative");
  copy.rho_ = rho;
  return copy;
}

KernelModel KernelModel::as_finite_rank() const {
  if (!features_) {
    throw UnsupportedVariantError("kernel " + name_ + " has no explicit feature map");
  }
  KernelModel copy(name_ + " (finite rank)", *features_, domain_, rho_);
  copy.truncated_ = truncated_;
  return copy;
}

// ---------------------------------------------------------------------------

namespace {

constexpr double kFiniteDifferenceStep = 1e-5;

Matrix symmetrized(const Matrix& m) { return 0.5 * (m + m.transpose()); }

void require_positive_definite(const Matrix& h, const std::string& kernel, const Vector& z) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(h, Eigen::EigenvaluesOnly);
  const double min_eig = es.eigenvalues().minCoeff();
  if (!(min_eig > 0.0)) {
    std::ostringstream os;
    os << "metric tensor of " << kernel << " at (" << z.transpose()
       << ") is not positive definite (minimum eigenvalue " << min_eig << ")";
    throw KernelAssumptionError(os.str());
  }
}

Matrix neg_hessian_by_differences(const std::function<double(const Vector&)>& g, Index d) {
  const double h = kFiniteDifferenceStep;
  const auto dd = static_cast<Eigen::Index>(d);
  Matrix out(dd, dd);
  for (Eigen::Index i = 0; i < dd; ++i) {
    for (Eigen::Index j = 0; j < dd; ++j) {
      Vector pp = Vector::Zero(dd), pm = Vector::Zero(dd), mp = Vector::Zero(dd),
             mm = Vector::Zero(dd);
      pp(i) += h; pp(j) += h;
      pm(i) += h; pm(j) -= h;
      mp(i) -= h; mp(j) += h;
      mm(i) -= h; mm(j) -= h;
      out(i, j) = -(g(pp) - g(pm) - g(mp) + g(mm)) / (4.0 * h * h);
    }
  }
  return symmetrized(out);
}

Matrix feature_jacobian(const FiniteRank& fr, const Vector& z) {
  const double h = kFiniteDifferenceStep;
  Matrix j(static_cast<Eigen::Index>(fr.feature_dim), z.size());
  for (Eigen::Index c = 0; c < z.size(); ++c) {
    Vector up = z, down = z;
    up(c) += h;
    down(c) -= h;
    j.col(c) = (fr.phi(up) - fr.phi(down)) / (2.0 * h);
  }
  return j;
}

Matrix unscaled_metric(const KernelModel& k, const Vector& z) {
  const Index d = k.latent_dim();
  const auto dd = static_cast<Eigen::Index>(d);
  return std::visit(
      [&](const auto& v) -> Matrix {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, TranslationInvariant>) {
          if (v.neg_hessian_at_0) return symmetrized(*v.neg_hessian_at_0);
          return neg_hessian_by_differences(v.g, d);
        } else if constexpr (std::is_same_v<T, RadialTI>) {
          return Matrix::Identity(dd, dd) * (-2.0 * v.h_prime_at_0);
        } else if constexpr (std::is_same_v<T, InnerProduct>) {
          return v.g_prime_at_1 * Matrix::Identity(dd, dd) + v.g_second_at_1 * z * z.transpose();
        } else if constexpr (std::is_same_v<T, Additive>) {
          Matrix h = Matrix::Zero(dd, dd);
          for (Eigen::Index i = 0; i < dd; ++i) {
            h(i, i) = v.weights[static_cast<std::size_t>(i)] *
                      v.parts[static_cast<std::size_t>(i)].mixed_diag(z(i));
          }
          return h;
        } else {
          const Matrix j = feature_jacobian(v, z);
          return symmetrized(j.transpose() * j);
        }
      },
      k.variant());
}

// Adaptive Simpson with a global evaluation budget.
class Simpson {
 public:
  Simpson(std::function<double(double)> f, std::size_t cap) : f_(std::move(f)), cap_(cap) {}

  double integrate(double a, double b, double tol) {
    if (a == b) return 0.0;
    const double fa = eval(a), fb = eval(b), m = 0.5 * (a + b), fm = eval(m);
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return recurse(a, b, fa, fm, fb, whole, tol, 0);
  }

 private:
  double eval(double x) {
    if (++evals_ > cap_) {
      throw ConvergenceError("psi quadrature exceeded its evaluation budget",
                             static_cast<double>(evals_));
    }
    return f_(x);
  }

  double recurse(double a, double b, double fa, double fm, double fb, double whole, double tol,
                 int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = eval(lm), frm = eval(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (depth >= 50 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
    return recurse(a, m, fa, flm, fm, left, 0.5 * tol, depth + 1) +
           recurse(m, b, fm, frm, fb, right, 0.5 * tol, depth + 1);
  }

  std::function<double(double)> f_;
  std::size_t cap_;
  std::size_t evals_ = 0;
};

}  // namespace

MetricTensor metric_tensor(const KernelModel& k, const Vector& z) {
  k.check_domain(z);
  Matrix h = symmetrized(k.rho() * unscaled_metric(k, z));
  require_positive_definite(h, k.name(), z);
  return MetricTensor{z, std::move(h)};
}

Vector psi_transform(const KernelModel& k, const Vector& z) {
  const auto* add = std::get_if<Additive>(&k.variant());
  if (!add) throw UnsupportedVariantError("psi_transform needs an additive kernel");
  k.check_domain(z);
  const auto& box = std::get<BoxDomain>(k.domain());
  Vector out(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const auto& part = add->parts[static_cast<std::size_t>(i)];
    const double scale = std::sqrt(k.rho() * add->weights[static_cast<std::size_t>(i)]);
    auto integrand = [&part, i](double xi) {
      const double m = part.mixed_diag(xi);
      if (!(m > 0.0)) {
        std::ostringstream os;
        os << "psi integrand for coordinate " << i << " is not positive at " << xi
           << " (value " << m << ")";
        throw KernelAssumptionError(os.str());
      }
      return std::sqrt(m);
    };
    // Clamp to the box so boundary points within tolerance integrate cleanly.
    const double upper = std::clamp(z(i), box.lo(i), box.hi(i));
    Simpson quad(integrand, 1'000'000);
    out(i) = scale * quad.integrate(box.lo(i), upper, 1e-10);
  }
  return out;
}

double geodesic_oracle(const KernelModel& k, const Vector& zi, const Vector& zj) {
  k.check_domain(zi);
  k.check_domain(zj);
  const double rho = k.rho();
  return std::visit(
      [&](const auto& v) -> double {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, TranslationInvariant>) {
          const Matrix h = rho * unscaled_metric(k, zi);
          require_positive_definite(h, k.name(), zi);
          // H = G G^T with G = V Lambda^{1/2}; distance |G^T (zi - zj)|.
          Eigen::SelfAdjointEigenSolver<Matrix> es(h);
          const Matrix g = es.eigenvectors() * es.eigenvalues().cwiseSqrt().asDiagonal();
          return (g.transpose() * (zi - zj)).norm();
        } else if constexpr (std::is_same_v<T, RadialTI>) {
          const double c = -2.0 * v.h_prime_at_0 * rho;
          if (!(c > 0.0)) throw KernelAssumptionError("radial kernel needs h'(0) < 0 and rho > 0");
          return std::sqrt(c) * (zi - zj).norm();
        } else if constexpr (std::is_same_v<T, InnerProduct>) {
          const double c = v.g_prime_at_1 * rho;
          if (!(c > 0.0)) throw KernelAssumptionError("inner-product kernel needs g'(1) > 0 and rho > 0");
          return std::sqrt(c) * std::acos(std::clamp(zi.dot(zj), -1.0, 1.0));
        } else if constexpr (std::is_same_v<T, Additive>) {
          return (psi_transform(k, zi) - psi_transform(k, zj)).norm();
        } else {
          throw UnsupportedVariantError(
              "no closed-form geodesic for a generic finite-rank kernel; use path_length_oracle");
        }
      },
      k.variant());
}

Vector feature_map(const KernelModel& k, const Vector& z) {
  if (!k.has_feature_map()) {
    throw UnsupportedVariantError("kernel " + k.name() + " has no explicit feature map");
  }
  if (static_cast<Index>(z.size()) != k.latent_dim()) {
    throw DimensionError("feature_map: point dimension does not match the kernel");
  }
  return std::sqrt(k.rho()) * k.features()->phi(z);
}

namespace {

void check_path(const KernelModel& k, const Matrix& path) {
  if (path.rows() < 2) throw ValidationError("a path needs at least 2 points");
  if (static_cast<Index>(path.cols()) != k.latent_dim()) {
    throw DimensionError("path dimension does not match the kernel");
  }
  for (Eigen::Index r = 0; r < path.rows(); ++r) k.check_domain(path.row(r).transpose());
}

}  // namespace

double feature_length(const KernelModel& k, const Matrix& path) {
  check_path(k, path);
  double total = 0.0;
  Vector prev = feature_map(k, path.row(0).transpose());
  for (Eigen::Index r = 1; r < path.rows(); ++r) {
    Vector cur = feature_map(k, path.row(r).transpose());
    total += (cur - prev).norm();
    prev = std::move(cur);
  }
  return total;
}

double riemannian_length(const KernelModel& k, const Matrix& path) {
  check_path(k, path);
  double total = 0.0;
  for (Eigen::Index r = 1; r < path.rows(); ++r) {
    const Vector z0 = path.row(r - 1).transpose();
    const Vector dz = path.row(r).transpose() - z0;
    const Matrix h = metric_tensor(k, z0).h;
    total += std::sqrt(std::max(0.0, dz.dot(h * dz)));
  }
  return total;
}

PathLengths path_length_oracle(const KernelModel& k, const Matrix& path) {
  return PathLengths{feature_length(k, path), riemannian_length(k, path)};
}

Matrix straight_path(const Vector& a, const Vector& b, Index m) {
  if (m < 2) throw ValidationError("a path needs at least 2 points");
  if (a.size() != b.size()) throw DimensionError("path endpoints differ in dimension");
  Matrix out(static_cast<Eigen::Index>(m), a.size());
  for (Index r = 0; r < m; ++r) {
    const double t = static_cast<double>(r) / static_cast<double>(m - 1);
    out.row(static_cast<Eigen::Index>(r)) = ((1.0 - t) * a + t * b).transpose();
  }
  out.row(static_cast<Eigen::Index>(m - 1)) = b.transpose();
  return out;
}

Matrix great_circle_path(const Vector& a, const Vector& b, Index m) {
  if (m < 2) throw ValidationError("a path needs at least 2 points");
  const double cosang = std::clamp(a.dot(b), -1.0, 1.0);
  const double angle = std::acos(cosang);
  Vector ortho = b - cosang * a;
  if (ortho.norm() < 1e-12) {
    // Antipodal (or equal) endpoints: any perpendicular direction works.
    Index axis = 0;
    for (Eigen::Index i = 1; i < a.size(); ++i) {
      if (std::abs(a(i)) < std::abs(a(static_cast<Eigen::Index>(axis)))) axis = static_cast<Index>(i);
    }
    ortho = Vector::Unit(a.size(), static_cast<Eigen::Index>(axis));
    ortho -= ortho.dot(a) * a;
  }
  ortho.normalize();
  Matrix out(static_cast<Eigen::Index>(m), a.size());
  for (Index r = 0; r < m; ++r) {
    const double t = angle * static_cast<double>(r) / static_cast<double>(m - 1);
    Vector p = std::cos(t) * a + std::sin(t) * ortho;
    out.row(static_cast<Eigen::Index>(r)) = p.normalized().transpose();
  }
  out.row(0) = a.transpose();
  if (angle < std::numbers::pi) out.row(static_cast<Eigen::Index>(m - 1)) = b.transpose();
  return out;
}

// ---------------------------------------------------------------------------

PointCloud sample_latent_grid(const BoxDomain& box, Index n) {
  const auto d = static_cast<Index>(box.lo.size());
  if (d == 0 || box.hi.size() != box.lo.size()) throw ValidationError("grid needs a box domain");
  if (n < 1) throw ValidationError("grid needs n >= 1");
  auto side = static_cast<Index>(std::llround(std::pow(static_cast<double>(n), 1.0 / static_cast<double>(d))));
  auto power = [d](Index s) {
    Index v = 1;
    for (Index i = 0; i < d; ++i) v *= s;
    return v;
  };
  while (side > 1 && power(side) > n) --side;
  while (power(side + 1) <= n) ++side;
  if (power(side) != n) {
    const Index below = power(side), above = power(side + 1);
    const Index nearest = (n - below <= above - n) ? below : above;
    std::ostringstream os;
    os << "grid size n=" << n << " is not a perfect " << d
       << "-th power; nearest valid n is " << nearest;
    throw ValidationError(os.str());
  }
  Matrix pts(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (Index r = 0; r < n; ++r) {
    Index rem = r;
    for (Index c = 0; c < d; ++c) {
      const Index k = rem % side;
      rem /= side;
      const auto cc = static_cast<Eigen::Index>(c);
      double v = box.lo(cc);
      if (side > 1) {
        const double step = (box.hi(cc) - box.lo(cc)) / static_cast<double>(side - 1);
        v = (k == side - 1) ? box.hi(cc) : box.lo(cc) + static_cast<double>(k) * step;
      }
      pts(static_cast<Eigen::Index>(r), cc) = v;
    }
  }
  return PointCloud(std::move(pts));
}

PointCloud sample_latent_uniform(const Domain& domain, Index n, Seed seed) {
  Rng rng(seed);
  const auto d = static_cast<Eigen::Index>(domain_dim(domain));
  Matrix pts(static_cast<Eigen::Index>(n), d);
  for (Eigen::Index r = 0; r < pts.rows(); ++r) {
    if (const auto* box = std::get_if<BoxDomain>(&domain)) {
      for (Eigen::Index c = 0; c < d; ++c) {
        pts(r, c) = box->lo(c) + rng.uniform() * (box->hi(c) - box->lo(c));
      }
    } else {
      Vector g(d);
      do {
        for (Eigen::Index c = 0; c < d; ++c) g(c) = rng.normal();
      } while (g.norm() < 1e-12);
      pts.row(r) = g.normalized().transpose();
    }
  }
  return PointCloud(std::move(pts));
}

SimilarityMatrix kernel_matrix(const KernelModel& k, const PointCloud& z) {
  const auto n = static_cast<Eigen::Index>(z.size());
  for (Index i = 0; i < z.size(); ++i) k.check_domain(z.row(i).transpose());
  Matrix f(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vector zi = z.coords().row(i).transpose();
    for (Eigen::Index j = i; j < n; ++j) {
      const double v = k(zi, z.coords().row(j).transpose());
      f(i, j) = v;
      f(j, i) = v;
    }
  }
  return SimilarityMatrix::dense(std::move(f), MatrixKind::generic);
}

SimilarityMatrix sample_adjacency(const KernelModel& k, const PointCloud& z, Seed seed) {
  const Index n = z.size();
  for (Index i = 0; i < n; ++i) k.check_domain(z.row(i).transpose());
  constexpr double slack = 1e-12;
  const CounterRng gen(seed);
  std::vector<MatrixEntry> edges;
  for (Index i = 0; i < n; ++i) {
    const Vector zi = z.row(i).transpose();
    for (Index j = i + 1; j < n; ++j) {
      double p = k(zi, z.row(j).transpose());
      if (!(p >= -slack && p <= 1.0 + slack)) {
        std::ostringstream os;
        os << "edge probability " << p << " outside [0,1] for pair (" << i << ", " << j << ")";
        throw ValidationError(os.str());
      }
      p = std::clamp(p, 0.0, 1.0);
      if (gen.uniform(static_cast<std::uint64_t>(i) * n + j) < p) {
        edges.push_back({i, j, 1.0});
      }
    }
  }
  return SimilarityMatrix::sparse(n, std::move(edges), MatrixKind::adjacency);
}

}  // namespace geolift

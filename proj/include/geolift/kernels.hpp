#ifndef GEOLIFT_KERNELS_HPP
#define GEOLIFT_KERNELS_HPP

#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "geolift/core.hpp"
#include "json.hpp"

namespace geolift {

// ---------------------------------------------------------------------------
// Latent domains

struct BoxDomain {
  Vector lo;
  Vector hi;
};

/// Unit sphere in R^dim.
struct SphereDomain {
  Index dim = 3;
};

using Domain = std::variant<BoxDomain, SphereDomain>;

Index domain_dim(const Domain& d);
/// Closed membership with absolute tolerance.
bool domain_contains(const Domain& d, const Vector& z, double tol = 1e-9);

// ---------------------------------------------------------------------------
// Kernel variants. Every callable describes the unscaled kernel; the model's
// sparsity factor rho multiplies f.

/// f(x, y) = g(x - y).
struct TranslationInvariant {
  std::function<double(const Vector&)> g;
  /// Hessian of -g at the origin; finite-differenced from g when absent.
  std::optional<Matrix> neg_hessian_at_0;
};

/// f(x, y) = h(|x - y|^2).
struct RadialTI {
  std::function<double(double)> h;
  double h_prime_at_0 = 0.0;
};

/// f(x, y) = g(<x, y>) on the unit sphere.
struct InnerProduct {
  std::function<double(double)> g;
  double g_prime_at_1 = 0.0;
  double g_second_at_1 = 0.0;
};

/// One-dimensional kernel used as a coordinate of an additive kernel.
struct ScalarKernel {
  std::string name;
  std::function<double(double, double)> f;
  /// d^2 f / dx dy evaluated at (xi, xi).
  std::function<double(double)> mixed_diag;
  /// Optional explicit feature map, <features(x), features(y)> = f(x, y).
  std::function<Vector(double)> features;
};

/// cos(w(x) - w(y)) with phase w(x) = a x + b x^2; mixed_diag = w'(xi)^2.
ScalarKernel phase_cosine(double linear, double quadratic);

/// f(x, y) = offset + sum_i alpha_i f_i(x_i, y_i).
struct Additive {
  std::vector<ScalarKernel> parts;
  std::vector<double> weights;
  double offset = 0.0;
};

/// f(x, y) = <phi(x), phi(y)>.
struct FiniteRank {
  std::function<Vector(const Vector&)> phi;
  Index feature_dim = 0;
};

using KernelVariant = std::variant<TranslationInvariant, RadialTI, InnerProduct, Additive, FiniteRank>;

class KernelModel {
 public:
  /// `features`, when given, is an explicit finite-rank map of the same
  /// (unscaled) kernel; structured variants keep their closed forms and
  /// gain the feature-space oracles.
  KernelModel(std::string name, KernelVariant variant, Domain domain, double rho = 1.0,
              std::optional<FiniteRank> features = std::nullopt);

  const std::string& name() const noexcept { return name_; }
  const KernelVariant& variant() const noexcept { return variant_; }
  const Domain& domain() const noexcept { return domain_; }
  Index latent_dim() const { return domain_dim(domain_); }
  double rho() const noexcept { return rho_; }
  bool has_feature_map() const noexcept { return features_.has_value(); }
  /// True when the feature map only approximates f (truncated expansion).
  bool feature_map_truncated() const noexcept { return truncated_; }

  /// rho * f(x, y).
  double operator()(const Vector& x, const Vector& y) const;

  KernelModel with_rho(double rho) const;
  /// FiniteRank model of the same kernel (requires a feature map).
  KernelModel as_finite_rank() const;
  KernelModel& mark_truncated(bool truncated = true) {
    truncated_ = truncated;
    return *this;
  }

  /// Throws ValidationError when z is outside the domain.
  void check_domain(const Vector& z) const;
  const std::optional<FiniteRank>& features() const noexcept { return features_; }

 private:
  std::string name_;
  KernelVariant variant_;
  Domain domain_;
  double rho_;
  std::optional<FiniteRank> features_;
  bool truncated_ = false;
};

// ---------------------------------------------------------------------------
// Geometry

struct MetricTensor {
  Vector z;
  Matrix h;  ///< symmetric positive definite
};

/// H_z = d^2 f / dx^(i) dy^(j) at (z, z).
MetricTensor metric_tensor(const KernelModel& k, const Vector& z);

/// Closed-form geodesic distance on the manifold between phi(zi) and phi(zj).
double geodesic_oracle(const KernelModel& k, const Vector& zi, const Vector& zj);

/// Coordinatewise monotone map under which additive-kernel geodesics are
/// Euclidean. Integrals run from the lower box edge.
Vector psi_transform(const KernelModel& k, const Vector& z);

/// sqrt(rho) * phi(z).
Vector feature_map(const KernelModel& k, const Vector& z);

struct PathLengths {
  double feature_length = 0.0;     ///< sum |phi(z_k) - phi(z_{k-1})|
  double riemannian_length = 0.0;  ///< sum <dz, H_{z_{k-1}} dz>^{1/2}
};

/// Discretized lengths of the path whose vertices are the rows of `path`.
PathLengths path_length_oracle(const KernelModel& k, const Matrix& path);
double feature_length(const KernelModel& k, const Matrix& path);
double riemannian_length(const KernelModel& k, const Matrix& path);

/// m points evenly spaced on the straight segment from a to b (inclusive).
Matrix straight_path(const Vector& a, const Vector& b, Index m);
/// m points on the shorter great-circle arc between unit vectors a and b.
Matrix great_circle_path(const Vector& a, const Vector& b, Index m);

// ---------------------------------------------------------------------------
// Sampling

/// Regular grid with m = n^{1/d} points per axis including the box edges;
/// the first coordinate varies fastest.
PointCloud sample_latent_grid(const BoxDomain& box, Index n);

/// i.i.d. uniform points in the box (or on the sphere).
PointCloud sample_latent_uniform(const Domain& domain, Index n, Seed seed);

/// Noiseless matrix F_ij = rho f(z_i, z_j) (diagonal included).
SimilarityMatrix kernel_matrix(const KernelModel& k, const PointCloud& z);

/// Independent Bernoulli(rho f(z_i, z_j)) edges for i < j; zero diagonal.
/// Draw (i, j) depends only on (seed, i * n + j).
SimilarityMatrix sample_adjacency(const KernelModel& k, const PointCloud& z, Seed seed);

// ---------------------------------------------------------------------------
// Catalog

/// rho {cos(x1 - y1) + cos(x2 - y2) + 2} / 4 on [-pi + 0.25, pi - 0.25]^2.
KernelModel cosine_grid_kernel(double rho = 1.0);
/// exp(-scale |x - y|^2); feature map is a Taylor truncation of given degree.
KernelModel radial_exponential_kernel(Index dim = 2, double scale = 1.0, double lo = -1.0,
                                      double hi = 1.0, Index taylor_degree = 24,
                                      double rho = 1.0);
/// <x, y> on the unit sphere.
KernelModel linear_inner_product_kernel(Index dim = 3, double rho = 1.0);
/// sum_k a_k <x, y>^k on the unit sphere, a_k >= 0.
KernelModel polynomial_inner_product_kernel(Index dim, std::vector<double> coefficients,
                                            double rho = 1.0);
/// offset + sum_i alpha_i cos(w_i(x_i) - w_i(y_i)), w_i(t) = a_i t + b_i t^2.
KernelModel additive_cosine_kernel(std::vector<double> alphas, double offset,
                                   std::vector<double> phase_linear,
                                   std::vector<double> phase_quadratic, BoxDomain box,
                                   double rho = 1.0);

std::vector<std::string> kernel_catalog();

/// Builds a catalog kernel from its JSON description, e.g.
/// {"name": "cosine-grid", "rho": 1.0}. Unknown keys are rejected.
KernelModel kernel_from_json(const nlohmann::json& spec);

}  // namespace geolift

#endif  // GEOLIFT_KERNELS_HPP

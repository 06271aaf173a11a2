#include <cmath>
#include <random>

#include "doctest.h"
#include "geolift/kernels.hpp"
#include "test_util.hpp"

using namespace geolift;

namespace {

// Independent mixed second difference of f at (z, z).
Matrix mixed_hessian_by_differences(const KernelModel& k, const Vector& z, double h = 1e-4) {
  const auto d = z.size();
  Matrix out(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      const Vector ei = h * Vector::Unit(d, i), ej = h * Vector::Unit(d, j);
      out(i, j) = (k(z + ei, z + ej) - k(z + ei, z - ej) - k(z - ei, z + ej) + k(z - ei, z - ej)) /
                  (4.0 * h * h);
    }
  }
  return out;
}

Vector random_in_box(const BoxDomain& box, std::mt19937_64& gen) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Vector z(box.lo.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = box.lo(i) + u(gen) * (box.hi(i) - box.lo(i));
  return z;
}

Vector random_unit(Index dim, std::mt19937_64& gen) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vector z(dim);
  for (auto& v : z) v = n(gen);
  return z.normalized();
}

KernelModel additive_sample() {
  BoxDomain box{Vector::Constant(2, 0.5), Vector::Constant(2, 2.0)};
  return additive_cosine_kernel({0.3, 0.2}, 0.5, {1.0, 0.5}, {0.0, 0.4}, box);
}

}  // namespace

TEST_CASE("metric_tensor: cosine grid kernel is I/4 everywhere") {
  const auto k = cosine_grid_kernel();
  std::mt19937_64 gen(1);
  for (int t = 0; t < 10; ++t) {
    const Vector z = random_in_box(std::get<BoxDomain>(k.domain()), gen);
    const auto h = metric_tensor(k, z);
    CHECK((h.h - 0.25 * Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((mixed_hessian_by_differences(k, z) - h.h).cwiseAbs().maxCoeff() <= 1e-6);
  }
}

TEST_CASE("metric_tensor: linear inner-product kernel is the identity") {
  const auto k = linear_inner_product_kernel(3);
  std::mt19937_64 gen(2);
  const Vector z = random_unit(3, gen);
  CHECK((metric_tensor(k, z).h - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("metric_tensor: radial exponential is 2I and matches differences") {
  const auto k = radial_exponential_kernel(2, 1.0);
  Vector z(2);
  z << 0.3, -0.2;
  const auto h = metric_tensor(k, z);
  CHECK((h.h - 2.0 * Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((mixed_hessian_by_differences(k, z) - h.h).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("metric_tensor: structured forms agree with the feature-map Jacobian") {
  std::mt19937_64 gen(3);
  SUBCASE("cosine grid") {
    const auto k = cosine_grid_kernel();
    const Vector z = random_in_box(std::get<BoxDomain>(k.domain()), gen);
    CHECK((metric_tensor(k.as_finite_rank(), z).h - metric_tensor(k, z).h).cwiseAbs().maxCoeff() <= 1e-6);
  }
  SUBCASE("polynomial inner product") {
    const auto k = polynomial_inner_product_kernel(3, {0.2, 0.5, 0.3});
    const Vector z = random_unit(3, gen);
    CHECK((metric_tensor(k.as_finite_rank(), z).h - metric_tensor(k, z).h).cwiseAbs().maxCoeff() <= 1e-6);
  }
  SUBCASE("additive cosine") {
    const auto k = additive_sample();
    const Vector z = random_in_box(std::get<BoxDomain>(k.domain()), gen);
    CHECK((metric_tensor(k.as_finite_rank(), z).h - metric_tensor(k, z).h).cwiseAbs().maxCoeff() <= 1e-6);
  }
}

TEST_CASE("metric_tensor: a degenerate kernel violates positive definiteness") {
  const KernelModel flat("flat", InnerProduct{[](double) { return 1.0; }, 0.0, 0.0}, SphereDomain{3});
  CHECK_THROWS_AS(metric_tensor(flat, Vector::Unit(3, 0)), KernelAssumptionError);
}

TEST_CASE("geodesic_oracle: closed forms") {
  Vector a(2), b(2);
  a << 0.4, -1.0;
  b << -0.8, 1.3;
  CHECK(geodesic_oracle(cosine_grid_kernel(), a, b) == doctest::Approx((a - b).norm() / 2).epsilon(1e-14));

  const Vector dz = Vector::Unit(2, 0);
  CHECK(std::abs(geodesic_oracle(radial_exponential_kernel(2, 1.0), Vector::Zero(2), dz) - std::sqrt(2.0)) <= 1e-12);

  const Vector n = Vector::Unit(3, 2);
  CHECK(geodesic_oracle(linear_inner_product_kernel(3), n, -n) == M_PI);

  FiniteRank ident{[](const Vector& z) { return z; }, 2};
  const KernelModel fr("identity", ident, BoxDomain{Vector::Constant(2, -1), Vector::Constant(2, 1)});
  CHECK_THROWS_AS(geodesic_oracle(fr, a / 4, b / 4), UnsupportedVariantError);
}

TEST_CASE("feature_map: Gram identity on every catalog kernel") {
  std::mt19937_64 gen(4);
  auto gram_gap = [&](const KernelModel& k, auto draw) {
    double worst = 0.0;
    for (int t = 0; t < 100; ++t) {
      const Vector x = draw(), y = draw();
      worst = std::max(worst, std::abs(feature_map(k, x).dot(feature_map(k, y)) - k(x, y)));
      worst = std::max(worst, std::abs(feature_map(k, x).squaredNorm() - k(x, x)));
      worst = std::max(worst, std::abs(k(x, y) - k(y, x)));
    }
    return worst;
  };
  const auto cg = cosine_grid_kernel();
  CHECK(gram_gap(cg, [&] { return random_in_box(std::get<BoxDomain>(cg.domain()), gen); }) <= 1e-12);
  const auto lin = linear_inner_product_kernel(3);
  CHECK(gram_gap(lin, [&] { return random_unit(3, gen); }) <= 1e-12);
  const auto poly = polynomial_inner_product_kernel(3, {0.1, 0.4, 0.3, 0.2});
  CHECK(gram_gap(poly, [&] { return random_unit(3, gen); }) <= 1e-12);
  const auto add = additive_sample();
  CHECK(gram_gap(add, [&] { return random_in_box(std::get<BoxDomain>(add.domain()), gen); }) <= 1e-12);
  // Truncated Taylor map: the remainder bounds the gap, not round-off.
  const auto rad = radial_exponential_kernel(2, 1.0);
  CHECK(rad.feature_map_truncated());
  CHECK(gram_gap(rad, [&] { return random_in_box(std::get<BoxDomain>(rad.domain()), gen); }) <= 1e-9);
}

TEST_CASE("feature_map: cosine grid has the explicit five-dimensional form") {
  Vector z(2);
  z << 0.7, -1.9;
  Vector expected(5);
  expected << std::cos(0.7), std::sin(0.7), std::cos(-1.9), std::sin(-1.9), std::sqrt(2.0);
  CHECK((feature_map(cosine_grid_kernel(), z) - 0.5 * expected).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("feature_map: identity map of the plain inner product") {
  FiniteRank ident{[](const Vector& z) { return z; }, 2};
  const KernelModel k("identity", ident, BoxDomain{Vector::Constant(2, -1), Vector::Constant(2, 1)}, 1.0, ident);
  Vector z(2);
  z << 0.25, -0.5;
  CHECK(feature_map(k, z) == z);
}

TEST_CASE("psi_transform: examples") {
  BoxDomain box{Vector::Constant(1, -1.0), Vector::Constant(1, 2.0)};
  const auto k1 = additive_cosine_kernel({1.0}, 0.0, {1.0}, {0.0}, box);
  const auto k4 = additive_cosine_kernel({4.0}, 0.0, {1.0}, {0.0}, box);
  for (double z : {-1.0, -0.3, 0.0, 1.1, 2.0}) {
    const Vector v = Vector::Constant(1, z);
    CHECK(std::abs(psi_transform(k1, v)(0) - (z + 1.0)) <= 1e-9);
    CHECK(std::abs(psi_transform(k4, v)(0) - 2.0 * psi_transform(k1, v)(0)) <= 1e-9);
  }
}

TEST_CASE("psi_transform: nonlinear phase matches a closed form and is monotone") {
  // w(t) = a t + b t^2 with w' > 0 on the box: psi = sqrt(alpha) (w(z) - w(lo)).
  const auto k = additive_sample();
  const auto& box = std::get<BoxDomain>(k.domain());
  const double alpha[2] = {0.3, 0.2}, a[2] = {1.0, 0.5}, b[2] = {0.0, 0.4};
  std::mt19937_64 gen(5);
  for (int t = 0; t < 50; ++t) {
    const Vector z = random_in_box(box, gen);
    const Vector p = psi_transform(k, z);
    for (int i = 0; i < 2; ++i) {
      const auto w = [&](double s) { return a[i] * s + b[i] * s * s; };
      CHECK(std::abs(p(i) - std::sqrt(alpha[i]) * (w(z(i)) - w(box.lo(i)))) <= 1e-9);
    }
    const Vector z2 = z + 0.01 * Vector::Ones(2);
    if (domain_contains(k.domain(), z2)) {
      CHECK((psi_transform(k, z2).array() > p.array()).all());
    }
  }
}

TEST_CASE("psi_transform: non-additive kernels are rejected") {
  CHECK_THROWS_AS(psi_transform(cosine_grid_kernel(), Vector::Zero(2)), UnsupportedVariantError);
}

TEST_CASE("path_length_oracle: constant path") {
  const auto k = cosine_grid_kernel();
  const Matrix path = Matrix::Zero(5, 2);
  const auto l = path_length_oracle(k, path);
  CHECK(l.feature_length == 0.0);
  CHECK(l.riemannian_length == 0.0);
}

TEST_CASE("path_length_oracle: straight unit segment under the cosine grid kernel") {
  const auto k = cosine_grid_kernel();
  const Vector a = Vector::Zero(2), b = Vector::Unit(2, 0);
  const auto l = path_length_oracle(k, straight_path(a, b, 10'001));
  CHECK(std::abs(l.feature_length - 0.5) <= 1e-4);
  CHECK(std::abs(l.riemannian_length - 0.5) <= 1e-4);
  CHECK(std::abs(l.feature_length - geodesic_oracle(k, a, b)) <= 1e-4);
}

TEST_CASE("path_length_oracle: refinement closes the gap") {
  const auto k = additive_sample();
  Vector a(2), b(2);
  a << 0.6, 1.9;
  b << 1.8, 0.7;
  double prev_feature = 0.0, prev_gap = 0.0;
  for (Index m = 16; m <= 4096; m *= 2) {
    const auto l = path_length_oracle(k, straight_path(a, b, m));
    const double gap = std::abs(l.feature_length - l.riemannian_length);
    if (m > 16) {
      CHECK(std::abs(l.feature_length - prev_feature) <= prev_gap);
      CHECK(gap <= prev_gap);
    }
    prev_feature = l.feature_length;
    prev_gap = gap;
  }
  CHECK(prev_gap <= 1e-4);
}

TEST_CASE("path_length_oracle: perturbed paths are never shorter than the geodesic") {
  std::mt19937_64 gen(6);
  std::normal_distribution<double> jitter(0.0, 0.05);
  for (const auto& k : {cosine_grid_kernel(), additive_sample()}) {
    const auto& box = std::get<BoxDomain>(k.domain());
    for (int t = 0; t < 20; ++t) {
      Vector a = random_in_box(box, gen), b = random_in_box(box, gen);
      Matrix path = straight_path(a, b, 401);
      for (Eigen::Index r = 1; r + 1 < path.rows(); ++r) {
        const double bump = std::sin(M_PI * static_cast<double>(r) / 400.0);
        for (Eigen::Index c = 0; c < 2; ++c) {
          path(r, c) = std::clamp(path(r, c) + bump * jitter(gen), box.lo(c), box.hi(c));
        }
      }
      // Straight segment in psi coordinates is the geodesic; any other
      // path in z is at least as long.
      CHECK(feature_length(k, path) >= geodesic_oracle(k, a, b) - 1e-4);
    }
  }
}

TEST_CASE("path_length_oracle: radial kernel on its truncated feature map") {
  const auto k = radial_exponential_kernel(2, 1.0);
  Vector a(2), b(2);
  a << -0.4, 0.1;
  b << 0.5, -0.3;
  const double oracle = geodesic_oracle(k, a, b);
  CHECK(std::abs(oracle - std::sqrt(2.0) * (a - b).norm()) <= 1e-12);
  const auto l = path_length_oracle(k, straight_path(a, b, 10'001));
  CHECK(std::abs(l.feature_length - oracle) <= 1e-3);
}

TEST_CASE("path_length_oracle: great circles under the linear inner product") {
  const auto k = linear_inner_product_kernel(3);
  std::mt19937_64 gen(7);
  for (int t = 0; t < 10; ++t) {
    const Vector a = random_unit(3, gen), b = random_unit(3, gen);
    const double arc = std::acos(std::clamp(a.dot(b), -1.0, 1.0));
    CHECK(std::abs(feature_length(k, great_circle_path(a, b, 2001)) - arc) <= 1e-4);
    CHECK(std::abs(geodesic_oracle(k, a, b) - arc) <= 1e-12);
  }
}

TEST_CASE("path_length_oracle: sphere paths ignore the second derivative of g") {
  // Both kernels have g'(1) = 1; g''(1) is 0 and 1 respectively.
  const auto lin = polynomial_inner_product_kernel(3, {0.0, 1.0});
  const auto quad = polynomial_inner_product_kernel(3, {0.0, 0.0, 0.5});
  std::mt19937_64 gen(8);
  for (int t = 0; t < 5; ++t) {
    const Vector a = random_unit(3, gen), b = random_unit(3, gen);
    const Matrix path = great_circle_path(a, b, 5001);
    CHECK(std::abs(riemannian_length(lin, path) - riemannian_length(quad, path)) <= 1e-6);
  }
}

TEST_CASE("geodesic_oracle: scaling f by c scales distances by sqrt(c)") {
  std::mt19937_64 gen(9);
  const auto cg = cosine_grid_kernel();
  const auto add = additive_sample();
  const auto rad = radial_exponential_kernel(2, 1.0);
  const auto ip = polynomial_inner_product_kernel(3, {0.2, 0.5, 0.3});
  for (double c : {0.09, 0.5}) {
    Vector a = random_in_box(std::get<BoxDomain>(cg.domain()), gen), b = random_in_box(std::get<BoxDomain>(cg.domain()), gen);
    CHECK(geodesic_oracle(cg.with_rho(c), a, b) == doctest::Approx(std::sqrt(c) * geodesic_oracle(cg, a, b)));
    a = random_in_box(std::get<BoxDomain>(add.domain()), gen);
    b = random_in_box(std::get<BoxDomain>(add.domain()), gen);
    CHECK(geodesic_oracle(add.with_rho(c), a, b) == doctest::Approx(std::sqrt(c) * geodesic_oracle(add, a, b)));
    a = random_in_box(std::get<BoxDomain>(rad.domain()), gen);
    b = random_in_box(std::get<BoxDomain>(rad.domain()), gen);
    CHECK(geodesic_oracle(rad.with_rho(c), a, b) == doctest::Approx(std::sqrt(c) * geodesic_oracle(rad, a, b)));
    a = random_unit(3, gen);
    b = random_unit(3, gen);
    CHECK(geodesic_oracle(ip.with_rho(c), a, b) == doctest::Approx(std::sqrt(c) * geodesic_oracle(ip, a, b)));
  }
}

TEST_CASE("sparsified cosine kernel: feature-space lengths scale with sqrt(rho)") {
  // With rho = 0.25 a linear-in-rho reading predicts |dz| / 8; the feature
  // map sqrt(rho) phi gives |dz| / 4.
  const auto k = cosine_grid_kernel(0.25);
  Vector a(2), b(2);
  a << -1.0, 0.5;
  b << 1.2, -0.7;
  const double measured = feature_length(k, straight_path(a, b, 10'001));
  CHECK(std::abs(measured - 0.25 * (a - b).norm()) <= 1e-6);
  CHECK(std::abs(measured - 0.125 * (a - b).norm()) > 0.1);
  CHECK(std::abs(geodesic_oracle(k, a, b) - measured) <= 1e-6);
}

TEST_CASE("sample_latent_grid: examples") {
  BoxDomain unit{Vector::Zero(2), Vector::Ones(2)};
  const auto g = sample_latent_grid(unit, 4);
  Matrix expected(4, 2);
  expected << 0, 0, 1, 0, 0, 1, 1, 1;
  CHECK(g.coords() == expected);

  const auto box = std::get<BoxDomain>(cosine_grid_kernel().domain());
  const auto c = sample_latent_grid(box, 100);
  CHECK(c.size() == 100);
  CHECK(c.coords()(0, 0) == doctest::Approx(-M_PI + 0.25));
  CHECK(c.coords()(0, 1) == doctest::Approx(-2.8915926535897933));
  const double step = (box.hi(0) - box.lo(0)) / 9.0;
  for (Index i = 1; i < 10; ++i) {
    CHECK(c.coords()(static_cast<Eigen::Index>(i), 0) - c.coords()(static_cast<Eigen::Index>(i - 1), 0) ==
          doctest::Approx(step));
    CHECK(c.coords()(static_cast<Eigen::Index>(10 * i), 1) - c.coords()(static_cast<Eigen::Index>(10 * (i - 1)), 1) ==
          doctest::Approx(step));
  }
  CHECK_THROWS_AS(sample_latent_grid(box, 99), ValidationError);
}

TEST_CASE("sample_adjacency: degenerate probabilities") {
  const BoxDomain box{Vector::Zero(1), Vector::Ones(1)};
  FiniteRank one{[](const Vector&) { return Vector::Ones(1).eval(); }, 1};
  const KernelModel always("always", one, box);
  const auto z = sample_latent_grid(box, 6);
  CHECK(sample_adjacency(always, z, Seed{1}).nonzeros_upper() == 15);

  const auto never = cosine_grid_kernel(0.0);
  const auto zc = sample_latent_grid(std::get<BoxDomain>(never.domain()), 16);
  CHECK(sample_adjacency(never, zc, Seed{1}).nonzeros_upper() == 0);

  FiniteRank two{[](const Vector&) { return Vector::Constant(1, 2.0).eval(); }, 1};
  const KernelModel too_big("too-big", two, box);
  CHECK_THROWS_AS(sample_adjacency(too_big, z, Seed{1}), ValidationError);
}

TEST_CASE("sample_adjacency: reproducible, symmetric, hollow") {
  const auto k = cosine_grid_kernel();
  const auto z = sample_latent_grid(std::get<BoxDomain>(k.domain()), 100);
  const auto a1 = sample_adjacency(k, z, Seed{11}).to_dense();
  const auto a2 = sample_adjacency(k, z, Seed{11}).to_dense();
  CHECK(a1 == a2);
  CHECK(a1 == a1.transpose());
  CHECK(a1.diagonal().cwiseAbs().maxCoeff() == 0.0);
  CHECK(a1 != sample_adjacency(k, z, Seed{12}).to_dense());
}

TEST_CASE("sample_adjacency: empirical edge frequencies match the kernel") {
  const auto k = cosine_grid_kernel();
  const auto z = sample_latent_grid(std::get<BoxDomain>(k.domain()), 400);
  const int reps = 50;
  Matrix mean = Matrix::Zero(400, 400);
  for (int s = 0; s < reps; ++s) mean += sample_adjacency(k, z, Seed{1000u + static_cast<unsigned>(s)}).to_dense();
  mean /= reps;
  const Matrix f = kernel_matrix(k, z).to_dense();
  Index outside = 0, pairs = 0;
  double z_sum = 0.0;
  for (Eigen::Index i = 0; i < 400; ++i) {
    for (Eigen::Index j = i + 1; j < 400; ++j) {
      const double p = f(i, j);
      const double sigma = std::sqrt(p * (1 - p) / reps);
      if (std::abs(mean(i, j) - p) > 4 * sigma) ++outside;
      ++pairs;
      z_sum += (mean(i, j) - p) * reps;
    }
  }
  MESSAGE("pairs outside 4 sigma: " << outside << " of " << pairs);
  // A handful of 4-sigma excursions is expected among ~8e4 pairs.
  CHECK(outside <= pairs / 1000);
  // Total edge count across all repetitions: aggregate 4-sigma bound.
  double var = 0.0;
  for (Eigen::Index i = 0; i < 400; ++i)
    for (Eigen::Index j = i + 1; j < 400; ++j) var += reps * f(i, j) * (1 - f(i, j));
  CHECK(std::abs(z_sum) <= 4 * std::sqrt(var));
}

TEST_CASE("kernel_from_json: catalog and errors") {
  using nlohmann::json;
  for (const auto& name : kernel_catalog()) {
    CHECK(kernel_from_json(json{{"name", name}}).name().find(name.substr(0, 6)) != std::string::npos);
  }
  CHECK(kernel_from_json(json{{"name", "cosine-grid"}, {"rho", 0.5}}).rho() == 0.5);
  CHECK_THROWS_AS(kernel_from_json(json{{"name", "nope"}}), ConfigError);
  CHECK_THROWS_AS(kernel_from_json(json{{"name", "cosine-grid"}, {"bogus", 1}}), ConfigError);
  CHECK_THROWS_AS(kernel_from_json(json{{"name", "cosine-grid"}, {"rho", 1.5}}), ConfigError);
  CHECK_THROWS_AS(kernel_from_json(json{{"rho", 1.0}}), ConfigError);
}

TEST_CASE("inner-product kernels only accept unit vectors") {
  const auto k = linear_inner_product_kernel(3);
  CHECK_THROWS_AS(k.check_domain(Vector::Constant(3, 1.0)), ValidationError);
  CHECK_NOTHROW(k.check_domain(Vector::Unit(3, 1)));
}

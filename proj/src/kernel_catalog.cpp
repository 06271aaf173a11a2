#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

#include "geolift/kernels.hpp"

namespace geolift {

KernelModel cosine_grid_kernel(double rho) {
  const double edge = std::numbers::pi - 0.25;
  BoxDomain box{Vector::Constant(2, -edge), Vector::Constant(2, edge)};
  TranslationInvariant ti;
  ti.g = [](const Vector& u) { return (std::cos(u(0)) + std::cos(u(1)) + 2.0) / 4.0; };
  ti.neg_hessian_at_0 = Matrix::Identity(2, 2) / 4.0;
  FiniteRank fr;
  fr.feature_dim = 5;
  fr.phi = [](const Vector& x) {
    Vector v(5);
    v << std::cos(x(0)), std::sin(x(0)), std::cos(x(1)), std::sin(x(1)), std::numbers::sqrt2;
    return Vector(0.5 * v);
  };
  return KernelModel("cosine-grid", std::move(ti), std::move(box), rho, std::move(fr));
}

namespace {

// All multi-indices of length d with total degree <= max_degree, graded order.
std::vector<std::vector<int>> multi_indices(Index d, Index max_degree) {
  std::vector<std::vector<int>> out;
  std::vector<int> current(d, 0);
  for (Index total = 0; total <= max_degree; ++total) {
    // Compositions of `total` into d nonnegative parts, lexicographic.
    std::function<void(Index, int)> fill = [&](Index pos, int left) {
      if (pos + 1 == d) {
        current[pos] = left;
        out.push_back(current);
        return;
      }
      for (int v = left; v >= 0; --v) {
        current[pos] = v;
        fill(pos + 1, left - v);
      }
    };
    if (d == 0) break;
    fill(0, static_cast<int>(total));
  }
  return out;
}

}  // namespace

KernelModel radial_exponential_kernel(Index dim, double scale, double lo, double hi,
                                      Index taylor_degree, double rho) {
  if (dim < 1) throw ValidationError("radial-exponential needs dim >= 1");
  if (!(scale > 0.0)) throw ValidationError("radial-exponential needs scale > 0");
  BoxDomain box{Vector::Constant(static_cast<Eigen::Index>(dim), lo),
                Vector::Constant(static_cast<Eigen::Index>(dim), hi)};
  RadialTI radial;
  radial.h = [scale](double s) { return std::exp(-scale * s); };
  radial.h_prime_at_0 = -scale;

  // exp(-c|x-y|^2) = e^{-c|x|^2} e^{-c|y|^2} sum_alpha (2c)^{|alpha|} / alpha! x^alpha y^alpha
  const auto indices = multi_indices(dim, taylor_degree);
  std::vector<double> coeff;
  coeff.reserve(indices.size());
  for (const auto& alpha : indices) {
    double log_c = 0.0;
    int total = 0;
    for (int a : alpha) {
      log_c -= std::lgamma(static_cast<double>(a) + 1.0);
      total += a;
    }
    log_c += static_cast<double>(total) * std::log(2.0 * scale);
    coeff.push_back(std::exp(0.5 * log_c));
  }
  FiniteRank fr;
  fr.feature_dim = indices.size();
  fr.phi = [indices, coeff, scale](const Vector& x) {
    Vector v(static_cast<Eigen::Index>(indices.size()));
    const double envelope = std::exp(-scale * x.squaredNorm());
    for (std::size_t k = 0; k < indices.size(); ++k) {
      double mono = 1.0;
      for (std::size_t c = 0; c < indices[k].size(); ++c) {
        mono *= std::pow(x(static_cast<Eigen::Index>(c)), indices[k][c]);
      }
      v(static_cast<Eigen::Index>(k)) = envelope * coeff[k] * mono;
    }
    return v;
  };
  KernelModel model("radial-exponential", std::move(radial), std::move(box), rho, std::move(fr));
  model.mark_truncated();
  return model;
}

KernelModel polynomial_inner_product_kernel(Index dim, std::vector<double> coefficients,
                                            double rho) {
  if (dim < 1) throw ValidationError("inner-product kernel needs dim >= 1");
  if (coefficients.empty()) throw ValidationError("polynomial kernel needs coefficients");
  for (double a : coefficients) {
    if (!(a >= 0.0)) throw ValidationError("polynomial kernel coefficients must be nonnegative");
  }
  InnerProduct ip;
  ip.g = [coefficients](double t) {
    double acc = 0.0;
    for (std::size_t k = coefficients.size(); k-- > 0;) acc = acc * t + coefficients[k];
    return acc;
  };
  for (std::size_t k = 1; k < coefficients.size(); ++k) {
    ip.g_prime_at_1 += static_cast<double>(k) * coefficients[k];
    ip.g_second_at_1 += static_cast<double>(k * (k - 1)) * coefficients[k];
  }
  // Features: sqrt(a_k) times the k-fold Kronecker power of x.
  Index feature_dim = 0;
  Index block = 1;
  for (double a : coefficients) {
    if (a > 0.0) feature_dim += block;
    block *= dim;
  }
  FiniteRank fr;
  fr.feature_dim = feature_dim;
  fr.phi = [coefficients, feature_dim](const Vector& x) {
    Vector out(static_cast<Eigen::Index>(feature_dim));
    Vector power = Vector::Ones(1);
    Eigen::Index at = 0;
    for (std::size_t k = 0; k < coefficients.size(); ++k) {
      if (k > 0) {
        Vector next(power.size() * x.size());
        for (Eigen::Index i = 0; i < power.size(); ++i) {
          next.segment(i * x.size(), x.size()) = power(i) * x;
        }
        power = std::move(next);
      }
      if (coefficients[k] > 0.0) {
        out.segment(at, power.size()) = std::sqrt(coefficients[k]) * power;
        at += power.size();
      }
    }
    return out;
  };
  std::ostringstream name;
  name << "polynomial-inner-product[";
  for (std::size_t k = 0; k < coefficients.size(); ++k) name << (k ? "," : "") << coefficients[k];
  name << "]";
  return KernelModel(name.str(), std::move(ip), SphereDomain{dim}, rho, std::move(fr));
}

KernelModel linear_inner_product_kernel(Index dim, double rho) {
  KernelModel k = polynomial_inner_product_kernel(dim, {0.0, 1.0}, rho);
  return KernelModel("linear-inner-product", k.variant(), k.domain(), rho, k.features());
}

KernelModel additive_cosine_kernel(std::vector<double> alphas, double offset,
                                   std::vector<double> phase_linear,
                                   std::vector<double> phase_quadratic, BoxDomain box,
                                   double rho) {
  const std::size_t d = alphas.size();
  if (d == 0) throw ValidationError("additive-cosine needs at least one coordinate");
  if (phase_linear.size() != d || phase_quadratic.size() != d ||
      static_cast<std::size_t>(box.lo.size()) != d || static_cast<std::size_t>(box.hi.size()) != d) {
    throw ValidationError("additive-cosine parameter lengths must all equal the dimension");
  }
  if (!(offset >= 0.0)) throw ValidationError("additive-cosine offset must be nonnegative");
  Additive add;
  add.offset = offset;
  add.weights = alphas;
  for (std::size_t i = 0; i < d; ++i) add.parts.push_back(phase_cosine(phase_linear[i], phase_quadratic[i]));

  FiniteRank fr;
  fr.feature_dim = 2 * d + (offset > 0.0 ? 1 : 0);
  fr.phi = [parts = add.parts, alphas, offset, dim = fr.feature_dim](const Vector& x) {
    Vector out(static_cast<Eigen::Index>(dim));
    Eigen::Index at = 0;
    if (offset > 0.0) out(at++) = std::sqrt(offset);
    for (std::size_t i = 0; i < parts.size(); ++i) {
      out.segment(at, 2) = std::sqrt(alphas[i]) * parts[i].features(x(static_cast<Eigen::Index>(i)));
      at += 2;
    }
    return out;
  };
  return KernelModel("additive-cosine", std::move(add), std::move(box), rho, std::move(fr));
}

std::vector<std::string> kernel_catalog() {
  return {"cosine-grid", "radial-exponential", "linear-inner-product", "polynomial-inner-product",
          "additive-cosine"};
}

namespace {

std::string catalog_listing() {
  std::string s;
  for (const auto& name : kernel_catalog()) s += (s.empty() ? "" : ", ") + name;
  return s;
}

void reject_unknown(const nlohmann::json& spec, const std::set<std::string>& allowed,
                    const std::string& kernel) {
  for (const auto& [key, value] : spec.items()) {
    (void)value;
    if (!allowed.count(key)) {
      throw ConfigError("unknown key '" + key + "' for kernel " + kernel);
    }
  }
}

template <typename T>
T get_or(const nlohmann::json& spec, const char* key, T fallback) {
  if (!spec.contains(key)) return fallback;
  try {
    return spec.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("kernel parameter '") + key + "': " + e.what());
  }
}

Vector to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

KernelModel kernel_from_json(const nlohmann::json& spec) {
  if (!spec.is_object()) throw ConfigError("kernel specification must be a JSON object");
  if (!spec.contains("name") || !spec.at("name").is_string()) {
    throw ConfigError("kernel specification needs a 'name'; catalog: " + catalog_listing());
  }
  const std::string name = spec.at("name").get<std::string>();
  const double rho = get_or<double>(spec, "rho", 1.0);
  if (!(rho >= 0.0 && rho <= 1.0)) throw ConfigError("kernel rho must lie in [0, 1]");

  if (name == "cosine-grid") {
    reject_unknown(spec, {"name", "rho"}, name);
    return cosine_grid_kernel(rho);
  }
  if (name == "radial-exponential") {
    reject_unknown(spec, {"name", "rho", "dim", "scale", "lo", "hi", "taylor_degree"}, name);
    return radial_exponential_kernel(get_or<Index>(spec, "dim", 2), get_or<double>(spec, "scale", 1.0),
                                     get_or<double>(spec, "lo", -1.0), get_or<double>(spec, "hi", 1.0),
                                     get_or<Index>(spec, "taylor_degree", 24), rho);
  }
  if (name == "linear-inner-product") {
    reject_unknown(spec, {"name", "rho", "dim"}, name);
    return linear_inner_product_kernel(get_or<Index>(spec, "dim", 3), rho);
  }
  if (name == "polynomial-inner-product") {
    reject_unknown(spec, {"name", "rho", "dim", "coefficients"}, name);
    return polynomial_inner_product_kernel(
        get_or<Index>(spec, "dim", 3),
        get_or<std::vector<double>>(spec, "coefficients", {0.5, 0.0, 0.5}), rho);
  }
  if (name == "additive-cosine") {
    reject_unknown(spec, {"name", "rho", "alpha", "offset", "phase_linear", "phase_quadratic", "lo", "hi"},
                   name);
    const auto alpha = get_or<std::vector<double>>(spec, "alpha", {0.25, 0.25});
    const std::size_t d = alpha.size();
    return additive_cosine_kernel(
        alpha, get_or<double>(spec, "offset", 0.5),
        get_or<std::vector<double>>(spec, "phase_linear", std::vector<double>(d, 1.0)),
        get_or<std::vector<double>>(spec, "phase_quadratic", std::vector<double>(d, 0.0)),
        BoxDomain{to_vector(get_or<std::vector<double>>(spec, "lo", std::vector<double>(d, 0.0))),
                  to_vector(get_or<std::vector<double>>(spec, "hi", std::vector<double>(d, 2.0)))},
        rho);
  }
  throw ConfigError("unknown kernel '" + name + "'; catalog: " + catalog_listing());
}

}  // namespace geolift

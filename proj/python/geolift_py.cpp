// Python bindings: arrays in, arrays and dicts out.
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "geolift/error.hpp"
#include "geolift/evaluation.hpp"
#include "geolift/kernels.hpp"
#include "geolift/manifold.hpp"
#include "geolift/pipeline.hpp"
#include "geolift/spectral.hpp"

namespace py = pybind11;
using namespace geolift;

namespace {

nlohmann::json to_json(const py::object& o) {
  return nlohmann::json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

py::object from_json(const nlohmann::json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

MatrixKind parse_kind(const std::string& s) {
  if (s == "adjacency") return MatrixKind::adjacency;
  if (s == "correlation") return MatrixKind::correlation;
  if (s == "generic") return MatrixKind::generic;
  throw ValidationError("kind must be adjacency, correlation or generic, got '" + s + "'");
}

IsomapConfig::Rule parse_rule(const std::string& s) {
  if (s == "epsilon_auto") return IsomapConfig::Rule::epsilon_auto;
  if (s == "epsilon") return IsomapConfig::Rule::epsilon;
  if (s == "epsilon_quantile") return IsomapConfig::Rule::epsilon_quantile;
  if (s == "knn") return IsomapConfig::Rule::knn;
  throw ValidationError("unknown neighbourhood rule '" + s + "'");
}

CommandOutput run_command(const std::string& name, const PipelineConfig& cfg) {
  if (name == "simulate") return cmd_simulate(cfg);
  if (name == "embed") return cmd_embed(cfg);
  if (name == "isomap") return cmd_isomap(cfg);
  if (name == "evaluate") return cmd_evaluate(cfg);
  if (name == "pipeline") return cmd_pipeline(cfg);
  throw ValidationError("unknown command '" + name + "'");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Latent geometry recovery from network and similarity data";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  auto validation = py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
  py::register_exception<DimensionError>(m, "DimensionError", validation.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", validation.ptr());
  py::register_exception<UnsupportedVariantError>(m, "UnsupportedVariantError", validation.ptr());
  auto data = py::register_exception<DataError>(m, "DataError", base.ptr());
  py::register_exception<KernelAssumptionError>(m, "KernelAssumptionError", data.ptr());
  py::register_exception<ConvergenceError>(m, "ConvergenceError", base.ptr());

  m.def(
      "simulate",
      [](const py::object& kernel, Index n, const std::string& latent, bool bernoulli, std::uint64_t seed) {
        SimulateInput in;
        in.kernel = to_json(kernel);
        in.n = n;
        if (latent == "grid") {
          in.latent = SimulateInput::Latent::grid;
        } else if (latent == "uniform") {
          in.latent = SimulateInput::Latent::uniform;
        } else {
          throw ValidationError("latent must be grid or uniform");
        }
        in.bernoulli = bernoulli;
        const auto sim = simulate(in, Seed{seed});
        return py::make_tuple(sim.z.coords(), sim.a.to_dense());
      },
      py::arg("kernel"), py::arg("n"), py::arg("latent") = "grid", py::arg("bernoulli") = true,
      py::arg("seed") = 1, "Latent positions Z and matrix A as dense arrays.");

  m.def(
      "embed",
      [](const Matrix& a, std::optional<Index> p, Index max_p, Index rank_elbow, bool degree_correct,
         const std::string& kind) {
        SpectralConfig cfg;
        cfg.p = p;
        cfg.max_p = max_p;
        cfg.rank_elbow = rank_elbow;
        cfg.degree_correct = degree_correct;
        const auto r = embed(SimilarityMatrix::dense(a, parse_kind(kind)), cfg);
        py::dict out;
        out["embedding"] = r.embedding.coords();
        out["spectrum"] = r.spectrum;
        out["p"] = r.p;
        out["p_auto"] = r.p_auto;
        out["kept"] = r.kept;
        out["dropped"] = r.dropped;
        return out;
      },
      py::arg("a"), py::arg("p") = py::none(), py::arg("max_p") = 10, py::arg("rank_elbow") = 1,
      py::arg("degree_correct") = false, py::arg("kind") = "generic");

  m.def(
      "isomap",
      [](const Matrix& x, std::optional<Index> d, const std::string& rule, double epsilon, double quantile,
         Index k, bool largest_component, unsigned threads) {
        IsomapConfig cfg;
        cfg.rule = parse_rule(rule);
        cfg.epsilon = epsilon;
        cfg.quantile = quantile;
        cfg.k = k;
        cfg.d = d;
        cfg.component_policy = largest_component ? IsomapConfig::ComponentPolicy::largest_component
                                                 : IsomapConfig::ComponentPolicy::require_connected;
        cfg.threads = threads;
        const auto r = isomap(PointCloud(x), cfg);
        py::dict out;
        out["embedding"] = r.embedding.coords();
        out["kept"] = r.kept;
        out["geodesics"] = r.geodesics.entries();
        out["d"] = r.diagnostics.d;
        out["epsilon"] = r.diagnostics.epsilon;
        out["centered_spectrum"] = r.diagnostics.centered_spectrum;
        return out;
      },
      py::arg("x"), py::arg("d") = 2, py::arg("rule") = "epsilon_auto", py::arg("epsilon") = 0.0,
      py::arg("quantile") = 0.05, py::arg("k") = 10, py::arg("largest_component") = false,
      py::arg("threads") = 1);

  m.def("min_connecting_epsilon", [](const Matrix& x) { return min_connecting_epsilon(PointCloud(x)); });

  m.def("recovery_error", [](const Matrix& zhat, const Matrix& z) {
    return recovery_error(PointCloud(zhat), PointCloud(z));
  });
  m.def("geodesic_regression", [](const Matrix& dhat, const Matrix& dz) {
    const auto r = geodesic_regression(DistanceMatrix(dhat), DistanceMatrix(dz));
    py::dict out;
    out["slope"] = r.slope;
    out["r2"] = r.r2;
    out["pairs"] = r.pairs;
    out["excluded"] = r.excluded;
    return out;
  });
  m.def("monotonicity_diagnostic", [](const std::vector<double>& a, const std::vector<double>& b) {
    return monotonicity_diagnostic(a, b);
  });

  m.def("kernel_catalog", &kernel_catalog);
  m.def("geodesic_oracle", [](const py::object& kernel, const Vector& zi, const Vector& zj) {
    return geodesic_oracle(kernel_from_json(to_json(kernel)), zi, zj);
  });
  m.def("feature_map", [](const py::object& kernel, const Vector& z) {
    return feature_map(kernel_from_json(to_json(kernel)), z);
  });

  m.def(
      "run",
      [](const std::string& command, const std::filesystem::path& config, std::optional<std::filesystem::path> out,
         std::optional<unsigned> threads) {
        auto cfg = PipelineConfig::load(config);
        if (out) cfg.output_dir = *out;
        if (threads) cfg.isomap.config.threads = *threads;
        const auto r = run_command(command, cfg);
        py::dict result;
        std::vector<std::string> files;
        for (const auto& f : r.files) files.push_back(f.string());
        result["files"] = files;
        result["summary"] = from_json(r.summary);
        return result;
      },
      py::arg("command"), py::arg("config"), py::arg("out") = py::none(), py::arg("threads") = py::none(),
      "Run one CLI command against a config file and return its summary.");
}

#ifndef GEOLIFT_PIPELINE_HPP
#define GEOLIFT_PIPELINE_HPP

#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "geolift/evaluation.hpp"
#include "geolift/ingestion.hpp"
#include "geolift/kernels.hpp"
#include "geolift/manifold.hpp"
#include "geolift/spectral.hpp"
#include "json.hpp"

namespace geolift {

// ---------------------------------------------------------------------------
// Configuration. Relative paths are resolved against `base_dir` (the config
// file's directory) at load time.

struct SimulateInput {
  nlohmann::json kernel;  ///< catalog description, see kernel_from_json
  Index n = 0;
  enum class Latent { grid, uniform } latent = Latent::grid;
  bool bernoulli = true;  ///< false: A = rho f(Z_i, Z_j) exactly
};
struct EdgeListInput {
  std::filesystem::path path;
  EdgePolicy policy = EdgePolicy::symmetrize_union;
  std::optional<std::filesystem::path> vertices;  ///< labelled CSV fixing vertex order
};
struct DenseMatrixInput {
  std::filesystem::path path;
  std::optional<MatrixKind> kind;
};
struct TimeSeriesInput {
  std::filesystem::path path;
};
/// Already embedded points: skips the spectral stage.
struct PointsInput {
  std::filesystem::path path;
};
using InputSpec = std::variant<SimulateInput, EdgeListInput, DenseMatrixInput, TimeSeriesInput, PointsInput>;

struct ColumnRef {
  std::filesystem::path path;
  std::string column;
};

struct IsomapStage {
  IsomapConfig config;
  std::optional<std::filesystem::path> input;  ///< X.csv; default <out>/X.csv
  bool write_geodesics = false;
  bool scatter = true;
  std::optional<ColumnRef> covariate;  ///< colours the scatter plot
};

struct EmdRequest {
  std::filesystem::path path;  ///< CSV with label and group columns
  std::string column = "group";
  std::string group_a;
  std::string group_b;
  Index sample = 100;
  Index reps = 10;
};

struct EvaluationStage {
  std::optional<std::filesystem::path> truth;      ///< Z.csv; default <out>/Z.csv when simulated
  std::optional<std::filesystem::path> zhat;       ///< default <out>/Zhat.csv
  std::optional<std::filesystem::path> geodesics;  ///< default <out>/geodesics.csv
  bool recovery = true;
  bool regression = false;
  std::optional<ColumnRef> monotonicity;
  std::optional<EmdRequest> emd;
  Index pairs_max = 100000;
};

struct PipelineConfig {
  InputSpec input = SimulateInput{};
  SpectralConfig spectral;
  IsomapStage isomap;
  EvaluationStage evaluation;
  Seed seed{0};
  std::filesystem::path output_dir = "out";

  /// Parses and validates; unknown keys anywhere raise ConfigError.
  static PipelineConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = ".");
  static PipelineConfig load(const std::filesystem::path& path);
  nlohmann::json to_json() const;
};

struct Simulation {
  KernelModel kernel;
  PointCloud z;
  SimilarityMatrix a;
};

/// Latent positions (grid, or uniform from seed.derive(1)) and the matrix:
/// Bernoulli adjacency from seed.derive(2), or the noiseless kernel matrix.
Simulation simulate(const SimulateInput& in, Seed seed);

// ---------------------------------------------------------------------------
// Commands. Each writes into cfg.output_dir and returns the written files.

struct CommandOutput {
  std::vector<std::filesystem::path> files;
  nlohmann::json summary;
};

CommandOutput cmd_simulate(const PipelineConfig& cfg);
CommandOutput cmd_embed(const PipelineConfig& cfg);
CommandOutput cmd_isomap(const PipelineConfig& cfg);
CommandOutput cmd_evaluate(const PipelineConfig& cfg);
/// simulate-or-load, embed, isomap, evaluate; then run.json with SHA-256
/// hashes of every artifact.
CommandOutput cmd_pipeline(const PipelineConfig& cfg);

/// Exit code for an exception: 2 validation/config, 3 data condition,
/// 4 non-convergence, 1 anything else.
int exit_code_for(const std::exception& e) noexcept;

std::string sha256_hex(const std::string& bytes);

/// Minimal SVG 1.1 scatter plot; `colour` values (optional) map to a
/// blue-red ramp.
std::string scatter_svg(const std::vector<double>& x, const std::vector<double>& y,
                        const std::vector<double>& colour, const std::string& title);

}  // namespace geolift

#endif  // GEOLIFT_PIPELINE_HPP

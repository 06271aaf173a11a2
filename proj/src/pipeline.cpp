#include "geolift/pipeline.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <unordered_map>
#include <unordered_set>

namespace geolift {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Parsed text yields unsigned for positive literals; built documents may
// hold signed values.
bool is_nonnegative_integer(const json& v) {
  return v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() >= 0);
}

// ---------------------------------------------------------------------------
// Strict JSON object reader: every key must be consumed.

class Reader {
 public:
  Reader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(label() + " must be a JSON object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  const json& raw(const std::string& key) {
    used_.insert(key);
    return j_.at(key);
  }

  template <typename T>
  T get(const std::string& key, T fallback) {
    if (!has(key)) return fallback;
    return as<T>(key);
  }

  template <typename T>
  T require(const std::string& key) {
    if (!has(key)) throw ConfigError("missing required key '" + path(key) + "'");
    return as<T>(key);
  }

  Index count(const std::string& key, Index fallback) {
    if (!has(key)) return fallback;
    const json& v = raw(key);
    if (!is_nonnegative_integer(v)) {
      throw ConfigError("'" + path(key) + "' must be a nonnegative integer");
    }
    return v.get<Index>();
  }

  std::string path(const std::string& key) const { return where_.empty() ? key : where_ + "." + key; }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      (void)value;
      if (!used_.count(key)) throw ConfigError("unknown key '" + path(key) + "'");
    }
  }

 private:
  std::string label() const { return where_.empty() ? "config" : "'" + where_ + "'"; }

  template <typename T>
  T as(const std::string& key) {
    const json& v = raw(key);
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError("'" + path(key) + "' must be a boolean");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError("'" + path(key) + "' must be a string");
    } else if constexpr (std::is_arithmetic_v<T>) {
      if (!v.is_number()) throw ConfigError("'" + path(key) + "' must be a number");
    }
    try {
      return v.get<T>();
    } catch (const json::exception& e) {
      throw ConfigError("'" + path(key) + "': " + e.what());
    }
  }

  const json& j_;
  std::string where_;
  std::set<std::string> used_;
};

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return (path.is_absolute() ? path : base / path).lexically_normal();
}

std::optional<fs::path> opt_path(Reader& r, const std::string& key, const fs::path& base) {
  if (!r.has(key)) return std::nullopt;
  return resolve(base, r.require<std::string>(key));
}

ColumnRef column_ref(const json& j, const std::string& where, const fs::path& base) {
  Reader r(j, where);
  ColumnRef c{resolve(base, r.require<std::string>("path")), r.require<std::string>("column")};
  r.finish();
  return c;
}

InputSpec parse_input(const json& j, const fs::path& base) {
  if (!j.is_object() || j.size() != 1) {
    throw ConfigError("'input' must be an object with exactly one of: simulate, edge_list, "
                      "dense_matrix, time_series, points");
  }
  const auto& [kind, body] = *j.items().begin();
  const std::string where = "input." + kind;
  if (kind == "simulate") {
    Reader r(body, where);
    SimulateInput s;
    s.kernel = r.raw("kernel");
    (void)kernel_from_json(s.kernel);  // validates eagerly
    s.n = r.count("n", 0);
    if (s.n < 1) throw ConfigError("'" + where + ".n' must be at least 1");
    const auto latent = r.get<std::string>("latent", "grid");
    if (latent == "grid") {
      s.latent = SimulateInput::Latent::grid;
    } else if (latent == "uniform") {
      s.latent = SimulateInput::Latent::uniform;
    } else {
      throw ConfigError("'" + where + ".latent' must be 'grid' or 'uniform'");
    }
    const auto noise = r.get<std::string>("noise", "bernoulli");
    if (noise != "bernoulli" && noise != "none") {
      throw ConfigError("'" + where + ".noise' must be 'bernoulli' or 'none'");
    }
    s.bernoulli = noise == "bernoulli";
    r.finish();
    return s;
  }
  if (kind == "edge_list") {
    Reader r(body, where);
    EdgeListInput e;
    e.path = resolve(base, r.require<std::string>("path"));
    const auto policy = r.get<std::string>("policy", "union");
    if (policy == "union") {
      e.policy = EdgePolicy::symmetrize_union;
    } else if (policy == "error") {
      e.policy = EdgePolicy::symmetrize_error;
    } else {
      throw ConfigError("'" + where + ".policy' must be 'union' or 'error'");
    }
    e.vertices = opt_path(r, "vertices", base);
    r.finish();
    return e;
  }
  if (kind == "dense_matrix") {
    Reader r(body, where);
    DenseMatrixInput d;
    d.path = resolve(base, r.require<std::string>("path"));
    if (r.has("kind")) {
      const auto k = r.require<std::string>("kind");
      if (k == "adjacency") d.kind = MatrixKind::adjacency;
      else if (k == "correlation") d.kind = MatrixKind::correlation;
      else if (k == "generic") d.kind = MatrixKind::generic;
      else throw ConfigError("'" + where + ".kind' must be adjacency, correlation or generic");
    }
    r.finish();
    return d;
  }
  if (kind == "time_series" || kind == "points") {
    Reader r(body, where);
    const auto p = resolve(base, r.require<std::string>("path"));
    r.finish();
    if (kind == "points") return PointsInput{p};
    return TimeSeriesInput{p};
  }
  throw ConfigError("unknown input kind '" + kind + "'");
}

SpectralConfig parse_spectral(const json& j) {
  Reader r(j, "spectral");
  SpectralConfig s;
  if (r.has("p")) {
    const json& p = r.raw("p");
    if (p.is_string() && p.get<std::string>() == "auto") {
      s.p = std::nullopt;
    } else if (is_nonnegative_integer(p)) {
      s.p = p.get<Index>();
      if (*s.p < 1) throw ConfigError("'spectral.p' must be at least 1");
    } else {
      throw ConfigError("'spectral.p' must be a positive integer or \"auto\"");
    }
  } else {
    s.p = std::nullopt;
  }
  s.max_p = r.count("max_p", s.max_p);
  s.rank_elbow = r.count("rank_elbow", s.rank_elbow);
  s.degree_correct = r.get<bool>("degree_correct", false);
  r.finish();
  if (s.max_p < 1) throw ConfigError("'spectral.max_p' must be at least 1");
  if (s.rank_elbow < 1) throw ConfigError("'spectral.rank_elbow' must be at least 1");
  return s;
}

IsomapStage parse_isomap(const json& j, const fs::path& base) {
  Reader r(j, "isomap");
  IsomapStage s;
  auto& c = s.config;
  const auto rule = r.get<std::string>("rule", "epsilon_auto");
  if (rule == "epsilon_auto") c.rule = IsomapConfig::Rule::epsilon_auto;
  else if (rule == "epsilon") c.rule = IsomapConfig::Rule::epsilon;
  else if (rule == "epsilon_quantile") c.rule = IsomapConfig::Rule::epsilon_quantile;
  else if (rule == "knn") c.rule = IsomapConfig::Rule::knn;
  else throw ConfigError("'isomap.rule' must be epsilon_auto, epsilon, epsilon_quantile or knn");
  if (c.rule == IsomapConfig::Rule::epsilon && !r.has("epsilon")) {
    throw ConfigError("'isomap.epsilon' is required for rule 'epsilon'");
  }
  c.epsilon = r.get<double>("epsilon", c.epsilon);
  c.quantile = r.get<double>("quantile", c.quantile);
  c.k = r.count("k", c.k);
  if (r.has("d")) {
    const json& d = r.raw("d");
    if (d.is_string() && d.get<std::string>() == "auto") {
      c.d = std::nullopt;
    } else if (is_nonnegative_integer(d)) {
      c.d = d.get<Index>();
    } else {
      throw ConfigError("'isomap.d' must be a positive integer or \"auto\"");
    }
  }
  c.max_d = r.count("max_d", c.max_d);
  c.spectrum_size = r.count("spectrum_size", c.spectrum_size);
  const auto policy = r.get<std::string>("component_policy", "require_connected");
  if (policy == "require_connected") c.component_policy = IsomapConfig::ComponentPolicy::require_connected;
  else if (policy == "largest_component") c.component_policy = IsomapConfig::ComponentPolicy::largest_component;
  else throw ConfigError("'isomap.component_policy' must be require_connected or largest_component");
  s.input = opt_path(r, "input", base);
  s.write_geodesics = r.get<bool>("write_geodesics", false);
  s.scatter = r.get<bool>("scatter", true);
  if (r.has("covariate")) s.covariate = column_ref(r.raw("covariate"), "isomap.covariate", base);
  r.finish();
  try {
    c.validate();
  } catch (const ValidationError& e) {
    throw ConfigError(std::string("isomap: ") + e.what());
  }
  return s;
}

EvaluationStage parse_evaluation(const json& j, const fs::path& base) {
  Reader r(j, "evaluation");
  EvaluationStage s;
  s.truth = opt_path(r, "truth", base);
  s.zhat = opt_path(r, "zhat", base);
  s.geodesics = opt_path(r, "geodesics", base);
  s.recovery = r.get<bool>("recovery", s.recovery);
  s.regression = r.get<bool>("regression", s.regression);
  if (r.has("monotonicity")) s.monotonicity = column_ref(r.raw("monotonicity"), "evaluation.monotonicity", base);
  if (r.has("emd")) {
    Reader e(r.raw("emd"), "evaluation.emd");
    EmdRequest req;
    req.path = resolve(base, e.require<std::string>("path"));
    req.column = e.get<std::string>("column", req.column);
    req.group_a = e.require<std::string>("group_a");
    req.group_b = e.require<std::string>("group_b");
    req.sample = e.count("sample", req.sample);
    req.reps = e.count("reps", req.reps);
    e.finish();
    if (req.sample < 1 || req.reps < 1) throw ConfigError("'evaluation.emd' sample and reps must be positive");
    s.emd = req;
  }
  s.pairs_max = r.count("pairs_max", s.pairs_max);
  r.finish();
  return s;
}

std::string kind_name(MatrixKind k) { return std::string(to_string(k)); }

std::string rule_name(IsomapConfig::Rule r) {
  switch (r) {
    case IsomapConfig::Rule::epsilon_auto: return "epsilon_auto";
    case IsomapConfig::Rule::epsilon: return "epsilon";
    case IsomapConfig::Rule::epsilon_quantile: return "epsilon_quantile";
    case IsomapConfig::Rule::knn: return "knn";
  }
  return "";
}

}  // namespace

PipelineConfig PipelineConfig::from_json(const json& j, const fs::path& base_dir) {
  Reader r(j, "");
  PipelineConfig c;
  if (!r.has("input")) throw ConfigError("missing required key 'input'");
  c.input = parse_input(r.raw("input"), base_dir);
  if (r.has("spectral")) c.spectral = parse_spectral(r.raw("spectral"));
  else c.spectral = parse_spectral(json::object());
  if (r.has("isomap")) c.isomap = parse_isomap(r.raw("isomap"), base_dir);
  if (r.has("evaluation")) c.evaluation = parse_evaluation(r.raw("evaluation"), base_dir);
  if (r.has("seed")) {
    const json& s = r.raw("seed");
    if (!is_nonnegative_integer(s)) throw ConfigError("'seed' must be a nonnegative integer");
    c.seed = Seed{s.get<std::uint64_t>()};
  }
  c.output_dir = resolve(base_dir, r.get<std::string>("output_dir", "out"));
  r.finish();
  return c;
}

PipelineConfig PipelineConfig::load(const fs::path& path) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  const fs::path base = path.has_parent_path() ? path.parent_path() : fs::path(".");
  return from_json(j, base);
}

json PipelineConfig::to_json() const {
  json j;
  j["seed"] = seed.value;
  j["output_dir"] = output_dir.generic_string();
  std::visit(
      [&](const auto& in) {
        using T = std::decay_t<decltype(in)>;
        if constexpr (std::is_same_v<T, SimulateInput>) {
          j["input"]["simulate"] = {{"kernel", in.kernel},
                                    {"n", in.n},
                                    {"latent", in.latent == SimulateInput::Latent::grid ? "grid" : "uniform"},
                                    {"noise", in.bernoulli ? "bernoulli" : "none"}};
        } else if constexpr (std::is_same_v<T, EdgeListInput>) {
          json e = {{"path", in.path.generic_string()},
                    {"policy", in.policy == EdgePolicy::symmetrize_union ? "union" : "error"}};
          if (in.vertices) e["vertices"] = in.vertices->generic_string();
          j["input"]["edge_list"] = e;
        } else if constexpr (std::is_same_v<T, DenseMatrixInput>) {
          json d = {{"path", in.path.generic_string()}};
          if (in.kind) d["kind"] = kind_name(*in.kind);
          j["input"]["dense_matrix"] = d;
        } else if constexpr (std::is_same_v<T, TimeSeriesInput>) {
          j["input"]["time_series"] = {{"path", in.path.generic_string()}};
        } else {
          j["input"]["points"] = {{"path", in.path.generic_string()}};
        }
      },
      input);
  j["spectral"] = {{"max_p", spectral.max_p},
                   {"rank_elbow", spectral.rank_elbow},
                   {"degree_correct", spectral.degree_correct}};
  if (spectral.p) j["spectral"]["p"] = *spectral.p;
  else j["spectral"]["p"] = "auto";
  const auto& ic = isomap.config;
  json iso = {{"rule", rule_name(ic.rule)},
              {"epsilon", ic.epsilon},
              {"quantile", ic.quantile},
              {"k", ic.k},
              {"max_d", ic.max_d},
              {"spectrum_size", ic.spectrum_size},
              {"component_policy", ic.component_policy == IsomapConfig::ComponentPolicy::require_connected
                                       ? "require_connected"
                                       : "largest_component"},
              {"write_geodesics", isomap.write_geodesics},
              {"scatter", isomap.scatter}};
  if (ic.d) iso["d"] = *ic.d;
  else iso["d"] = "auto";
  if (isomap.input) iso["input"] = isomap.input->generic_string();
  if (isomap.covariate) {
    iso["covariate"] = {{"path", isomap.covariate->path.generic_string()}, {"column", isomap.covariate->column}};
  }
  j["isomap"] = iso;
  json ev = {{"recovery", evaluation.recovery},
             {"regression", evaluation.regression},
             {"pairs_max", evaluation.pairs_max}};
  if (evaluation.truth) ev["truth"] = evaluation.truth->generic_string();
  if (evaluation.zhat) ev["zhat"] = evaluation.zhat->generic_string();
  if (evaluation.geodesics) ev["geodesics"] = evaluation.geodesics->generic_string();
  if (evaluation.monotonicity) {
    ev["monotonicity"] = {{"path", evaluation.monotonicity->path.generic_string()},
                          {"column", evaluation.monotonicity->column}};
  }
  if (evaluation.emd) {
    const auto& e = *evaluation.emd;
    ev["emd"] = {{"path", e.path.generic_string()}, {"column", e.column}, {"group_a", e.group_a},
                 {"group_b", e.group_b}, {"sample", e.sample}, {"reps", e.reps}};
  }
  j["evaluation"] = ev;
  return j;
}

// ---------------------------------------------------------------------------
// Shared helpers

int exit_code_for(const std::exception& e) noexcept {
  if (dynamic_cast<const ValidationError*>(&e)) return 2;
  if (dynamic_cast<const DataError*>(&e)) return 3;
  if (dynamic_cast<const ConvergenceError*>(&e)) return 4;
  return 1;
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 computation failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xf]);
  }
  return out;
}

std::string scatter_svg(const std::vector<double>& x, const std::vector<double>& y,
                        const std::vector<double>& colour, const std::string& title) {
  if (x.size() != y.size() || (!colour.empty() && colour.size() != x.size())) {
    throw DimensionError("scatter inputs differ in length");
  }
  const double size = 480.0, margin = 40.0;
  auto range = [](const std::vector<double>& v) {
    double lo = 0.0, hi = 1.0;
    if (!v.empty()) {
      lo = *std::min_element(v.begin(), v.end());
      hi = *std::max_element(v.begin(), v.end());
    }
    if (!(hi > lo)) {
      lo -= 0.5;
      hi += 0.5;
    }
    return std::pair{lo, hi};
  };
  const auto [x0, x1] = range(x);
  const auto [y0, y1] = range(y);
  const auto [c0, c1] = range(colour);
  const double span = size - 2.0 * margin;
  char buf[160];
  std::string out;
  out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"480\" height=\"480\" viewBox=\"0 0 480 480\">\n";
  out += "<rect width=\"480\" height=\"480\" fill=\"white\"/>\n";
  std::string escaped;
  for (char ch : title) {
    if (ch == '<') escaped += "&lt;";
    else if (ch == '>') escaped += "&gt;";
    else if (ch == '&') escaped += "&amp;";
    else escaped += ch;
  }
  out += "<text x=\"240\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">" + escaped + "</text>\n";
  std::snprintf(buf, sizeof buf, "<line x1=\"%.0f\" y1=\"%.0f\" x2=\"%.0f\" y2=\"%.0f\" stroke=\"black\"/>\n", margin,
                size - margin, size - margin, size - margin);
  out += buf;
  std::snprintf(buf, sizeof buf, "<line x1=\"%.0f\" y1=\"%.0f\" x2=\"%.0f\" y2=\"%.0f\" stroke=\"black\"/>\n", margin,
                margin, margin, size - margin);
  out += buf;
  for (const auto& [val, px, py, anchor] :
       {std::tuple{x0, margin, size - margin + 16, "start"}, std::tuple{x1, size - margin, size - margin + 16, "end"}}) {
    std::snprintf(buf, sizeof buf, "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"%s\" font-family=\"sans-serif\" font-size=\"10\">%.4g</text>\n",
                  px, py, anchor, val);
    out += buf;
  }
  for (const auto& [val, py] : {std::pair{y0, size - margin}, std::pair{y1, margin + 8.0}}) {
    std::snprintf(buf, sizeof buf, "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">%.4g</text>\n",
                  margin - 4.0, py, val);
    out += buf;
  }
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double px = margin + (x[i] - x0) / (x1 - x0) * span;
    const double py = size - margin - (y[i] - y0) / (y1 - y0) * span;
    int r = 40, g = 90, b = 200;
    if (!colour.empty()) {
      const double t = (colour[i] - c0) / (c1 - c0);
      r = static_cast<int>(std::lround(255.0 * t));
      g = 64;
      b = static_cast<int>(std::lround(255.0 * (1.0 - t)));
    }
    std::snprintf(buf, sizeof buf, "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"2.5\" fill=\"rgb(%d,%d,%d)\"/>\n", px, py, r, g, b);
    out += buf;
  }
  out += "</svg>\n";
  return out;
}

namespace {

std::vector<std::string> index_labels(Index n) {
  std::vector<std::string> labels;
  labels.reserve(n);
  for (Index i = 0; i < n; ++i) labels.push_back(std::to_string(i));
  return labels;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

/// Sorted linear indices of `k` distinct upper-triangle pairs (Floyd's
/// algorithm), or all of them when k >= total.
std::vector<Index> sample_pair_indices(Index total, Index k, Seed seed) {
  std::vector<Index> out;
  if (k >= total) {
    out.resize(total);
    for (Index i = 0; i < total; ++i) out[i] = i;
    return out;
  }
  Rng rng(seed);
  std::unordered_set<Index> chosen;
  for (Index j = total - k; j < total; ++j) {
    const Index t = rng.below(j + 1);
    if (!chosen.insert(t).second) chosen.insert(j);
  }
  out.assign(chosen.begin(), chosen.end());
  std::sort(out.begin(), out.end());
  return out;
}

/// Calls f(i, j) for each sampled pair, in increasing (i, j) order.
template <typename F>
void for_sampled_pairs(Index n, Index k, Seed seed, F&& f) {
  const Index total = n < 2 ? 0 : n * (n - 1) / 2;
  const auto picks = sample_pair_indices(total, k, seed);
  Index i = 0, row_start = 0;
  for (Index p : picks) {
    while (p >= row_start + (n - 1 - i)) {
      row_start += n - 1 - i;
      ++i;
    }
    f(i, i + 1 + (p - row_start));
  }
}

struct Loaded {
  std::optional<SimilarityMatrix> matrix;
  std::optional<PointCloud> points;  ///< PointsInput
  std::vector<std::string> labels;
  std::optional<PointCloud> truth;   ///< simulated latent positions
  json report = json::object();
};

Loaded load_input(const PipelineConfig& cfg) {
  Loaded out;
  std::visit(
      [&](const auto& in) {
        using T = std::decay_t<decltype(in)>;
        if constexpr (std::is_same_v<T, SimulateInput>) {
          auto sim = simulate(in, cfg.seed);
          out.labels = index_labels(sim.z.size());
          out.truth = std::move(sim.z);
          out.matrix = std::move(sim.a);
          out.report = {{"source", "simulate"}, {"kernel", sim.kernel.name()}};
        } else if constexpr (std::is_same_v<T, EdgeListInput>) {
          std::vector<std::string> order;
          if (in.vertices) order = load_points(*in.vertices).labels;
          auto e = load_edge_list(in.path, in.policy, order);
          out.labels = std::move(e.labels);
          out.matrix = std::move(e.matrix);
          out.report = {{"source", "edge_list"}, {"vertices", out.labels.size()},
                        {"self_loops_dropped", e.self_loops}, {"repeated_pairs", e.repeats},
                        {"weighted", e.weighted}};
        } else if constexpr (std::is_same_v<T, DenseMatrixInput>) {
          auto d = load_dense_matrix(in.path, in.kind);
          out.labels = std::move(d.labels);
          out.report = {{"source", "dense_matrix"}, {"n", out.labels.size()},
                        {"kind", kind_name(d.matrix.kind())}, {"header", d.had_header}};
          out.matrix = std::move(d.matrix);
        } else if constexpr (std::is_same_v<T, TimeSeriesInput>) {
          const auto table = load_time_series(in.path);
          auto dropped = drop_incomplete(table);
          out.labels = dropped.table.entities();
          out.matrix = correlation_matrix(dropped.table);
          out.report = {{"source", "time_series"},
                        {"entities", dropped.table.entities_count()},
                        {"timestamps", dropped.table.timestamps_count()},
                        {"dropped_entities", dropped.dropped_entities},
                        {"dropped_timestamps", dropped.dropped_timestamps}};
        } else {
          auto p = load_points(in.path);
          out.labels = std::move(p.labels);
          out.points = std::move(p.points);
          out.report = {{"source", "points"}, {"n", out.labels.size()}};
        }
      },
      cfg.input);
  return out;
}

struct Embedded {
  PointCloud x;
  std::vector<std::string> labels;
};

Embedded run_embed(const PipelineConfig& cfg, const Loaded& in, CommandOutput& out) {
  if (!in.matrix) throw ConfigError("the 'points' input has no similarity matrix to embed");
  const auto res = embed(*in.matrix, cfg.spectral);
  Embedded e;
  e.x = res.embedding;
  for (Index k : res.kept) e.labels.push_back(in.labels[k]);
  fs::create_directories(cfg.output_dir);

  const auto xp = cfg.output_dir / "X.csv";
  save_points(xp, e.x, e.labels, "x");
  std::string spec = "index,eigenvalue\n";
  for (std::size_t k = 0; k < res.spectrum.size(); ++k) {
    spec += std::to_string(k + 1) + "," + format_double(res.spectrum[k]) + "\n";
  }
  const auto sp = cfg.output_dir / "spectrum.csv";
  write_text_file(sp, spec);
  json rank = {{"p", res.p}, {"auto", res.p_auto}, {"max_p", cfg.spectral.max_p},
               {"rank_elbow", cfg.spectral.rank_elbow}, {"degree_correct", cfg.spectral.degree_correct},
               {"n", in.matrix->size()}, {"input", in.report}};
  if (res.spectrum.size() >= 2) {
    rank["elbows"] = select_rank_elbows(res.spectrum, cfg.spectral.max_p, std::max<Index>(cfg.spectral.rank_elbow, 2));
  }
  std::vector<std::string> dropped;
  for (Index k : res.dropped) dropped.push_back(in.labels[k]);
  rank["dropped"] = dropped;
  const auto rp = cfg.output_dir / "rank.json";
  write_text_file(rp, dump(rank));
  out.files.insert(out.files.end(), {xp, sp, rp});
  out.summary["embed"] = {{"p", res.p}, {"auto", res.p_auto}, {"rows", e.x.size()}};
  return e;
}

std::unordered_map<std::string, double> column_by_label(const ColumnRef& c) {
  std::unordered_map<std::string, double> m;
  for (auto& [label, v] : load_label_values(c.path, c.column)) m[label] = v;
  return m;
}

json quantile_summary(std::vector<double> v) {
  if (v.empty()) return nullptr;
  std::sort(v.begin(), v.end());
  auto q = [&](double p) {
    const double h = (static_cast<double>(v.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
  };
  return {{"min", v.front()}, {"q25", q(0.25)}, {"median", q(0.5)}, {"q75", q(0.75)}, {"max", v.back()}};
}

struct Isomapped {
  IsomapResult result;
  std::vector<std::string> labels;
};

Isomapped run_isomap(const PipelineConfig& cfg, const Embedded& e, CommandOutput& out) {
  IsomapConfig ic = cfg.isomap.config;
  Isomapped r{isomap(e.x, ic), {}};
  for (Index k : r.result.kept) r.labels.push_back(e.labels[k]);
  fs::create_directories(cfg.output_dir);
  const auto& dg = r.result.diagnostics;

  const auto zp = cfg.output_dir / "Zhat.csv";
  save_points(zp, r.result.embedding, r.labels, "z");
  out.files.push_back(zp);

  json diag = {{"rule", dg.rule}, {"edges", dg.edges}, {"component_sizes", dg.component_sizes},
               {"centered_spectrum", dg.centered_spectrum}, {"d", dg.d}, {"d_auto", dg.d_auto},
               {"cmds_deficiency", dg.cmds_deficiency}, {"n_input", e.x.size()},
               {"n_embedded", r.result.embedding.size()}};
  diag["epsilon"] = dg.epsilon ? json(*dg.epsilon) : json(nullptr);
  diag["quantile"] = dg.quantile ? json(*dg.quantile) : json(nullptr);
  diag["quantile_sampled"] = dg.quantile_sampled;
  diag["k"] = dg.k ? json(*dg.k) : json(nullptr);
  std::vector<std::string> dropped;
  for (Index k : dg.dropped) dropped.push_back(e.labels[k]);
  diag["dropped"] = dropped;
  std::vector<double> geo;
  const Index m = r.result.geodesics.size();
  for_sampled_pairs(m, 1'000'000, cfg.seed.derive(5), [&](Index i, Index j) {
    geo.push_back(r.result.geodesics(i, j));
  });
  diag["geodesic_quantiles"] = quantile_summary(std::move(geo));
  const auto dp = cfg.output_dir / "diagnostics.json";
  write_text_file(dp, dump(diag));
  out.files.push_back(dp);

  if (cfg.isomap.write_geodesics) {
    const auto gp = cfg.output_dir / "geodesics.csv";
    std::string text;
    for (Index i = 0; i < m; ++i) text += (i ? "," : "") + csv_escape(r.labels[i]);
    text += '\n';
    for (Index i = 0; i < m; ++i) {
      for (Index j = 0; j < m; ++j) {
        if (j) text += ',';
        text += format_double(r.result.geodesics(i, j));
      }
      text += '\n';
    }
    write_text_file(gp, text);
    out.files.push_back(gp);
  }
  if (cfg.isomap.scatter) {
    const Matrix& z = r.result.embedding.coords();
    std::vector<double> xs, ys, col;
    std::optional<std::unordered_map<std::string, double>> cov;
    if (cfg.isomap.covariate) cov = column_by_label(*cfg.isomap.covariate);
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
      xs.push_back(z(i, 0));
      ys.push_back(z.cols() > 1 ? z(i, 1) : static_cast<double>(i));
      if (cov) {
        const auto it = cov->find(r.labels[static_cast<Index>(i)]);
        if (it == cov->end()) throw DataError("covariate has no value for label '" + r.labels[static_cast<Index>(i)] + "'");
        col.push_back(it->second);
      }
    }
    const auto svg = cfg.output_dir / "scatter.svg";
    write_text_file(svg, scatter_svg(xs, ys, col, z.cols() > 1 ? "Isomap embedding" : "Isomap coordinate by row"));
    out.files.push_back(svg);
  }
  out.summary["isomap"] = {{"d", dg.d}, {"epsilon", diag["epsilon"]}, {"n_embedded", r.result.embedding.size()}};
  return r;
}

DistanceMatrix load_geodesics(const fs::path& p, std::vector<std::string>& labels) {
  const CsvTable csv = read_csv(p);
  if (csv.rows.empty()) throw ValidationError("empty geodesics file " + p.string());
  labels = csv.rows[0];
  const Index n = labels.size();
  if (csv.rows.size() != n + 1) throw ValidationError("geodesics file is not square: " + p.string());
  Matrix d(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (Index i = 0; i < n; ++i) {
    if (csv.rows[i + 1].size() != n) throw ValidationError("geodesics file is not square: " + p.string());
    for (Index j = 0; j < n; ++j) {
      const auto v = parse_double(csv.rows[i + 1][j]);
      if (!v) throw ValidationError("geodesics file has a non-numeric entry: " + p.string());
      d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = *v;
    }
  }
  return DistanceMatrix(std::move(d));
}

void run_evaluate(const PipelineConfig& cfg, const PointCloud& zhat, const std::vector<std::string>& labels,
                  const std::optional<PointCloud>& truth_in, const std::optional<DistanceMatrix>& geodesics,
                  CommandOutput& out) {
  const auto& ev = cfg.evaluation;
  fs::create_directories(cfg.output_dir);
  json metrics = json::object();
  metrics["n"] = zhat.size();

  // Truth aligned to the Zhat rows.
  std::optional<PointCloud> truth;
  if (truth_in || ev.truth) {
    LabeledPoints t;
    if (ev.truth) {
      if (!fs::exists(*ev.truth)) throw ValidationError("truth file not found: " + ev.truth->string());
      t = load_points(*ev.truth);
    } else {
      t.points = *truth_in;
      t.labels = index_labels(truth_in->size());
    }
    std::unordered_map<std::string, Index> at;
    for (Index i = 0; i < t.labels.size(); ++i) at[t.labels[i]] = i;
    std::vector<Index> rows;
    for (const auto& l : labels) {
      const auto it = at.find(l);
      if (it == at.end()) throw DataError("truth file has no row for label '" + l + "'");
      rows.push_back(it->second);
    }
    truth = t.points.select_rows(rows);
  }

  if (ev.recovery && truth) {
    if (truth->dim() != zhat.dim()) {
      metrics["recovery_error"] = nullptr;
      metrics["recovery_note"] = "embedding dimension differs from truth dimension";
    } else {
      const auto a = procrustes_align(zhat, *truth);
      metrics["recovery_error"] = a.residual_rms;
      metrics["procrustes_scale"] = a.scale;
    }
  }

  if (ev.regression) {
    if (!truth) throw ValidationError("regression requested but no truth positions are available");
    if (!geodesics) throw ValidationError("regression requested but no geodesic distances are available "
                                          "(enable isomap.write_geodesics or set evaluation.geodesics)");
    const auto dz = DistanceMatrix::euclidean(*truth);
    const auto reg = geodesic_regression(*geodesics, dz);
    metrics["regression"] = {{"slope", reg.slope}, {"r2", reg.r2}, {"pairs", reg.pairs}, {"excluded", reg.excluded}};
    std::string text = "label_i,label_j,d_z,d_hat\n";
    for_sampled_pairs(dz.size(), ev.pairs_max, cfg.seed.derive(3), [&](Index i, Index j) {
      text += csv_escape(labels[i]) + "," + csv_escape(labels[j]) + "," + format_double(dz(i, j)) + "," +
              format_double((*geodesics)(i, j)) + "\n";
    });
    const auto pp = cfg.output_dir / "pairs.csv";
    write_text_file(pp, text);
    out.files.push_back(pp);
  }

  if (ev.monotonicity) {
    const auto cov = column_by_label(*ev.monotonicity);
    std::vector<double> a, b;
    for (Index i = 0; i < labels.size(); ++i) {
      const auto it = cov.find(labels[i]);
      if (it == cov.end()) continue;
      a.push_back(zhat.coords()(static_cast<Eigen::Index>(i), 0));
      b.push_back(it->second);
    }
    metrics["monotonicity"] = {{"spearman", monotonicity_diagnostic(a, b)}, {"n", a.size()},
                               {"column", ev.monotonicity->column}};
  }

  if (ev.emd) {
    if (!geodesics) throw ValidationError("EMD requested but no geodesic distances are available");
    const auto& req = *ev.emd;
    std::unordered_map<std::string, Index> at;
    for (Index i = 0; i < labels.size(); ++i) at[labels[i]] = i;
    std::vector<Index> ga, gb;
    Index missing = 0;
    const CsvTable csv = read_csv(req.path);
    if (csv.rows.empty()) throw ValidationError("empty group file " + req.path.string());
    std::size_t col = 0;
    for (std::size_t c = 1; c < csv.rows[0].size(); ++c) {
      if (csv.rows[0][c] == req.column) col = c;
    }
    if (col == 0) throw ValidationError("column '" + req.column + "' not found in " + req.path.string());
    for (std::size_t r = 1; r < csv.rows.size(); ++r) {
      const auto& row = csv.rows[r];
      if (row.size() <= col) throw ValidationError(req.path.string() + ": short row");
      const auto it = at.find(row[0]);
      if (it == at.end()) {
        ++missing;
        continue;
      }
      if (row[col] == req.group_a) ga.push_back(it->second);
      if (row[col] == req.group_b) gb.push_back(it->second);
    }
    const auto emd = earth_mover_distance(*geodesics, ga, gb, req.sample, cfg.seed.derive(4), req.reps);
    metrics["emd"] = {{"mean", emd.mean}, {"stderr", emd.standard_error}, {"per_rep", emd.per_rep},
                      {"sample", req.sample}, {"reps", req.reps}, {"group_a", req.group_a},
                      {"group_b", req.group_b}, {"size_a", ga.size()}, {"size_b", gb.size()},
                      {"labels_not_embedded", missing}};
  }

  const auto mp = cfg.output_dir / "metrics.json";
  write_text_file(mp, dump(metrics));
  out.files.push_back(mp);
  out.summary["evaluate"] = metrics;
}

Embedded read_embedding(const PipelineConfig& cfg) {
  fs::path p;
  if (cfg.isomap.input) p = *cfg.isomap.input;
  else if (const auto* pts = std::get_if<PointsInput>(&cfg.input)) p = pts->path;
  else p = cfg.output_dir / "X.csv";
  if (!fs::exists(p)) throw ValidationError("isomap input not found: " + p.string() + " (run embed first)");
  auto lp = load_points(p);
  return Embedded{std::move(lp.points), std::move(lp.labels)};
}

}  // namespace

Simulation simulate(const SimulateInput& in, Seed seed) {
  KernelModel kernel = kernel_from_json(in.kernel);
  PointCloud z;
  if (in.latent == SimulateInput::Latent::grid) {
    const auto* box = std::get_if<BoxDomain>(&kernel.domain());
    if (!box) throw ConfigError("grid latent positions need a box domain; use latent 'uniform'");
    z = sample_latent_grid(*box, in.n);
  } else {
    z = sample_latent_uniform(kernel.domain(), in.n, seed.derive(1));
  }
  SimilarityMatrix a = in.bernoulli ? sample_adjacency(kernel, z, seed.derive(2)) : kernel_matrix(kernel, z);
  return Simulation{std::move(kernel), std::move(z), std::move(a)};
}

CommandOutput cmd_simulate(const PipelineConfig& cfg) {
  const auto* in = std::get_if<SimulateInput>(&cfg.input);
  if (!in) throw ConfigError("simulate needs an 'input.simulate' section");
  const auto sim = simulate(*in, cfg.seed);
  fs::create_directories(cfg.output_dir);
  CommandOutput out;
  const auto labels = index_labels(sim.z.size());
  const auto zp = cfg.output_dir / "Z.csv";
  save_points(zp, sim.z, labels, "z");
  const auto ap = cfg.output_dir / (in->bernoulli ? "A.edges" : "A.csv");
  if (in->bernoulli) save_edge_list(ap, sim.a, labels);
  else save_dense_matrix(ap, sim.a, labels);
  json meta = {{"kernel", in->kernel}, {"kernel_name", sim.kernel.name()}, {"n", in->n},
               {"rho", sim.kernel.rho()}, {"seed", cfg.seed.value},
               {"latent", in->latent == SimulateInput::Latent::grid ? "grid" : "uniform"},
               {"noise", in->bernoulli ? "bernoulli" : "none"},
               {"matrix_file", ap.filename().string()}, {"edges", sim.a.nonzeros_upper()}};
  const auto mp = cfg.output_dir / "meta.json";
  write_text_file(mp, dump(meta));
  out.files = {zp, ap, mp};
  out.summary["simulate"] = meta;
  return out;
}

CommandOutput cmd_embed(const PipelineConfig& cfg) {
  CommandOutput out;
  const auto in = load_input(cfg);
  run_embed(cfg, in, out);
  return out;
}

CommandOutput cmd_isomap(const PipelineConfig& cfg) {
  CommandOutput out;
  run_isomap(cfg, read_embedding(cfg), out);
  return out;
}

CommandOutput cmd_evaluate(const PipelineConfig& cfg) {
  CommandOutput out;
  const fs::path zp = cfg.evaluation.zhat ? *cfg.evaluation.zhat : cfg.output_dir / "Zhat.csv";
  if (!fs::exists(zp)) throw ValidationError("embedding file not found: " + zp.string() + " (run isomap first)");
  const auto zhat = load_points(zp);

  std::optional<PointCloud> truth;
  if (!cfg.evaluation.truth && std::holds_alternative<SimulateInput>(cfg.input)) {
    const auto tp = cfg.output_dir / "Z.csv";
    if (fs::exists(tp)) {
      auto t = load_points(tp);
      // Simulated labels are row indices.
      truth = std::move(t.points);
    }
  }
  std::optional<DistanceMatrix> geo;
  const fs::path gp = cfg.evaluation.geodesics ? *cfg.evaluation.geodesics : cfg.output_dir / "geodesics.csv";
  if (fs::exists(gp)) {
    std::vector<std::string> glabels;
    geo = load_geodesics(gp, glabels);
    if (glabels != zhat.labels) throw DataError("geodesics labels do not match the embedding labels");
  } else if (cfg.evaluation.geodesics) {
    throw ValidationError("geodesics file not found: " + gp.string());
  }
  run_evaluate(cfg, zhat.points, zhat.labels, truth, geo, out);
  return out;
}

CommandOutput cmd_pipeline(const PipelineConfig& cfg) {
  CommandOutput out;
  if (std::holds_alternative<SimulateInput>(cfg.input)) {
    auto sim = cmd_simulate(cfg);
    out.files = sim.files;
    out.summary = sim.summary;
  }
  const auto in = load_input(cfg);
  Embedded e;
  if (in.points) {
    e = Embedded{*in.points, in.labels};
  } else {
    e = run_embed(cfg, in, out);
  }
  const auto iso = run_isomap(cfg, e, out);
  run_evaluate(cfg, iso.result.embedding, iso.labels, in.truth, iso.result.geodesics, out);

  json run = {{"config", cfg.to_json()}, {"summary", out.summary}};
  json hashes = json::object();
  for (const auto& f : out.files) hashes[f.filename().string()] = sha256_hex(read_text_file(f));
  run["artifacts"] = hashes;
  const auto rp = cfg.output_dir / "run.json";
  write_text_file(rp, dump(run));
  out.files.push_back(rp);
  return out;
}

}  // namespace geolift

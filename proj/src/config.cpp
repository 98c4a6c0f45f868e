#include "ticopd/config.hpp"

#include <fstream>
#include <set>

#include "ticopd/rng.hpp"

namespace ticopd {

using nlohmann::json;

namespace {

/// Rejects keys outside `allowed`; typos in a config are otherwise silent.
void only_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, _] : obj.items())
    if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
}

/// Reads obj[key] as T, storing `fallback` when absent so the resolved
/// document records every default.
template <typename T>
T take(json& obj, const std::string& key, const T& fallback, const std::string& where) {
  if (!obj.contains(key)) {
    obj[key] = fallback;
    return fallback;
  }
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("bad value for '" + key + "' in " + where);
  }
}

template <typename T>
T require(const json& obj, const std::string& key, const std::string& where) {
  if (!obj.contains(key)) throw ConfigError("missing '" + key + "' in " + where);
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("bad value for '" + key + "' in " + where);
  }
}

std::size_t take_count(json& obj, const std::string& key, std::size_t fallback,
                       const std::string& where) {
  if (obj.contains(key) && !(obj.at(key).is_number_integer() && obj.at(key).get<std::int64_t>() >= 0))
    throw ConfigError("'" + key + "' in " + where + " must be a non-negative integer");
  return take<std::size_t>(obj, key, fallback, where);
}

json resolve_compressor(json c) {
  if (c.is_string()) c = json{{"kind", c}};
  only_keys(c, {"kind", "s", "k"}, "compressor");
  const auto kind = take<std::string>(c, "kind", "identity", "compressor");
  try {
    switch (parse_compressor_kind(kind)) {
      case CompressorKind::Qsgd:
        if (take<int>(c, "s", 4, "compressor") < 1) throw ConfigError("qsgd needs s >= 1");
        break;
      case CompressorKind::TopK:
      case CompressorKind::RandK:
        if (require<std::size_t>(c, "k", "compressor") < 1) throw ConfigError(kind + " needs k >= 1");
        break;
      case CompressorKind::Identity: break;
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return c;
}

json resolve_graph(json g, std::uint64_t seed) {
  only_keys(g, {"kind", "n", "p", "seed"}, "graph");
  const auto kind = take<std::string>(g, "kind", "ring", "graph");
  take_count(g, "n", 10, "graph");
  try {
    if (parse_graph_kind(kind) == GraphKind::ErdosRenyi) {
      take<double>(g, "p", 0.5, "graph");
      take<std::uint64_t>(g, "seed", seed, "graph");
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return g;
}

json resolve_data(json d, std::uint64_t seed) {
  const std::string where = "objective.data";
  if (!d.is_object()) throw ConfigError(where + " must be an object");
  const auto source = take<std::string>(d, "source", "synthetic", where);
  if (source == "synthetic") {
    only_keys(d, {"source", "classes", "features", "per_class", "separation", "noise", "seed",
                  "test_per_class"},
              where);
    take<int>(d, "classes", 10, where);
    take_count(d, "features", 20, where);
    take_count(d, "per_class", 100, where);
    take<double>(d, "separation", 3.0, where);
    take<double>(d, "noise", 1.0, where);
    take<std::uint64_t>(d, "seed", seed, where);
    take_count(d, "test_per_class", 0, where);
  } else if (source == "idx") {
    only_keys(d, {"source", "images", "labels", "limit", "test_images", "test_labels",
                  "test_limit"},
              where);
    require<std::string>(d, "images", where);
    require<std::string>(d, "labels", where);
    take_count(d, "limit", 0, where);
    if (d.contains("test_images") != d.contains("test_labels"))
      throw ConfigError("test_images and test_labels go together in " + where);
    if (d.contains("test_images")) take_count(d, "test_limit", 0, where);
  } else {
    throw ConfigError("unknown data source: " + source);
  }
  return d;
}

json resolve_objective(json o, std::uint64_t seed) {
  if (o.is_string()) o = json{{"kind", o}};
  if (!o.is_object()) throw ConfigError("objective must be a string or an object");
  const auto kind = require<std::string>(o, "kind", "objective");
  if (kind == "quadratic") {
    only_keys(o, {"kind", "d", "spread", "seed", "centers"}, "objective");
    if (o.contains("centers")) {
      if (!o["centers"].is_array() || o["centers"].empty())
        throw ConfigError("objective.centers must be a non-empty list of vectors");
    } else {
      take_count(o, "d", 20, "objective");
      take<double>(o, "spread", 1.0, "objective");
      take<std::uint64_t>(o, "seed", seed, "objective");
    }
  } else if (kind == "least_squares") {
    only_keys(o, {"kind", "d", "rows", "noise", "heterogeneity", "seed"}, "objective");
    take_count(o, "d", 10, "objective");
    take_count(o, "rows", 20, "objective");
    take<double>(o, "noise", 0.1, "objective");
    take<double>(o, "heterogeneity", 1.0, "objective");
    take<std::uint64_t>(o, "seed", seed, "objective");
  } else if (kind == "logistic" || kind == "mlp") {
    std::set<std::string> keys{"kind", "data", "partition", "l2", "bias"};
    if (kind == "mlp") keys.insert({"hidden", "L"});
    only_keys(o, keys, "objective");
    o["data"] = resolve_data(o.value("data", json::object()), seed);
    const auto mode = take<std::string>(o, "partition", "label_sorted", "objective");
    try {
      parse_partition_mode(mode);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    take<double>(o, "l2", kind == "logistic" ? 1e-3 : 0.0, "objective");
    if (kind == "logistic") {
      take<bool>(o, "bias", true, "objective");
    } else {
      take_count(o, "hidden", 32, "objective");
      take<double>(o, "L", kDefaultMlpSmoothness, "objective");
    }
  } else {
    throw ConfigError("unknown objective: " + kind);
  }
  return o;
}

json resolve_run(json r, std::uint64_t seed, std::optional<std::size_t> stride, std::size_t index) {
  const std::string where = "run " + std::to_string(index);
  only_keys(r,
            {"name", "algorithm", "alpha_tilde", "theta", "eta", "gamma", "inner_steps", "stepsize",
             "gossip", "compressor", "T", "seed", "init", "init_scale", "lyapunov", "lyapunov_a",
             "stride"},
            where);
  const auto algo = take<std::string>(r, "algorithm", "ticopd", where);
  try {
    parse_algorithm_kind(algo);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  take<std::string>(r, "name", algo, where);
  take<double>(r, "alpha_tilde", 0.01, where);
  take<double>(r, "theta", 1.0, where);
  if (r.contains("eta") && !r["eta"].is_null()) require<double>(r, "eta", where);
  take<double>(r, "gamma", 1.0, where);
  take_count(r, "inner_steps", 1, where);
  take<double>(r, "stepsize", 0.01, where);
  take<double>(r, "gossip", 1.0, where);
  r["compressor"] = resolve_compressor(r.value("compressor", json{{"kind", "identity"}}));
  const auto T = take_count(r, "T", 1000, where);
  take<std::uint64_t>(r, "seed", seed, where);
  take<std::string>(r, "init", "zeros", where);
  take<double>(r, "init_scale", 1.0, where);
  take<bool>(r, "lyapunov", false, where);
  take<double>(r, "lyapunov_a", 1.0, where);
  if (stride) r["stride"] = *stride;
  take_count(r, "stride", default_stride(T), where);
  return r;
}

}  // namespace

json load_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

std::size_t default_stride(std::size_t T) { return T > 10000 ? 10 : 1; }

CompressorSpec parse_compressor(const json& entry) {
  const json c = resolve_compressor(entry);
  CompressorSpec spec;
  spec.kind = parse_compressor_kind(c.at("kind").get<std::string>());
  if (c.contains("s")) spec.s = c.at("s").get<int>();
  if (c.contains("k")) spec.k = c.at("k").get<std::size_t>();
  return spec;
}

GraphSpec parse_graph(const json& entry) {
  const json g = resolve_graph(entry, 0);
  GraphSpec spec;
  spec.kind = parse_graph_kind(g.at("kind").get<std::string>());
  spec.n = g.at("n").get<std::size_t>();
  if (g.contains("p")) spec.p = g.at("p").get<double>();
  if (g.contains("seed")) spec.seed = g.at("seed").get<std::uint64_t>();
  return spec;
}

AlgorithmConfig parse_algorithm(const json& entry, std::uint64_t default_seed) {
  const json r = resolve_run(entry, default_seed, std::nullopt, 0);
  AlgorithmConfig c;
  try {
    c.kind = parse_algorithm_kind(r.at("algorithm").get<std::string>());
    c.init = parse_init_mode(r.at("init").get<std::string>());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  c.alpha_tilde = r.at("alpha_tilde").get<double>();
  c.theta = r.at("theta").get<double>();
  if (r.contains("eta") && !r.at("eta").is_null()) c.eta = r.at("eta").get<double>();
  c.gamma = r.at("gamma").get<double>();
  c.inner_steps = r.at("inner_steps").get<std::size_t>();
  c.stepsize = r.at("stepsize").get<double>();
  c.gossip = r.at("gossip").get<double>();
  c.compressor = parse_compressor(r.at("compressor"));
  c.T = r.at("T").get<std::size_t>();
  c.seed = r.at("seed").get<std::uint64_t>();
  c.init_scale = r.at("init_scale").get<double>();
  c.lyapunov = r.at("lyapunov").get<bool>();
  c.lyapunov_a = r.at("lyapunov_a").get<double>();
  c.stride = r.at("stride").get<std::size_t>();
  if (c.stride < 1) throw ConfigError("stride must be >= 1");
  if (c.inner_steps < 1) throw ConfigError("inner_steps must be >= 1");
  if (!(c.gamma > 0 && c.gamma <= 1)) throw ConfigError("gamma must lie in (0, 1]");
  if (c.kind == AlgorithmKind::TiCoPD || c.kind == AlgorithmKind::ExactPD) {
    if (!(c.alpha_tilde > 0)) throw ConfigError("alpha_tilde must be positive");
    if (!(c.theta >= 0)) throw ConfigError("theta must be non-negative");
    if (c.eta && !(*c.eta > 0)) throw ConfigError("eta must be positive");
  } else if (!(c.stepsize > 0)) {
    throw ConfigError("stepsize must be positive");
  }
  return c;
}

ExperimentConfig parse_experiment(json doc, const ConfigOverrides& overrides) {
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  only_keys(doc,
            {"schema_version", "name", "seed", "graph", "objective", "runs", "algorithm", "stride",
             "out_dir", "threads", "grid"},
            "config");
  if (!doc.contains("schema_version")) throw ConfigError("missing schema_version");
  if (doc["schema_version"] != kSchemaVersion)
    throw ConfigError("unsupported schema_version " + doc["schema_version"].dump());
  if (overrides.seed) doc["seed"] = *overrides.seed;
  if (overrides.stride) doc["stride"] = *overrides.stride;
  if (overrides.out_dir) doc["out_dir"] = overrides.out_dir->string();
  if (overrides.threads) doc["threads"] = *overrides.threads;

  ExperimentConfig cfg;
  cfg.seed = take<std::uint64_t>(doc, "seed", 0, "config");
  cfg.out_dir = take<std::string>(doc, "out_dir", "out", "config");
  cfg.threads = take<int>(doc, "threads", 1, "config");
  if (cfg.threads < 1) throw ConfigError("threads must be >= 1");
  std::optional<std::size_t> stride;
  if (doc.contains("stride")) {
    stride = take_count(doc, "stride", 1, "config");
    if (*stride < 1) throw ConfigError("stride must be >= 1");
    cfg.stride_explicit = true;
    cfg.stride = *stride;
  }

  if (!doc.contains("graph")) throw ConfigError("missing graph");
  doc["graph"] = resolve_graph(doc["graph"], cfg.seed);
  if (!doc.contains("objective")) throw ConfigError("missing objective");
  doc["objective"] = resolve_objective(doc["objective"], cfg.seed);
  try {
    cfg.graph = parse_graph(doc["graph"]);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  cfg.objective = doc["objective"]["kind"].get<std::string>();
  cfg.problem = doc["objective"];

  if (doc.contains("algorithm") == doc.contains("runs"))
    throw ConfigError("give exactly one of 'algorithm' or 'runs'");
  if (doc.contains("algorithm")) {
    doc["runs"] = json::array({doc["algorithm"]});
    doc.erase("algorithm");
  }
  if (!doc["runs"].is_array() || doc["runs"].empty()) throw ConfigError("runs must be a non-empty list");
  std::set<std::string> names;
  for (std::size_t k = 0; k < doc["runs"].size(); ++k) {
    json r = resolve_run(doc["runs"][k], cfg.seed, stride, k);
    doc["runs"][k] = r;
    RunSpec spec;
    spec.name = r["name"].get<std::string>();
    if (spec.name.empty() || spec.name.find_first_of("/\\") != std::string::npos)
      throw ConfigError("run name must be a plain file name: '" + spec.name + "'");
    if (!names.insert(spec.name).second) throw ConfigError("duplicate run name " + spec.name);
    spec.algorithm = parse_algorithm(r, cfg.seed);
    spec.algorithm.threads = cfg.threads;
    spec.snapshot = r;
    cfg.runs.push_back(std::move(spec));
  }
  if (doc.contains("grid")) cfg.grid = doc["grid"];
  cfg.resolved = doc;
  return cfg;
}

ExperimentConfig load_experiment(const std::filesystem::path& path, const ConfigOverrides& overrides) {
  return parse_experiment(load_json(path), overrides);
}

namespace {

Dataset load_dataset(const json& d, bool test) {
  if (d.at("source") == "synthetic") {
    const auto per = test ? d.at("test_per_class").get<std::size_t>() : d.at("per_class").get<std::size_t>();
    return make_gaussian_classes(d.at("classes").get<int>(), d.at("features").get<std::size_t>(), per,
                                 d.at("separation").get<double>(), d.at("noise").get<double>(),
                                 d.at("seed").get<std::uint64_t>(), test ? 1 : 0);
  }
  if (test)
    return load_idx(d.at("test_images").get<std::string>(), d.at("test_labels").get<std::string>(),
                    d.at("test_limit").get<std::size_t>());
  return load_idx(d.at("images").get<std::string>(), d.at("labels").get<std::string>(),
                  d.at("limit").get<std::size_t>());
}

bool has_test_split(const json& d) {
  if (d.at("source") == "synthetic") return d.at("test_per_class").get<std::size_t>() > 0;
  return d.contains("test_images");
}

std::unique_ptr<Objective> build_quadratic(const json& o, std::size_t n) {
  if (o.contains("centers")) {
    const auto& rows = o.at("centers");
    if (rows.size() != n) throw ConfigError("objective.centers needs one vector per agent");
    const auto d = rows.at(0).size();
    Eigen::MatrixXd C(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      if (rows.at(i).size() != d) throw ConfigError("objective.centers rows differ in length");
      for (std::size_t r = 0; r < d; ++r)
        C(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(i)) = rows.at(i).at(r).get<double>();
    }
    return quadratic_consensus(std::move(C));
  }
  const auto d = o.at("d").get<std::size_t>();
  const double spread = o.at("spread").get<double>();
  const auto seed = o.at("seed").get<std::uint64_t>();
  Eigen::MatrixXd C(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    RngStream rng(seed, i, 0, Purpose::DataGeneration, 0);
    for (std::size_t r = 0; r < d; ++r)
      C(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(i)) = spread * rng.normal();
  }
  return quadratic_consensus(std::move(C));
}

/// A_i Gaussian; b_i = A_i (x0 + h z_i) + noise e_i, so agents disagree on
/// their local minimizers by roughly `heterogeneity`.
std::unique_ptr<Objective> build_least_squares(const json& o, std::size_t n) {
  const auto d = static_cast<Eigen::Index>(o.at("d").get<std::size_t>());
  const auto m = static_cast<Eigen::Index>(o.at("rows").get<std::size_t>());
  const double noise = o.at("noise").get<double>();
  const double h = o.at("heterogeneity").get<double>();
  const auto seed = o.at("seed").get<std::uint64_t>();
  RngStream shared(seed, 0, 0, Purpose::DataGeneration, 0);
  Eigen::VectorXd x0(d);
  for (Eigen::Index r = 0; r < d; ++r) x0(r) = shared.normal();
  std::vector<Eigen::MatrixXd> A;
  std::vector<Eigen::VectorXd> b;
  for (std::size_t i = 0; i < n; ++i) {
    RngStream rng(seed, i, 0, Purpose::DataGeneration, 1);
    Eigen::MatrixXd Ai(m, d);
    for (Eigen::Index c = 0; c < d; ++c)
      for (Eigen::Index r = 0; r < m; ++r) Ai(r, c) = rng.normal() / std::sqrt(static_cast<double>(m));
    Eigen::VectorXd xi = x0;
    for (Eigen::Index r = 0; r < d; ++r) xi(r) += h * rng.normal();
    Eigen::VectorXd bi = Ai * xi;
    for (Eigen::Index r = 0; r < m; ++r) bi(r) += noise * rng.normal();
    A.push_back(std::move(Ai));
    b.push_back(std::move(bi));
  }
  return least_squares(std::move(A), std::move(b));
}

}  // namespace

Problem build_problem(const GraphSpec& graph, const std::string& objective, const json& params) {
  Problem p;
  try {
    p.graph = std::make_unique<Graph>(build_graph(graph));
  } catch (const std::exception& e) {
    throw ConfigError(std::string("graph: ") + e.what());
  }
  const std::size_t n = graph.n;
  try {
    if (objective == "quadratic") {
      p.objective = build_quadratic(params, n);
    } else if (objective == "least_squares") {
      p.objective = build_least_squares(params, n);
    } else {
      const json& d = params.at("data");
      Dataset data = load_dataset(d, false);
      std::optional<Dataset> test;
      if (has_test_split(d)) test = load_dataset(d, true);
      const auto mode = parse_partition_mode(params.at("partition").get<std::string>());
      const auto seed = d.contains("seed") ? d.at("seed").get<std::uint64_t>() : std::uint64_t{0};
      const auto part = partition_by_label(data.labels, n, mode, seed);
      const double l2 = params.at("l2").get<double>();
      if (objective == "logistic") {
        if (params.at("bias").get<bool>()) {
          data = with_bias_feature(data);
          if (test) test = with_bias_feature(*test);
        }
        p.objective = logistic_regression(data, part, l2);
      } else {
        MlpShape shape{data.feature_dim(), params.at("hidden").get<std::size_t>(),
                       static_cast<std::size_t>(data.num_classes)};
        p.objective = std::make_unique<TwoLayerMlp>(shape, data, part, params.at("L").get<double>(), l2);
      }
      p.test = std::move(test);
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("objective: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("objective: ") + e.what());
  }
  return p;
}

Problem build_problem(const ExperimentConfig& config) {
  return build_problem(config.graph, config.objective, config.problem);
}

std::string json_hash(const json& value) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : value.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  static const char* hex = "0123456789abcdef";
  std::string out(16, '0');
  for (int k = 15; k >= 0; --k, h >>= 4) out[static_cast<std::size_t>(k)] = hex[h & 0xF];
  return out;
}

std::string problem_hash(const ExperimentConfig& config) {
  return json_hash(json{{"graph", config.resolved.at("graph")}, {"objective", config.problem}});
}

}  // namespace ticopd

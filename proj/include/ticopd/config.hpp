#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "ticopd/algorithms.hpp"
#include "ticopd/dataset.hpp"
#include "ticopd/objectives.hpp"
#include "ticopd/topology.hpp"

namespace ticopd {

inline constexpr int kSchemaVersion = 1;

/// Raised for anything wrong with a configuration document.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunSpec {
  std::string name;
  AlgorithmConfig algorithm;
  nlohmann::json snapshot;  // fully resolved run entry
};

/// A parsed experiment. `problem` keeps the objective section as written
/// (with defaults filled) so it can be hashed and rebuilt.
struct ExperimentConfig {
  GraphSpec graph;
  std::string objective;
  nlohmann::json problem;
  std::vector<RunSpec> runs;
  std::size_t stride = 1;
  bool stride_explicit = false;
  std::filesystem::path out_dir = "out";
  std::uint64_t seed = 0;
  int threads = 1;
  nlohmann::json grid;  // sweep grid, may be null
  nlohmann::json resolved;  // whole config with defaults filled
};

/// Overrides applied on top of a config document before parsing.
struct ConfigOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> stride;
  std::optional<std::filesystem::path> out_dir;
  std::optional<int> threads;
};

nlohmann::json load_json(const std::filesystem::path& path);

/// Parses and validates a config document. Throws ConfigError.
ExperimentConfig parse_experiment(nlohmann::json doc, const ConfigOverrides& overrides = {});
ExperimentConfig load_experiment(const std::filesystem::path& path,
                                 const ConfigOverrides& overrides = {});

/// Default metric stride for a run of T iterations.
std::size_t default_stride(std::size_t T);

AlgorithmConfig parse_algorithm(const nlohmann::json& entry, std::uint64_t default_seed);
CompressorSpec parse_compressor(const nlohmann::json& entry);
GraphSpec parse_graph(const nlohmann::json& entry);

/// Built problem instance shared by every run of an experiment.
struct Problem {
  std::unique_ptr<Graph> graph;
  std::unique_ptr<Objective> objective;
  std::optional<Dataset> test;
};

Problem build_problem(const GraphSpec& graph, const std::string& objective,
                      const nlohmann::json& params);
Problem build_problem(const ExperimentConfig& config);

/// 64-bit FNV-1a of a canonical JSON dump, as 16 hex digits.
std::string json_hash(const nlohmann::json& value);
/// Hash of the graph and objective sections only.
std::string problem_hash(const ExperimentConfig& config);

}  // namespace ticopd

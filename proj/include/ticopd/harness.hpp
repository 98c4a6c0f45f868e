#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ticopd/algorithms.hpp"
#include "ticopd/config.hpp"
#include "ticopd/diagnostics.hpp"

namespace ticopd {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;  // runtime error or failed check
inline constexpr int kExitConfig = 2;
inline constexpr int kExitDiverged = 3;

/// Environment variable that replaces the configured output directory.
inline constexpr const char* kOutDirEnv = "TICOPD_OUT_DIR";

inline constexpr const char* kCsvHeader =
    "t,loss_max,grad_norm_avg,consensus_err,bits_cum,lyapunov,test_acc";

struct RunRecord {
  std::string name;
  std::string algorithm;
  nlohmann::json config;  // standalone experiment config reproducing this run
  std::string config_hash;
  std::string problem_hash;
  RunStatus status = RunStatus::Completed;
  std::size_t diverged_at = 0;
  std::string message;
  std::vector<MetricsRow> rows;
};

std::string to_string(RunStatus status);

/// CSV text for `rows`, header included. Reals use %.17g so values
/// round-trip exactly; absent optional fields are left empty.
std::string csv_text(const std::vector<MetricsRow>& rows);
std::vector<MetricsRow> parse_csv(const std::string& text);
std::vector<MetricsRow> read_csv(const std::filesystem::path& path);

/// Writes through a temporary sibling and a rename.
void write_atomic(const std::filesystem::path& path, const std::string& content);

/// Hash of an experiment config, ignoring keys that cannot change results
/// (output directory, thread count, sweep grid).
std::string config_hash(const nlohmann::json& resolved);

/// Standalone config for one run of `config`.
nlohmann::json single_run_config(const ExperimentConfig& config, const RunSpec& run);

RunRecord execute_run(const ExperimentConfig& config, const Problem& problem, const RunSpec& run);

/// Record metadata without the rows; `csv` is the sibling CSV file name.
nlohmann::json record_json(const RunRecord& record, const std::string& csv);

/// Writes <name>.csv and <name>.json for each record plus manifest.json.
void write_outputs(const std::filesystem::path& dir, const ExperimentConfig& config,
                   const std::vector<RunRecord>& records, const nlohmann::json& extra = {});

/// Loads a record JSON (rows from its CSV).
RunRecord load_record(const std::filesystem::path& path);
/// Expands a manifest into its records, or loads a single record.
std::vector<RunRecord> load_records(const std::filesystem::path& path);

struct CliOptions {
  ConfigOverrides overrides;
  bool quiet = false;
};

int cli_run(const std::filesystem::path& config_path, const CliOptions& options, std::ostream& out,
            std::ostream& err);

/// One sweep cell: parameter values keyed by grid key.
struct SweepCell {
  std::string label;
  nlohmann::json values;
};

/// Cartesian product of a grid {"key": [v1, v2, ...], ...} in key order.
/// Throws ConfigError for an empty grid or a non-numeric key.
std::vector<SweepCell> expand_grid(const nlohmann::json& grid);

/// Applies a cell to a resolved run entry. Dotted keys reach into the
/// compressor ("compressor.s").
nlohmann::json apply_cell(nlohmann::json run, const SweepCell& cell);

struct SweepSummary {
  struct Best {
    std::string run;   // base run name
    std::string cell;  // label of the winning cell, empty if all diverged
    double grad_norm_avg = 0.0;
  };
  std::vector<Best> best;
};

/// Every grid cell applied to every base run. Diverged cells are kept and
/// marked; the best cell per base run minimizes the final grad_norm_avg.
SweepSummary summarize_sweep(const std::vector<std::string>& base_runs,
                             const std::vector<SweepCell>& cells,
                             const std::vector<RunRecord>& records);

/// `grid` overrides the config's own grid when non-null.
int cli_sweep(const std::filesystem::path& config_path, const nlohmann::json& grid,
              const CliOptions& options, std::ostream& out, std::ostream& err);

struct CheckResult {
  std::string subject;
  bool pass = false;
  std::string detail;
};

CheckResult check_compressor(const CompressorSpec& spec, std::size_t trials, std::uint64_t seed);
CheckResult check_graph(const GraphSpec& spec);
/// Central-difference gradient check on `points` random points (agents in
/// turn) plus, when L is certified, a sampled Lipschitz check of the
/// gradient.
std::vector<CheckResult> check_objective(const Objective& objective, std::size_t points,
                                         std::uint64_t seed);

struct CheckRequest {
  std::optional<std::filesystem::path> config;
  std::optional<nlohmann::json> compressor;
  std::optional<std::size_t> dim;
  std::optional<nlohmann::json> graph;
  std::size_t trials = 10000;
  std::uint64_t seed = 0;
};

int cli_check(const CheckRequest& request, std::ostream& out, std::ostream& err);

struct ComparisonTable {
  std::vector<std::string> columns;  // one label per record
  std::vector<std::size_t> iterations;
  std::vector<std::vector<std::optional<MetricsRow>>> by_iteration;  // [point][record]
  std::vector<std::uint64_t> budgets;
  std::vector<std::vector<std::optional<MetricsRow>>> by_bits;
};

/// Aligns records at up to `points` shared iterations and at `points`
/// geometrically spaced bit budgets (last row within budget). Throws
/// ConfigError when problem hashes differ.
ComparisonTable compare_records(const std::vector<RunRecord>& records, std::size_t points = 11);
std::string comparison_text(const ComparisonTable& table);

int cli_compare(const std::vector<std::filesystem::path>& inputs, std::size_t points,
                const std::optional<std::filesystem::path>& out_file, std::ostream& out,
                std::ostream& err);

}  // namespace ticopd

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ticopd/harness.hpp"

namespace {

struct Common {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> stride;
  std::optional<int> threads;
  bool quiet = false;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "experiment config (JSON)")->required();
  cmd->add_option("--out", c.out, "output directory (overrides config and $TICOPD_OUT_DIR)");
  cmd->add_option("--seed", c.seed, "master seed");
  cmd->add_option("--stride", c.stride, "metrics stride")->check(CLI::PositiveNumber);
  cmd->add_option("--threads", c.threads, "worker threads per run")->check(CLI::PositiveNumber);
  cmd->add_flag("--quiet", c.quiet, "suppress the per-run summary");
}

ticopd::CliOptions options_from(const Common& c) {
  ticopd::CliOptions o;
  o.quiet = c.quiet;
  o.overrides.seed = c.seed;
  o.overrides.stride = c.stride;
  o.overrides.threads = c.threads;
  if (!c.out.empty())
    o.overrides.out_dir = c.out;
  else if (const char* env = std::getenv(ticopd::kOutDirEnv); env && *env)
    o.overrides.out_dir = env;
  return o;
}

std::optional<nlohmann::json> parse_inline(const std::string& text, const char* what) {
  if (text.empty()) return std::nullopt;
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error&) {
    // Bare names are accepted for convenience: --compressor qsgd.
    if (text.find_first_of("{[\"") == std::string::npos) return nlohmann::json(text);
    throw CLI::ValidationError(what, "malformed JSON");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Compressed decentralized primal-dual optimization simulator"};
  app.require_subcommand(1);

  Common run_opts;
  auto* run = app.add_subcommand("run", "run the algorithms of a config");
  add_common(run, run_opts);

  Common sweep_opts;
  std::string grid_text;
  auto* sweep = app.add_subcommand("sweep", "grid search over numeric run parameters");
  add_common(sweep, sweep_opts);
  sweep->add_option("--grid", grid_text, "grid JSON, e.g. {\"theta\":[0.5,1]}; defaults to the config's");

  ticopd::CheckRequest check_req;
  std::string check_config, compressor_text, graph_text;
  std::size_t dim = 0;
  auto* check = app.add_subcommand("check", "validate a compressor, graph or objective");
  check->add_option("--config", check_config, "experiment config to check");
  check->add_option("--compressor", compressor_text, "compressor JSON, e.g. {\"kind\":\"qsgd\",\"s\":4}");
  check->add_option("--dim", dim, "vector dimension for --compressor");
  check->add_option("--graph", graph_text, "graph JSON, e.g. {\"kind\":\"ring\",\"n\":10}");
  check->add_option("--trials", check_req.trials, "contraction test trials")->check(CLI::Range(1000, 100000000));
  check->add_option("--seed", check_req.seed, "seed for random test points");
  check->add_flag("--quiet", "accepted for symmetry; check always prints its report");

  std::vector<std::string> compare_inputs;
  std::string compare_out;
  std::size_t points = 11;
  auto* compare = app.add_subcommand("compare", "align run records by iteration and by bits");
  compare->add_option("records", compare_inputs, "run record or manifest JSON files")->required();
  compare->add_option("--out", compare_out, "write the table here instead of stdout");
  compare->add_option("--points", points, "rows per table")->check(CLI::Range(2, 100000));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : ticopd::kExitConfig;
  }

  if (*run) return ticopd::cli_run(run_opts.config, options_from(run_opts), std::cout, std::cerr);
  if (*sweep) {
    nlohmann::json grid;
    if (!grid_text.empty()) {
      try {
        grid = nlohmann::json::parse(grid_text);
      } catch (const nlohmann::json::parse_error& e) {
        std::cerr << "config error: malformed --grid: " << e.what() << "\n";
        return ticopd::kExitConfig;
      }
    }
    return ticopd::cli_sweep(sweep_opts.config, grid, options_from(sweep_opts), std::cout, std::cerr);
  }
  if (*check) {
    try {
      if (!check_config.empty()) check_req.config = check_config;
      check_req.compressor = parse_inline(compressor_text, "--compressor");
      check_req.graph = parse_inline(graph_text, "--graph");
    } catch (const CLI::ValidationError& e) {
      std::cerr << "config error: " << e.what() << "\n";
      return ticopd::kExitConfig;
    }
    if (dim > 0) check_req.dim = dim;
    return ticopd::cli_check(check_req, std::cout, std::cerr);
  }
  std::optional<std::filesystem::path> out_file;
  if (!compare_out.empty()) out_file = compare_out;
  std::vector<std::filesystem::path> inputs(compare_inputs.begin(), compare_inputs.end());
  return ticopd::cli_compare(inputs, points, out_file, std::cout, std::cerr);
}

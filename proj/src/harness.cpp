#include "ticopd/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "ticopd/rng.hpp"

namespace ticopd {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string brief(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

double to_double(const std::string& s) {
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw std::runtime_error("bad number in CSV: " + s);
  return v;
}

json final_metrics(const RunRecord& r) {
  if (r.rows.empty()) return nullptr;
  const auto& last = r.rows.back();
  json m{{"t", last.t},
         {"loss_max", last.loss_max},
         {"grad_norm_avg", last.grad_norm_avg},
         {"consensus_err", last.consensus_err},
         {"bits_cum", last.bits_cum}};
  m["lyapunov"] = last.lyapunov ? json(*last.lyapunov) : json(nullptr);
  m["test_acc"] = last.test_acc ? json(*last.test_acc) : json(nullptr);
  return m;
}

void print_summary(const RunRecord& r, const Problem& problem, bool lyapunov_requested,
                   std::ostream& out) {
  out << r.name << ": " << to_string(r.status);
  if (r.status == RunStatus::Diverged) out << " at t=" << r.diverged_at;
  if (!r.rows.empty()) {
    const auto& last = r.rows.back();
    out << ", t=" << last.t << ", grad_norm_avg=" << brief(last.grad_norm_avg)
        << ", consensus_err=" << brief(last.consensus_err) << ", bits=" << last.bits_cum;
    if (last.test_acc) out << ", test_acc=" << brief(*last.test_acc);
    if (lyapunov_requested) {
      if (last.lyapunov)
        out << ", lyapunov: " << brief(*last.lyapunov);
      else
        out << ", lyapunov: n/a";
    }
  }
  if (!problem.objective->smoothness_certified()) out << " (L unverified)";
  out << "\n";
}

/// Runs every spec in memory. Invalid parameters surface here as
/// ConfigError before anything is written.
std::vector<RunRecord> execute_all(const ExperimentConfig& cfg, const Problem& problem,
                                   const std::vector<RunSpec>& runs) {
  std::vector<RunRecord> records;
  for (const auto& run : runs) {
    try {
      records.push_back(execute_run(cfg, problem, run));
    } catch (const std::invalid_argument& e) {
      throw ConfigError("run " + run.name + ": " + e.what());
    }
  }
  return records;
}

fs::path resolve_out_dir(const ExperimentConfig& cfg) { return cfg.out_dir; }

}  // namespace

std::string to_string(RunStatus status) {
  return status == RunStatus::Completed ? "completed" : "diverged";
}

std::string csv_text(const std::vector<MetricsRow>& rows) {
  std::string s = kCsvHeader;
  s += '\n';
  for (const auto& r : rows) {
    s += std::to_string(r.t);
    s += ',' + fmt(r.loss_max);
    s += ',' + fmt(r.grad_norm_avg);
    s += ',' + fmt(r.consensus_err);
    s += ',' + std::to_string(r.bits_cum);
    s += ',' + (r.lyapunov ? fmt(*r.lyapunov) : std::string());
    s += ',' + (r.test_acc ? fmt(*r.test_acc) : std::string());
    s += '\n';
  }
  return s;
}

std::vector<MetricsRow> parse_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) throw std::runtime_error("unexpected CSV header");
  std::vector<MetricsRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 7) throw std::runtime_error("CSV row has " + std::to_string(f.size()) + " fields");
    MetricsRow r;
    r.t = std::stoull(f[0]);
    r.loss_max = to_double(f[1]);
    r.grad_norm_avg = to_double(f[2]);
    r.consensus_err = to_double(f[3]);
    r.bits_cum = std::stoull(f[4]);
    if (!f[5].empty()) r.lyapunov = to_double(f[5]);
    if (!f[6].empty()) r.test_acc = to_double(f[6]);
    rows.push_back(r);
  }
  return rows;
}

std::vector<MetricsRow> read_csv(const fs::path& path) { return parse_csv(read_file(path)); }

void write_atomic(const fs::path& path, const std::string& content) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    if (!out.flush()) throw std::runtime_error("write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string config_hash(const json& resolved) {
  json c = resolved;
  c.erase("out_dir");
  c.erase("threads");
  c.erase("grid");
  return json_hash(c);
}

json single_run_config(const ExperimentConfig& config, const RunSpec& run) {
  json c = config.resolved;
  c.erase("grid");
  c["runs"] = json::array({run.snapshot});
  return c;
}

RunRecord execute_run(const ExperimentConfig& config, const Problem& problem, const RunSpec& run) {
  RunOptions opts;
  if (problem.test) opts.test = &*problem.test;
  RunResult res = ticopd::run(run.algorithm, *problem.objective, *problem.graph, opts);
  RunRecord r;
  r.name = run.name;
  r.algorithm = to_string(run.algorithm.kind);
  r.config = single_run_config(config, run);
  r.config_hash = config_hash(r.config);
  r.problem_hash = problem_hash(config);
  r.status = res.status;
  r.diverged_at = res.diverged_at;
  r.message = res.message;
  r.rows = std::move(res.rows);
  return r;
}

json record_json(const RunRecord& r, const std::string& csv) {
  json j{{"name", r.name},
         {"algorithm", r.algorithm},
         {"status", to_string(r.status)},
         {"config_hash", r.config_hash},
         {"problem_hash", r.problem_hash},
         {"csv", csv},
         {"rows", r.rows.size()},
         {"final", final_metrics(r)},
         {"config", r.config}};
  if (r.status == RunStatus::Diverged) {
    j["diverged_at"] = r.diverged_at;
    j["message"] = r.message;
  }
  return j;
}

void write_outputs(const fs::path& dir, const ExperimentConfig& config,
                   const std::vector<RunRecord>& records, const json& extra) {
  fs::create_directories(dir);
  json manifest{{"schema_version", kSchemaVersion},
                {"config_hash", config_hash(config.resolved)},
                {"problem_hash", problem_hash(config)},
                {"config", config.resolved},
                {"runs", json::array()}};
  for (const auto& r : records) {
    const std::string csv = r.name + ".csv";
    const std::string rec = r.name + ".json";
    write_atomic(dir / csv, csv_text(r.rows));
    write_atomic(dir / rec, record_json(r, csv).dump(2) + "\n");
    json entry{{"name", r.name},
               {"algorithm", r.algorithm},
               {"status", to_string(r.status)},
               {"csv", csv},
               {"record", rec},
               {"rows", r.rows.size()},
               {"config_hash", r.config_hash},
               {"final", final_metrics(r)}};
    if (r.status == RunStatus::Diverged) entry["diverged_at"] = r.diverged_at;
    manifest["runs"].push_back(entry);
  }
  for (const auto& [key, value] : extra.items()) manifest[key] = value;
  write_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
}

RunRecord load_record(const fs::path& path) {
  const json j = load_json(path);
  RunRecord r;
  try {
    r.name = j.at("name").get<std::string>();
    r.algorithm = j.at("algorithm").get<std::string>();
    r.status = j.at("status") == "diverged" ? RunStatus::Diverged : RunStatus::Completed;
    r.diverged_at = j.value("diverged_at", std::size_t{0});
    r.message = j.value("message", std::string());
    r.config_hash = j.at("config_hash").get<std::string>();
    r.problem_hash = j.at("problem_hash").get<std::string>();
    r.config = j.at("config");
    r.rows = read_csv(path.parent_path() / j.at("csv").get<std::string>());
  } catch (const json::exception& e) {
    throw ConfigError("bad run record " + path.string() + ": " + e.what());
  }
  return r;
}

std::vector<RunRecord> load_records(const fs::path& path) {
  const json j = load_json(path);
  if (!j.contains("runs")) return {load_record(path)};
  std::vector<RunRecord> out;
  for (const auto& entry : j.at("runs"))
    out.push_back(load_record(path.parent_path() / entry.at("record").get<std::string>()));
  return out;
}

int cli_run(const fs::path& config_path, const CliOptions& options, std::ostream& out,
            std::ostream& err) {
  ExperimentConfig cfg;
  Problem problem;
  std::vector<RunRecord> records;
  try {
    cfg = load_experiment(config_path, options.overrides);
    problem = build_problem(cfg);
    records = execute_all(cfg, problem, cfg.runs);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  try {
    write_outputs(resolve_out_dir(cfg), cfg, records);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  bool any_diverged = false;
  for (std::size_t k = 0; k < records.size(); ++k) {
    if (!options.quiet) print_summary(records[k], problem, cfg.runs[k].algorithm.lyapunov, out);
    any_diverged = any_diverged || records[k].status == RunStatus::Diverged;
  }
  if (!options.quiet) out << "wrote " << (resolve_out_dir(cfg) / "manifest.json").string() << "\n";
  return any_diverged ? kExitDiverged : kExitOk;
}

namespace {

const std::set<std::string> kGridKeys{"alpha_tilde", "theta",     "eta",          "gamma",
                                      "inner_steps", "stepsize",  "gossip",       "T",
                                      "seed",        "init_scale", "compressor.s", "compressor.k"};

std::string label_value(const json& v) { return v.dump(); }

}  // namespace

std::vector<SweepCell> expand_grid(const json& grid) {
  if (!grid.is_object() || grid.empty()) throw ConfigError("sweep grid is empty");
  std::vector<SweepCell> cells{{"", json::object()}};
  for (const auto& [key, values] : grid.items()) {
    if (!kGridKeys.count(key)) throw ConfigError("grid key '" + key + "' is not a numeric run key");
    if (!values.is_array() || values.empty()) throw ConfigError("grid key '" + key + "' has no values");
    std::vector<SweepCell> next;
    for (const auto& cell : cells) {
      for (const auto& v : values) {
        if (!v.is_number()) throw ConfigError("grid values for '" + key + "' must be numbers");
        SweepCell c = cell;
        c.values[key] = v;
        c.label += (c.label.empty() ? "" : "__") + key + "=" + label_value(v);
        next.push_back(std::move(c));
      }
    }
    cells = std::move(next);
  }
  return cells;
}

json apply_cell(json run, const SweepCell& cell) {
  for (const auto& [key, v] : cell.values.items()) {
    const auto dot = key.find('.');
    if (dot == std::string::npos)
      run[key] = v;
    else
      run[key.substr(0, dot)][key.substr(dot + 1)] = v;
  }
  return run;
}

SweepSummary summarize_sweep(const std::vector<std::string>& base_runs,
                             const std::vector<SweepCell>& cells,
                             const std::vector<RunRecord>& records) {
  SweepSummary s;
  for (std::size_t b = 0; b < base_runs.size(); ++b) {
    SweepSummary::Best best{base_runs[b], "", 0.0};
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const RunRecord& r = records[c * base_runs.size() + b];
      if (r.status != RunStatus::Completed || r.rows.empty()) continue;
      const double g = r.rows.back().grad_norm_avg;
      if (!std::isfinite(g)) continue;
      if (best.cell.empty() || g < best.grad_norm_avg) {
        best.cell = cells[c].label;
        best.grad_norm_avg = g;
      }
    }
    s.best.push_back(best);
  }
  return s;
}

int cli_sweep(const fs::path& config_path, const json& grid_override, const CliOptions& options,
              std::ostream& out, std::ostream& err) {
  ExperimentConfig cfg;
  Problem problem;
  std::vector<SweepCell> cells;
  std::vector<RunSpec> specs;
  std::vector<std::string> base;
  try {
    cfg = load_experiment(config_path, options.overrides);
    const json grid = grid_override.is_null() ? cfg.grid : grid_override;
    cells = expand_grid(grid);
    cfg.resolved["grid"] = grid;
    problem = build_problem(cfg);
    for (const auto& r : cfg.runs) base.push_back(r.name);
    for (const auto& cell : cells) {
      for (const auto& r : cfg.runs) {
        json entry = apply_cell(r.snapshot, cell);
        // A grid over T re-derives the default stride unless one was given.
        if (cell.values.contains("T") && !cfg.stride_explicit)
          entry["stride"] = default_stride(entry["T"].get<std::size_t>());
        entry["name"] = r.name + "__" + cell.label;
        RunSpec spec;
        spec.name = entry["name"].get<std::string>();
        spec.algorithm = parse_algorithm(entry, cfg.seed);
        spec.algorithm.threads = cfg.threads;
        spec.snapshot = entry;
        specs.push_back(std::move(spec));
      }
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }

  std::vector<RunRecord> records;
  records.reserve(specs.size());
  for (const auto& spec : specs) {
    try {
      records.push_back(execute_run(cfg, problem, spec));
    } catch (const std::invalid_argument& e) {
      // Parameters outside an algorithm's domain count as a failed cell.
      RunRecord r;
      r.name = spec.name;
      r.algorithm = to_string(spec.algorithm.kind);
      r.config = single_run_config(cfg, spec);
      r.config_hash = config_hash(r.config);
      r.problem_hash = problem_hash(cfg);
      r.status = RunStatus::Diverged;
      r.message = e.what();
      records.push_back(std::move(r));
    }
    if (!options.quiet) print_summary(records.back(), problem, spec.algorithm.lyapunov, out);
  }

  const SweepSummary summary = summarize_sweep(base, cells, records);
  json best = json::object();
  std::string table = "run,best_cell,final_grad_norm_avg\n";
  for (const auto& b : summary.best) {
    best[b.run] = b.cell.empty() ? json(nullptr) : json(b.run + "__" + b.cell);
    table += b.run + "," + b.cell + "," + (b.cell.empty() ? std::string() : fmt(b.grad_norm_avg)) + "\n";
  }
  try {
    write_outputs(resolve_out_dir(cfg), cfg, records, json{{"best", best}});
    write_atomic(resolve_out_dir(cfg) / "sweep_summary.csv", table);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  if (!options.quiet) out << table;
  return kExitOk;
}

CheckResult check_compressor(const CompressorSpec& spec, std::size_t trials, std::uint64_t seed) {
  CheckResult res;
  res.subject = "compressor " + spec.describe();
  RngStream rng(seed, 0, 0, Purpose::ContractionTest, 0);
  const ContractionReport rep = contraction_test(spec, trials, rng);
  res.pass = rep.pass;
  std::ostringstream ss;
  ss << "mean ||Q(x)-x||^2/||x||^2 = " << brief(rep.mean_ratio) << " +/- " << brief(rep.std_error)
     << ", certified bound (1-delta)^2 = " << brief(rep.bound)
     << " (delta = " << brief(certified_delta(spec)) << ", trials = " << rep.trials << ")";
  res.detail = ss.str();
  return res;
}

CheckResult check_graph(const GraphSpec& spec) {
  CheckResult res;
  res.subject = "graph " + to_string(spec.kind) + " n=" + std::to_string(spec.n);
  std::vector<Edge> edges;
  try {
    edges = build_graph(spec).edges();
  } catch (const std::exception&) {
    edges = raw_edges(spec, 0);  // report on the failed draw itself
  }
  const bool connected = is_connected(spec.n, edges);
  const Eigen::VectorXd ev = laplacian_eigenvalues(spec.n, edges);
  const double top = ev.size() ? ev(ev.size() - 1) : 0.0;
  const double zero_tol = kZeroEigenvalueTol * std::max(1.0, top);
  double rho2 = 0.0;
  if (ev.size() > 1 && ev(1) > zero_tol) rho2 = ev(1);
  res.pass = connected && rho2 > 0;
  std::ostringstream ss;
  ss << "edges = " << edges.size() << ", connected = " << (connected ? "yes" : "no")
     << ", rho1 = " << brief(top) << ", rho2 = " << brief(rho2) << ", M = " << brief(top);
  res.detail = ss.str();
  return res;
}

std::vector<CheckResult> check_objective(const Objective& objective, std::size_t points,
                                         std::uint64_t seed) {
  const std::size_t n = objective.agents();
  const auto d = static_cast<Eigen::Index>(objective.dim());
  const bool convex = objective.name() != "mlp";
  const double tol = convex ? 1e-5 : 1e-4;
  const double h = 1e-6;
  auto random_point = [&](std::size_t k, std::size_t sub) {
    RngStream rng(seed, k % n, k, Purpose::Testing, sub);
    Eigen::VectorXd x(d);
    for (Eigen::Index r = 0; r < d; ++r) x(r) = rng.normal();
    return x;
  };

  std::vector<CheckResult> out;
  double worst = 0.0;
  for (std::size_t k = 0; k < points; ++k) {
    const std::size_t i = k % n;
    Eigen::VectorXd x = random_point(k, 0);
    const Eigen::VectorXd g = objective.gradient(i, x);
    Eigen::VectorXd fd(d);
    for (Eigen::Index r = 0; r < d; ++r) {
      const double xr = x(r);
      x(r) = xr + h;
      const double up = objective.loss(i, x);
      x(r) = xr - h;
      const double down = objective.loss(i, x);
      x(r) = xr;
      fd(r) = (up - down) / (2 * h);
    }
    worst = std::max(worst, (fd - g).norm() / std::max(g.norm(), 1.0));
  }
  CheckResult grad;
  grad.subject = "objective " + objective.name() + " gradient";
  grad.pass = worst <= tol;
  grad.detail = "max relative error vs central differences = " + brief(worst) + " over " +
                std::to_string(points) + " points (tolerance " + brief(tol) + ")";
  out.push_back(grad);

  CheckResult lip;
  lip.subject = "objective " + objective.name() + " smoothness";
  if (!objective.smoothness_certified()) {
    lip.pass = true;
    lip.detail = "L = " + brief(objective.smoothness()) + " is a configured value (unverified)";
  } else {
    double ratio = 0.0;
    for (std::size_t k = 0; k < points; ++k) {
      const std::size_t i = k % n;
      const Eigen::VectorXd x = random_point(k, 1);
      const Eigen::VectorXd y = random_point(k, 2);
      const double dx = (x - y).norm();
      if (dx > 0) ratio = std::max(ratio, (objective.gradient(i, x) - objective.gradient(i, y)).norm() / dx);
    }
    lip.pass = ratio <= objective.smoothness() * (1 + 1e-9);
    lip.detail = "max ||grad f_i(x)-grad f_i(y)||/||x-y|| = " + brief(ratio) + " vs L = " +
                 brief(objective.smoothness());
  }
  out.push_back(lip);
  return out;
}

int cli_check(const CheckRequest& request, std::ostream& out, std::ostream& err) {
  std::vector<CheckResult> results;
  try {
    if (request.compressor) {
      CompressorSpec spec = parse_compressor(*request.compressor);
      if (!request.dim) throw ConfigError("compressor check needs --dim");
      spec.d = *request.dim;
      spec.validate();
      results.push_back(check_compressor(spec, request.trials, request.seed));
    }
    if (request.graph) results.push_back(check_graph(parse_graph(*request.graph)));
    if (request.config) {
      const ExperimentConfig cfg = load_experiment(*request.config);
      results.push_back(check_graph(cfg.graph));
      const Problem problem = build_problem(cfg);
      for (auto& r : check_objective(*problem.objective, 20, request.seed)) results.push_back(r);
      std::set<std::string> seen;
      for (const auto& run : cfg.runs) {
        const CompressorSpec spec = effective_compressor(run.algorithm, *problem.objective);
        if (spec.lossless() || !seen.insert(spec.describe()).second) continue;
        results.push_back(check_compressor(spec, request.trials, request.seed));
      }
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  if (results.empty()) {
    err << "nothing to check: give --config, --compressor or --graph\n";
    return kExitConfig;
  }
  bool ok = true;
  for (const auto& r : results) {
    out << (r.pass ? "PASS " : "FAIL ") << r.subject << ": " << r.detail << "\n";
    ok = ok && r.pass;
  }
  return ok ? kExitOk : kExitFailure;
}

ComparisonTable compare_records(const std::vector<RunRecord>& records, std::size_t points) {
  if (records.empty()) throw ConfigError("nothing to compare");
  if (points < 2) throw ConfigError("need at least two comparison points");
  for (const auto& r : records)
    if (r.problem_hash != records.front().problem_hash)
      throw ConfigError("records " + records.front().name + " and " + r.name +
                        " were run on different problems");

  ComparisonTable t;
  std::map<std::string, int> seen;
  for (const auto& r : records) {
    const int k = seen[r.name]++;
    t.columns.push_back(k == 0 ? r.name : r.name + "#" + std::to_string(k + 1));
  }

  // Iterations recorded by every run.
  std::vector<std::size_t> common;
  for (const auto& row : records.front().rows) common.push_back(row.t);
  for (const auto& r : records) {
    std::vector<std::size_t> ts;
    for (const auto& row : r.rows) ts.push_back(row.t);
    std::vector<std::size_t> keep;
    std::set_intersection(common.begin(), common.end(), ts.begin(), ts.end(), std::back_inserter(keep));
    common = std::move(keep);
  }
  if (!common.empty()) {
    std::set<std::size_t> pick;
    const std::size_t m = std::min(points, common.size());
    for (std::size_t k = 0; k < m; ++k)
      pick.insert(common[m == 1 ? 0 : k * (common.size() - 1) / (m - 1)]);
    t.iterations.assign(pick.begin(), pick.end());
  }
  auto row_at = [](const RunRecord& r, std::size_t it) -> std::optional<MetricsRow> {
    for (const auto& row : r.rows)
      if (row.t == it) return row;
    return std::nullopt;
  };
  for (auto it : t.iterations) {
    std::vector<std::optional<MetricsRow>> line;
    for (const auto& r : records) line.push_back(row_at(r, it));
    t.by_iteration.push_back(std::move(line));
  }

  // Budgets from the smallest first nonzero spend to the smallest total.
  std::uint64_t lo = 0, hi = 0;
  bool first = true;
  for (const auto& r : records) {
    std::uint64_t first_spend = 0;
    for (const auto& row : r.rows)
      if (row.bits_cum > 0) {
        first_spend = row.bits_cum;
        break;
      }
    const std::uint64_t total = r.rows.empty() ? 0 : r.rows.back().bits_cum;
    if (first_spend == 0) continue;
    lo = first ? first_spend : std::min(lo, first_spend);
    hi = first ? total : std::min(hi, total);
    first = false;
  }
  if (!first && hi >= lo && lo > 0) {
    std::set<std::uint64_t> budgets;
    for (std::size_t k = 0; k < points; ++k) {
      const double frac = static_cast<double>(k) / static_cast<double>(points - 1);
      const double b = std::exp(std::log(static_cast<double>(lo)) * (1 - frac) +
                                std::log(static_cast<double>(hi)) * frac);
      budgets.insert(k + 1 == points ? hi : static_cast<std::uint64_t>(std::llround(b)));
    }
    t.budgets.assign(budgets.begin(), budgets.end());
  }
  for (auto b : t.budgets) {
    std::vector<std::optional<MetricsRow>> line;
    for (const auto& r : records) {
      std::optional<MetricsRow> best;
      for (const auto& row : r.rows)
        if (row.bits_cum <= b) best = row;
      line.push_back(best);
    }
    t.by_bits.push_back(std::move(line));
  }
  return t;
}

std::string comparison_text(const ComparisonTable& t) {
  std::ostringstream ss;
  auto cells = [&](const std::optional<MetricsRow>& row, bool with_t) {
    if (!row) {
      ss << (with_t ? ",,," : ",,");
      return;
    }
    if (with_t) ss << "," << row->t;
    ss << "," << fmt(row->grad_norm_avg) << "," << fmt(row->consensus_err);
  };
  ss << "# matched iterations\nt";
  for (const auto& c : t.columns) ss << "," << c << ".grad_norm_avg," << c << ".consensus_err";
  ss << "\n";
  for (std::size_t k = 0; k < t.iterations.size(); ++k) {
    ss << t.iterations[k];
    for (const auto& row : t.by_iteration[k]) cells(row, false);
    ss << "\n";
  }
  ss << "\n# matched bit budgets\nbits";
  for (const auto& c : t.columns) ss << "," << c << ".t," << c << ".grad_norm_avg," << c << ".consensus_err";
  ss << "\n";
  for (std::size_t k = 0; k < t.budgets.size(); ++k) {
    ss << t.budgets[k];
    for (const auto& row : t.by_bits[k]) cells(row, true);
    ss << "\n";
  }
  return ss.str();
}

int cli_compare(const std::vector<fs::path>& inputs, std::size_t points,
                const std::optional<fs::path>& out_file, std::ostream& out, std::ostream& err) {
  try {
    std::vector<RunRecord> records;
    for (const auto& p : inputs)
      for (auto& r : load_records(p)) records.push_back(std::move(r));
    const std::string text = comparison_text(compare_records(records, points));
    if (out_file)
      write_atomic(*out_file, text);
    else
      out << text;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitOk;
}

}  // namespace ticopd

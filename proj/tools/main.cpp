// e3dnas command-line front end.
//
// Exit codes: 0 success, 2 usage error, 3 unreadable/unwritable file,
// 4 schema or invariant violation, 5 invalid configuration,
// 6 simulation limit exceeded, 1 anything else.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <iterator>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "e3dnas/e3dnas.hpp"
#include "manifest.hpp"

namespace {

using namespace e3d;
using cli::RunManifest;

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kUsage = 2,
  kIo = 3,
  kSchema = 4,
  kConfig = 5,
  kSimulation = 6,
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Input {
  std::string path;
  std::string bytes;
};

Input read_input(const std::string& path) {
  Input in{path.empty() ? "-" : path, {}};
  if (in.path == "-") {
    in.bytes.assign(std::istreambuf_iterator<char>(std::cin), std::istreambuf_iterator<char>());
    return in;
  }
  std::ifstream file(in.path, std::ios::binary);
  if (!file) throw IoError("cannot read '" + in.path + "': file not found or unreadable");
  in.bytes.assign(std::istreambuf_iterator<char>(file), std::istreambuf_iterator<char>());
  return in;
}

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw IoError("cannot write '" + path + "'");
  file << bytes;
  if (!file) throw IoError("failed writing '" + path + "'");
}

void emit(const std::string& text) {
  std::fwrite(text.data(), 1, text.size(), stdout);
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

void write_sidecar(RunManifest& manifest, const cli::Stopwatch& clock) {
  if (manifest.outputs.empty()) return;
  manifest.wall_clock_seconds = clock.seconds();
  write_file(manifest.outputs.front().path + ".manifest.json", dump(manifest.to_json(false)));
}

void record_output(RunManifest& manifest, const std::string& path, const std::string& bytes) {
  write_file(path, bytes);
  manifest.outputs.push_back({path, cli::sha256_hex(bytes)});
}

struct ScoreOptions {
  std::string arch;
  std::string metric = "st";
  std::string log_base;
  std::string refinement_log_base;
  double epsilon = kDefaultEpsilon;
  bool include_classifier = false;
  bool breakdown = false;
  std::string format = "json";
  bool json = false;
};

int run_score(const ScoreOptions& o) {
  const auto input = read_input(o.arch);
  const NetworkSpec net = from_json(input.bytes);
  ScoreConfig cfg;
  if (!o.log_base.empty()) cfg.log_base = parse_log_base(o.log_base, "--log-base");
  if (!o.refinement_log_base.empty()) {
    cfg.refinement_log_base = parse_log_base(o.refinement_log_base, "--refinement-log-base");
  }
  cfg.epsilon = o.epsilon;
  cfg.include_classifier = o.include_classifier;
  const Metric metric = o.metric == "homo" ? Metric::Homo : Metric::STEntr;
  const auto breakdown = score(net, metric, cfg);

  if (o.breakdown && o.format == "csv") {
    emit(breakdown_csv(breakdown));
    return kOk;
  }
  if (!o.json && !o.breakdown) {
    std::printf("%.10g\n", breakdown.total);
    return kOk;
  }
  RunManifest manifest;
  manifest.subcommand = "score";
  manifest.config = {{"metric", to_string(metric)},
                     {"score", to_json_value(cfg)},
                     {"architecture", to_json_value(net)}};
  manifest.inputs.push_back({input.path, cli::sha256_hex(input.bytes)});
  Json out;
  out["score"] = to_json_value(breakdown, o.breakdown);
  out["manifest"] = manifest.to_json(true);
  emit(dump(out));
  return kOk;
}

std::string cost_table(const CostReport& r) {
  std::ostringstream os;
  char line[256];
  std::snprintf(line, sizeof line, "%-34s %16s %12s\n", "layer", "macs", "params");
  os << line;
  for (const auto& l : r.per_layer) {
    std::snprintf(line, sizeof line, "%-34s %16llu %12llu\n", l.id.c_str(),
                  static_cast<unsigned long long>(l.macs),
                  static_cast<unsigned long long>(l.params));
    os << line;
  }
  std::snprintf(line, sizeof line, "%-34s %16llu %12llu\n", "total",
                static_cast<unsigned long long>(r.total_macs),
                static_cast<unsigned long long>(r.total_params));
  os << line;
  std::snprintf(line, sizeof line, "classifier params: %llu\n",
                static_cast<unsigned long long>(r.classifier_params));
  os << line;
  std::snprintf(line, sizeof line, "gflops: %.4f (2x convention: %.4f)\n", r.gflops(),
                r.gflops_2x());
  os << line;
  return os.str();
}

int run_cost(const std::string& arch, bool include_classifier, bool json) {
  const auto input = read_input(arch);
  const NetworkSpec net = from_json(input.bytes);
  const auto report = cost(net, {include_classifier});
  if (!json) {
    emit(cost_table(report));
    return kOk;
  }
  RunManifest manifest;
  manifest.subcommand = "cost";
  manifest.config = {{"include_classifier", include_classifier},
                     {"architecture", to_json_value(net)}};
  manifest.inputs.push_back({input.path, cli::sha256_hex(input.bytes)});
  Json out;
  out["cost"] = to_json_value(report);
  out["manifest"] = manifest.to_json(true);
  emit(dump(out));
  return kOk;
}

struct SimulateOptions {
  std::string arch;
  std::size_t samples = 1000;
  std::uint64_t seed = 0;
  std::string padding = "same";
  std::string pooling = "interior";
  double weight_std = 1.0;
  std::string log_base = "e";
  std::size_t max_elements = std::size_t{1} << 26;
  bool json = false;
};

int run_simulate(const SimulateOptions& o, unsigned threads) {
  const auto input = read_input(o.arch);
  const NetworkSpec net = from_json(input.bytes);
  SimConfig cfg;
  cfg.samples = o.samples;
  cfg.seed = o.seed;
  cfg.padding = o.padding == "valid" ? Padding::Valid : Padding::Same;
  cfg.pooling = o.pooling == "all"      ? Pooling::All
                : o.pooling == "center" ? Pooling::Center
                                        : Pooling::Interior;
  cfg.weight_std = o.weight_std;
  cfg.log_base = parse_log_base(o.log_base, "--log-base");
  cfg.max_elements = o.max_elements;
  cfg.threads = threads;
  const auto report = simulate(net, cfg);
  if (!o.json) {
    std::printf("empirical log-variance: %.10g\nanalytic log-variance:  %.10g\nrelative error: %.6g\n",
                report.empirical_log_variance, report.analytic_log_variance,
                report.relative_error);
    return kOk;
  }
  RunManifest manifest;
  manifest.subcommand = "simulate";
  manifest.seed = cfg.seed;
  manifest.config = {{"samples", cfg.samples},
                     {"seed", cfg.seed},
                     {"padding", to_string(cfg.padding)},
                     {"pooling", to_string(cfg.pooling)},
                     {"weight_std", cfg.weight_std},
                     {"log_base", to_string(cfg.log_base)},
                     {"max_elements", cfg.max_elements},
                     {"architecture", to_json_value(net)}};
  manifest.inputs.push_back({input.path, cli::sha256_hex(input.bytes)});
  Json out;
  out["simulation"] = to_json_value(report);
  out["manifest"] = manifest.to_json(true);
  emit(dump(out));
  return kOk;
}

struct SearchOptions {
  std::string config;
  std::string out;
  std::string history;
  bool json = false;
};

int run_search(const SearchOptions& o, unsigned threads) {
  const cli::Stopwatch clock;
  const auto input = read_input(o.config);
  SearchConfig cfg = parse_search_config(input.bytes);
  cfg.threads = threads;
  const auto result = evolve(cfg);

  RunManifest manifest;
  manifest.subcommand = "search";
  manifest.seed = cfg.seed;
  manifest.config = to_json_value(cfg);
  manifest.inputs.push_back({input.path, cli::sha256_hex(input.bytes)});

  if (!o.out.empty()) record_output(manifest, o.out, to_json(result.best.net));
  if (!o.history.empty()) record_output(manifest, o.history, history_csv(result));

  Json summary;
  summary["best_score"] = result.best.st_score;
  summary["best_macs"] = result.best.macs;
  summary["best_depth"] = depth(result.best.net);
  summary["birth_iteration"] = result.best.birth_iteration;
  summary["accepted"] = result.accepted;
  summary["rejected"] = result.rejected;
  if (o.json) {
    Json out;
    out["search"] = summary;
    out["best"] = to_json_value(result.best.net);
    out["manifest"] = manifest.to_json(true);
    emit(dump(out));
  } else {
    std::printf("best score %.10g, %llu MACs, %zu layers (accepted %zu, rejected %zu)\n",
                result.best.st_score, static_cast<unsigned long long>(result.best.macs),
                depth(result.best.net), result.accepted, result.rejected);
  }
  write_sidecar(manifest, clock);
  return kOk;
}

int run_preset(const std::string& name, const std::string& out) {
  const auto net = presets::by_name(name);
  if (!net) throw CLI::ValidationError("unknown preset '" + name + "'");
  const std::string text = to_json(*net);
  if (out.empty()) {
    emit(text);
    return kOk;
  }
  const cli::Stopwatch clock;
  RunManifest manifest;
  manifest.subcommand = "preset";
  manifest.config = {{"preset", name}};
  record_output(manifest, out, text);
  write_sidecar(manifest, clock);
  return kOk;
}

int fail(int code, const std::string& message) {
  std::fprintf(stderr, "e3dnas: %s\n", message.c_str());
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Training-free entropy-based architecture search for 3D CNNs", "e3dnas"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(cli::kToolVersion));
  unsigned threads = 1;
  app.add_option("--threads", threads, "Maximum worker threads")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  std::string preset_name, preset_out;
  auto* preset = app.add_subcommand("preset", "Write a built-in architecture as JSON");
  preset->add_option("name", preset_name, "init-s | e3d-s | e3d-m | e3d-l")
      ->required()
      ->check(CLI::IsMember({"init-s", "e3d-s", "e3d-m", "e3d-l"}));
  preset->add_option("--out", preset_out, "Output file (default: stdout)");

  ScoreOptions score_opts;
  auto* score_cmd = app.add_subcommand("score", "Entropy score of an architecture");
  score_cmd->add_option("arch", score_opts.arch, "Architecture JSON (default: stdin)");
  score_cmd->add_option("--metric", score_opts.metric)
      ->check(CLI::IsMember({"homo", "st"}))
      ->capture_default_str();
  score_cmd->add_option("--log-base", score_opts.log_base, "e | 10 (default: 10)")
      ->check(CLI::IsMember({"e", "10"}));
  score_cmd->add_option("--refinement-log-base", score_opts.refinement_log_base,
                        "e | 10 (default: e)")
      ->check(CLI::IsMember({"e", "10"}));
  score_cmd->add_option("--epsilon", score_opts.epsilon)->check(CLI::PositiveNumber)->capture_default_str();
  score_cmd->add_flag("--include-classifier", score_opts.include_classifier);
  score_cmd->add_flag("--breakdown", score_opts.breakdown, "Emit per-layer terms");
  score_cmd->add_option("--format", score_opts.format, "Breakdown format")
      ->check(CLI::IsMember({"csv", "json"}))
      ->capture_default_str();
  score_cmd->add_flag("--json", score_opts.json);

  std::string cost_arch;
  bool cost_classifier = false, cost_json = false;
  auto* cost_cmd = app.add_subcommand("cost", "MAC and parameter counts");
  cost_cmd->add_option("arch", cost_arch, "Architecture JSON (default: stdin)");
  cost_cmd->add_flag("--include-classifier", cost_classifier);
  cost_cmd->add_flag("--json", cost_json);

  SimulateOptions sim_opts;
  auto* sim_cmd = app.add_subcommand("simulate", "Monte-Carlo forward-inference check");
  sim_cmd->add_option("arch", sim_opts.arch, "Architecture JSON (default: stdin)");
  sim_cmd->add_option("--samples", sim_opts.samples)->check(CLI::Range(2ULL, 100000000ULL))->capture_default_str();
  sim_cmd->add_option("--seed", sim_opts.seed)->capture_default_str();
  sim_cmd->add_option("--padding", sim_opts.padding)
      ->check(CLI::IsMember({"same", "valid"}))
      ->capture_default_str();
  sim_cmd->add_option("--pooling", sim_opts.pooling)
      ->check(CLI::IsMember({"interior", "center", "all"}))
      ->capture_default_str();
  sim_cmd->add_option("--weight-std", sim_opts.weight_std)->check(CLI::NonNegativeNumber)->capture_default_str();
  sim_cmd->add_option("--log-base", sim_opts.log_base)
      ->check(CLI::IsMember({"e", "10"}))
      ->capture_default_str();
  sim_cmd->add_option("--max-elements", sim_opts.max_elements)->capture_default_str();
  sim_cmd->add_flag("--json", sim_opts.json);

  SearchOptions search_opts;
  auto* search_cmd = app.add_subcommand("search", "Evolutionary maximum-entropy search");
  search_cmd->add_option("--config", search_opts.config, "Search configuration JSON")->required();
  search_cmd->add_option("--out", search_opts.out, "Write the best architecture here");
  search_cmd->add_option("--history", search_opts.history, "Write the history CSV here");
  search_cmd->add_flag("--json", search_opts.json);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail(kUsage, e.what());
  }

  try {
    if (*preset) return run_preset(preset_name, preset_out);
    if (*score_cmd) return run_score(score_opts);
    if (*cost_cmd) return run_cost(cost_arch, cost_classifier, cost_json);
    if (*sim_cmd) return run_simulate(sim_opts, threads);
    if (*search_cmd) return run_search(search_opts, threads);
  } catch (const IoError& e) {
    return fail(kIo, e.what());
  } catch (const OracleError& e) {
    return fail(kSimulation, e.what());
  } catch (const SpecError& e) {
    return fail(kSchema, e.what());
  } catch (const ConfigError& e) {
    return fail(kConfig, e.what());
  } catch (const std::exception& e) {
    return fail(kFailure, e.what());
  }
  return kUsage;
}

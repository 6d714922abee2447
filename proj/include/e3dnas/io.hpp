#pragma once

// JSON forms of search configurations and of the score, cost and simulation
// reports. Key order is fixed so repeated runs emit identical bytes.

#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>

#include "e3dnas/arch_json.hpp"
#include "e3dnas/cost.hpp"
#include "e3dnas/entropy.hpp"
#include "e3dnas/oracle.hpp"
#include "e3dnas/presets.hpp"
#include "e3dnas/search.hpp"

namespace e3d {

inline constexpr int kSearchConfigVersion = 1;

inline LogBase parse_log_base(std::string_view s, const std::string& path) {
  if (s == "e" || s == "natural") return LogBase::Natural;
  if (s == "10") return LogBase::Base10;
  throw SchemaError(path, "expected \"e\" or \"10\"");
}

inline MutationTarget parse_target(std::string_view s, const std::string& path) {
  for (auto t : {MutationTarget::Kernel, MutationTarget::Output, MutationTarget::Bottleneck,
                 MutationTarget::Layers}) {
    if (s == to_string(t)) return t;
  }
  throw SchemaError(path, "unknown mutation target");
}

namespace io_detail {

using json_detail::join;
using json_detail::member;

inline double get_number(const Json& obj, std::string_view key, const std::string& path) {
  const Json& v = member(obj, key, path);
  if (!v.is_number()) throw SchemaError(join(path, key), "expected a number");
  return v.get<double>();
}

inline std::uint64_t get_u64(const Json& obj, std::string_view key, const std::string& path) {
  const Json& v = member(obj, key, path);
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<long long>() >= 0) {
    return static_cast<std::uint64_t>(v.get<long long>());
  }
  throw SchemaError(join(path, key), "expected a non-negative integer");
}

inline std::string get_string(const Json& obj, std::string_view key, const std::string& path) {
  const Json& v = member(obj, key, path);
  if (!v.is_string()) throw SchemaError(join(path, key), "expected a string");
  return v.get<std::string>();
}

template <typename T, typename Read>
std::vector<T> get_list(const Json& obj, std::string_view key, const std::string& path,
                        Read&& read) {
  const Json& v = member(obj, key, path);
  const auto where = join(path, key);
  if (!v.is_array()) throw SchemaError(where, "expected an array");
  std::vector<T> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(read(v[i], json_detail::index(where, i)));
  return out;
}

inline bool has(const Json& obj, std::string_view key) {
  return obj.find(std::string(key)) != obj.end();
}

}  // namespace io_detail

inline Json to_json_value(const ScoreConfig& cfg) {
  return {{"log_base", to_string(cfg.log_base)},
          {"refinement_log_base", to_string(cfg.refinement_log_base)},
          {"epsilon", cfg.epsilon},
          {"include_classifier", cfg.include_classifier},
          {"refinement_scope", to_string(cfg.refinement_scope)},
          {"weight_variance", cfg.weight_variance}};
}

inline ScoreConfig score_config_from_json(const Json& j, const std::string& path) {
  using namespace io_detail;
  json_detail::require_object(j, path);
  json_detail::reject_unknown(j, path, {"log_base", "refinement_log_base", "epsilon",
                                        "include_classifier", "refinement_scope",
                                        "weight_variance"});
  ScoreConfig cfg;
  if (has(j, "log_base")) cfg.log_base = parse_log_base(get_string(j, "log_base", path), join(path, "log_base"));
  if (has(j, "refinement_log_base")) {
    cfg.refinement_log_base = parse_log_base(get_string(j, "refinement_log_base", path),
                                             join(path, "refinement_log_base"));
  }
  if (has(j, "epsilon")) cfg.epsilon = get_number(j, "epsilon", path);
  if (has(j, "include_classifier")) cfg.include_classifier = json_detail::get_bool(j, "include_classifier", path);
  if (has(j, "refinement_scope")) {
    const auto s = get_string(j, "refinement_scope", path);
    if (s == "all") cfg.refinement_scope = RefinementScope::AllLayers;
    else if (s == "depthwise") cfg.refinement_scope = RefinementScope::DepthwiseOnly;
    else throw SchemaError(join(path, "refinement_scope"), "expected \"all\" or \"depthwise\"");
  }
  if (has(j, "weight_variance")) cfg.weight_variance = get_number(j, "weight_variance", path);
  if (!(cfg.epsilon > 0.0)) throw SchemaError(join(path, "epsilon"), "must be positive");
  if (!(cfg.weight_variance > 0.0)) throw SchemaError(join(path, "weight_variance"), "must be positive");
  return cfg;
}

inline Json to_json_value(const MutationSpaces& s) {
  Json kernels = Json::array();
  for (const auto& k : s.kernels) kernels.push_back(json_detail::kernel_json(k));
  Json targets = Json::array();
  for (auto t : s.targets) targets.push_back(to_string(t));
  return {{"kernels", kernels},
          {"expansion_ratios", s.expansion_ratios},
          {"channel_multipliers", s.channel_multipliers},
          {"depth_deltas", s.depth_deltas},
          {"channel_min", s.channel_min},
          {"channel_max", s.channel_max},
          {"channel_step", s.channel_step},
          {"targets", targets}};
}

inline MutationSpaces spaces_from_json(const Json& j, const std::string& path) {
  using namespace io_detail;
  json_detail::require_object(j, path);
  json_detail::reject_unknown(j, path, {"kernels", "expansion_ratios", "channel_multipliers",
                                        "depth_deltas", "channel_min", "channel_max",
                                        "channel_step", "targets"});
  MutationSpaces s;
  const auto number = [](const Json& v, const std::string& where) {
    if (!v.is_number()) throw SchemaError(where, "expected a number");
    return v.get<double>();
  };
  if (has(j, "kernels")) {
    s.kernels = get_list<Kernel3d>(j, "kernels", path, json_detail::parse_kernel);
  }
  if (has(j, "expansion_ratios")) s.expansion_ratios = get_list<double>(j, "expansion_ratios", path, number);
  if (has(j, "channel_multipliers")) {
    s.channel_multipliers = get_list<double>(j, "channel_multipliers", path, number);
  }
  if (has(j, "depth_deltas")) {
    s.depth_deltas = get_list<int>(j, "depth_deltas", path, [](const Json& v, const std::string& where) {
      if (!v.is_number_integer()) throw SchemaError(where, "expected an integer");
      return v.get<int>();
    });
  }
  if (has(j, "channel_min")) s.channel_min = json_detail::get_int(j, "channel_min", path);
  if (has(j, "channel_max")) s.channel_max = json_detail::get_int(j, "channel_max", path);
  if (has(j, "channel_step")) s.channel_step = json_detail::get_int(j, "channel_step", path);
  if (has(j, "targets")) {
    s.targets = get_list<MutationTarget>(j, "targets", path, [](const Json& v, const std::string& where) {
      if (!v.is_string()) throw SchemaError(where, "expected a string");
      return parse_target(v.get<std::string>(), where);
    });
  }
  return s;
}

/// Fully resolved configuration; `initial` is always an inline architecture.
inline Json to_json_value(const SearchConfig& cfg) {
  Json j;
  j["version"] = kSearchConfigVersion;
  j["initial"] = to_json_value(cfg.initial);
  j["budget_macs"] = cfg.budget_macs;
  j["max_depth"] = cfg.max_depth;
  j["population_size"] = cfg.population_size;
  j["iterations"] = cfg.iterations;
  j["seed"] = cfg.seed;
  j["spaces"] = to_json_value(cfg.spaces);
  j["score"] = to_json_value(cfg.score);
  j["mutate_stem_head_channels"] = cfg.mutate_stem_head_channels;
  j["select_with_replacement"] = cfg.select_with_replacement;
  j["warmup_iterations"] = cfg.warmup_iterations;
  j["warmup_budget_fraction"] = cfg.warmup_budget_fraction;
  j["batch_size"] = cfg.batch_size;
  j["history_stride"] = cfg.history_stride;
  return j;
}

/// Every key except `version` is optional; `initial` is a preset name or an
/// inline architecture object.
inline SearchConfig search_config_from_json(const Json& j) {
  using namespace io_detail;
  json_detail::require_object(j, "");
  json_detail::reject_unknown(
      j, "", {"version", "initial", "budget_macs", "max_depth", "population_size", "iterations",
              "seed", "spaces", "score", "mutate_stem_head_channels", "select_with_replacement",
              "warmup_iterations", "warmup_budget_fraction", "batch_size", "history_stride"});
  const int version = json_detail::get_int(j, "version", "");
  if (version != kSearchConfigVersion) {
    throw SchemaError("version", "unsupported config version " + std::to_string(version));
  }
  SearchConfig cfg;
  cfg.initial = presets::init_s();
  if (has(j, "initial")) {
    const Json& init = j.at("initial");
    if (init.is_string()) {
      auto preset = presets::by_name(init.get<std::string>());
      if (!preset) throw SchemaError("initial", "unknown preset name");
      cfg.initial = *preset;
    } else {
      try {
        cfg.initial = from_json_value(init);
      } catch (const SchemaError& e) {
        throw SchemaError(join("initial", e.path()), e.message());
      } catch (const InvariantError& e) {
        throw InvariantError(join("initial", e.path()), e.message());
      }
    }
  }
  if (has(j, "budget_macs")) cfg.budget_macs = get_u64(j, "budget_macs", "");
  if (has(j, "max_depth")) cfg.max_depth = get_u64(j, "max_depth", "");
  if (has(j, "population_size")) cfg.population_size = get_u64(j, "population_size", "");
  if (has(j, "iterations")) cfg.iterations = get_u64(j, "iterations", "");
  if (has(j, "seed")) cfg.seed = get_u64(j, "seed", "");
  if (has(j, "spaces")) cfg.spaces = spaces_from_json(j.at("spaces"), "spaces");
  if (has(j, "score")) cfg.score = score_config_from_json(j.at("score"), "score");
  if (has(j, "mutate_stem_head_channels")) {
    cfg.mutate_stem_head_channels = json_detail::get_bool(j, "mutate_stem_head_channels", "");
  }
  if (has(j, "select_with_replacement")) {
    cfg.select_with_replacement = json_detail::get_bool(j, "select_with_replacement", "");
  }
  if (has(j, "warmup_iterations")) cfg.warmup_iterations = get_u64(j, "warmup_iterations", "");
  if (has(j, "warmup_budget_fraction")) {
    cfg.warmup_budget_fraction = get_number(j, "warmup_budget_fraction", "");
  }
  if (has(j, "batch_size")) cfg.batch_size = get_u64(j, "batch_size", "");
  if (has(j, "history_stride")) cfg.history_stride = get_u64(j, "history_stride", "");
  return cfg;
}

inline SearchConfig parse_search_config(std::string_view text) {
  Json doc;
  try {
    doc = Json::parse(text.begin(), text.end());
  } catch (const Json::parse_error& e) {
    throw SchemaError("", std::string("invalid JSON: ") + e.what());
  }
  return search_config_from_json(doc);
}

// ---- reports ---------------------------------------------------------------

inline Json to_json_value(const ScoreBreakdown& b, bool with_layers) {
  Json j;
  j["metric"] = to_string(b.metric);
  j["log_base"] = to_string(b.log_base);
  j["total"] = b.total;
  j["layers"] = b.per_layer.size();
  if (with_layers) {
    Json layers = Json::array();
    for (const auto& t : b.per_layer) {
      layers.push_back({{"id", t.id},
                        {"kernel_volume", t.kernel_volume},
                        {"effective_in_channels", t.effective_in_channels},
                        {"refinement", t.refinement},
                        {"term", t.term}});
    }
    j["per_layer"] = std::move(layers);
  }
  return j;
}

/// Round-trippable decimal for CSV cells.
inline std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

inline std::string breakdown_csv(const ScoreBreakdown& b) {
  std::string out = "layer,kernel_volume,effective_in_channels,refinement,term\n";
  for (const auto& t : b.per_layer) {
    out += t.id + "," + std::to_string(t.kernel_volume) + "," +
           std::to_string(t.effective_in_channels) + "," + format_double(t.refinement) + "," +
           format_double(t.term) + "\n";
  }
  return out;
}

inline Json to_json_value(const CostReport& r) {
  Json layers = Json::array();
  for (const auto& l : r.per_layer) {
    layers.push_back({{"id", l.id}, {"macs", l.macs}, {"params", l.params}});
  }
  return {{"total_macs", r.total_macs},
          {"total_params", r.total_params},
          {"classifier_params", r.classifier_params},
          {"gflops", r.gflops()},
          {"gflops_2x", r.gflops_2x()},
          {"per_layer", std::move(layers)}};
}

namespace io_detail {
// JSON has no infinities; encode them as null.
inline Json finite_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }
}  // namespace io_detail

inline Json to_json_value(const SimReport& r) {
  using io_detail::finite_or_null;
  return {{"empirical_mean", finite_or_null(r.empirical_mean)},
          {"mean_stderr", finite_or_null(r.mean_stderr)},
          {"empirical_variance", finite_or_null(r.empirical_variance)},
          {"analytic_variance", finite_or_null(r.analytic_variance)},
          {"empirical_log_variance", finite_or_null(r.empirical_log_variance)},
          {"analytic_log_variance", finite_or_null(r.analytic_log_variance)},
          {"relative_error", finite_or_null(r.relative_error)},
          {"variance_relative_error", finite_or_null(r.variance_relative_error)},
          {"samples_used", r.samples_used},
          {"elements_per_sample", r.elements_per_sample},
          {"rng", r.rng}};
}

inline std::string history_csv(const SearchResult& r) {
  std::string out = "iteration,best_score,pop_size,accepted,rejected\n";
  for (const auto& h : r.history) {
    out += std::to_string(h.iteration) + "," + format_double(h.best_score) + "," +
           std::to_string(h.population) + "," + std::to_string(h.accepted) + "," +
           std::to_string(h.rejected) + "\n";
  }
  return out;
}

}  // namespace e3d

#pragma once

// Maximum-entropy evolutionary search.
//
// The population starts as {initial}. Each iteration picks a parent uniformly,
// mutates two randomly chosen stages, and admits the child if it fits the MAC
// budget and the depth limit. Whenever the population exceeds its size bound
// the lowest-scoring member is dropped (ties: the youngest goes first), so the
// best member is never culled.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/random/uniform_int_distribution.hpp>

#include "e3dnas/arch.hpp"
#include "e3dnas/cost.hpp"
#include "e3dnas/entropy.hpp"
#include "e3dnas/parallel.hpp"

namespace e3d {

enum class MutationTarget { Kernel, Output, Bottleneck, Layers };

inline const char* to_string(MutationTarget t) {
  switch (t) {
    case MutationTarget::Kernel: return "kernel";
    case MutationTarget::Output: return "output";
    case MutationTarget::Bottleneck: return "bottleneck";
    case MutationTarget::Layers: return "layers";
  }
  return "?";
}

struct MutationSpaces {
  std::vector<Kernel3d> kernels{{1, 3, 3}, {1, 5, 5}, {3, 3, 3}};
  std::vector<double> expansion_ratios{1.5, 2.0, 2.5, 3.0, 3.5, 4.0};
  std::vector<double> channel_multipliers{2.0, 1.5, 1.25, 0.8, 0.6, 0.5};
  std::vector<int> depth_deltas{-2, -1, 1, 2};
  int channel_min = kChannelMin;
  int channel_max = kChannelMax;
  int channel_step = kChannelStep;
  // Which of the four per-stage mutations may be drawn.
  std::vector<MutationTarget> targets{MutationTarget::Kernel, MutationTarget::Output,
                                      MutationTarget::Bottleneck, MutationTarget::Layers};

  friend bool operator==(const MutationSpaces&, const MutationSpaces&) = default;
};

struct MutationOptions {
  bool mutate_stem_head_channels = true;
  bool select_with_replacement = true;
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline void validate(const MutationSpaces& spaces) {
  if (spaces.kernels.empty()) throw ConfigError("spaces.kernels is empty");
  if (spaces.expansion_ratios.empty()) throw ConfigError("spaces.expansion_ratios is empty");
  if (spaces.channel_multipliers.empty()) throw ConfigError("spaces.channel_multipliers is empty");
  if (spaces.depth_deltas.empty()) throw ConfigError("spaces.depth_deltas is empty");
  if (spaces.targets.empty()) throw ConfigError("spaces.targets is empty");
  for (double m : spaces.channel_multipliers) {
    if (!(m > 0.0)) throw ConfigError("spaces.channel_multipliers must be positive");
  }
  for (double r : spaces.expansion_ratios) {
    if (!(r > 0.0)) throw ConfigError("spaces.expansion_ratios must be positive");
  }
  if (spaces.channel_step < 1 || spaces.channel_min < spaces.channel_step ||
      spaces.channel_max < spaces.channel_min || spaces.channel_min % spaces.channel_step != 0 ||
      spaces.channel_max % spaces.channel_step != 0) {
    throw ConfigError("spaces.channel_min/max/step are inconsistent");
  }
  for (const auto& k : spaces.kernels) {
    try {
      detail::check_kernel(k, "spaces.kernels");
    } catch (const SpecError& e) {
      throw ConfigError(e.what());
    }
  }
}

/// Nearest multiple of `step`, clamped into [min, max].
inline int snap_channels(double value, const MutationSpaces& spaces) {
  const auto steps = std::lround(value / spaces.channel_step);
  const long snapped = steps * spaces.channel_step;
  return static_cast<int>(std::clamp<long>(snapped, spaces.channel_min, spaces.channel_max));
}

using SearchRng = std::mt19937_64;

namespace search_detail {

inline std::size_t pick(SearchRng& rng, std::size_t n) {
  boost::random::uniform_int_distribution<std::size_t> dist(0, n - 1);
  return dist(rng);
}

template <typename T>
const T& pick_from(SearchRng& rng, const std::vector<T>& v) {
  return v[pick(rng, v.size())];
}

inline int stage_input_channels(const NetworkSpec& net, std::size_t stage) {
  return stage == 0 ? net.stem.out_channels : net.stages[stage - 1].blocks.back().out_channels;
}

inline void mutate_stage(NetworkSpec& net, std::size_t s, const MutationSpaces& spaces,
                         SearchRng& rng) {
  Stage& stage = net.stages[s];
  switch (pick_from(rng, spaces.targets)) {
    case MutationTarget::Kernel: {
      const Kernel3d k = pick_from(rng, spaces.kernels);
      for (auto& b : stage.blocks) b.dw_kernel = k;
      break;
    }
    case MutationTarget::Output: {
      const double m = pick_from(rng, spaces.channel_multipliers);
      const int out = snap_channels(stage.blocks.back().out_channels * m, spaces);
      for (auto& b : stage.blocks) b.out_channels = out;
      break;
    }
    case MutationTarget::Bottleneck: {
      const double r = pick_from(rng, spaces.expansion_ratios);
      const int hidden = snap_channels(r * stage_input_channels(net, s), spaces);
      for (auto& b : stage.blocks) b.bottleneck_channels = hidden;
      break;
    }
    case MutationTarget::Layers: {
      const int delta = pick_from(rng, spaces.depth_deltas);
      const long target = std::max<long>(1, static_cast<long>(stage.blocks.size()) + delta);
      Block extra = stage.blocks.back();
      extra.downsample = false;
      stage.blocks.resize(static_cast<std::size_t>(target), extra);
      break;
    }
  }
}

}  // namespace search_detail

/// Mutates two selected slots. Slots are the stages, plus the stem and head
/// (channel scaling only) when mutate_stem_head_channels is set. The result
/// is always a valid NetworkSpec.
inline NetworkSpec mutate(const NetworkSpec& net, const MutationSpaces& spaces,
                          SearchRng& rng, const MutationOptions& opts = {}) {
  NetworkSpec child = net;
  const std::size_t stages = child.stages.size();
  const std::size_t slots = stages + (opts.mutate_stem_head_channels ? 2 : 0);
  if (slots == 0) return child;

  std::size_t chosen[2];
  chosen[0] = search_detail::pick(rng, slots);
  if (opts.select_with_replacement || slots == 1) {
    chosen[1] = search_detail::pick(rng, slots);
  } else {
    chosen[1] = search_detail::pick(rng, slots - 1);
    if (chosen[1] >= chosen[0]) ++chosen[1];
  }
  for (std::size_t slot : chosen) {
    if (slot < stages) {
      search_detail::mutate_stage(child, slot, spaces, rng);
    } else {
      int& width = slot == stages ? child.stem.out_channels : child.head.out_channels;
      width = snap_channels(width * search_detail::pick_from(rng, spaces.channel_multipliers),
                            spaces);
    }
  }
  return child;
}

struct SearchConfig {
  std::uint64_t budget_macs = 1'900'000'000ULL;
  std::size_t max_depth = 200;
  std::size_t population_size = 512;
  std::size_t iterations = 500'000;
  MutationSpaces spaces;
  std::uint64_t seed = 0;
  NetworkSpec initial;
  ScoreConfig score;
  bool mutate_stem_head_channels = true;
  bool select_with_replacement = true;
  // Warm-up iterations run first against budget * warmup_budget_fraction.
  std::size_t warmup_iterations = 0;
  double warmup_budget_fraction = 1.0 / 3.0;
  // Children mutated per step; scoring of a batch may run concurrently.
  std::size_t batch_size = 1;
  unsigned threads = 1;
  // Record a history row every this many iterations (and at the end).
  std::size_t history_stride = 100;
};

struct Candidate {
  NetworkSpec net;
  double st_score = 0.0;
  std::uint64_t macs = 0;
  std::size_t birth_iteration = 0;
};

struct HistoryEntry {
  std::size_t iteration = 0;
  double best_score = 0.0;
  std::size_t population = 0;
  std::size_t accepted = 0;
  std::size_t rejected = 0;
};

struct SearchResult {
  Candidate best;
  std::vector<Candidate> population;  // survivors at the end of the run
  std::vector<HistoryEntry> history;
  std::size_t accepted = 0;
  std::size_t rejected = 0;
};

inline Candidate make_candidate(NetworkSpec net, const ScoreConfig& cfg, std::size_t birth) {
  Candidate c;
  c.macs = total_macs(net);
  c.st_score = score_total(net, Metric::STEntr, cfg);
  c.net = std::move(net);
  c.birth_iteration = birth;
  return c;
}

inline void validate(const SearchConfig& cfg) {
  validate(cfg.spaces);
  if (cfg.budget_macs == 0) throw ConfigError("budget_macs must be positive");
  if (cfg.max_depth == 0) throw ConfigError("max_depth must be positive");
  if (cfg.population_size == 0) throw ConfigError("population_size must be positive");
  if (cfg.batch_size == 0) throw ConfigError("batch_size must be positive");
  if (cfg.history_stride == 0) throw ConfigError("history_stride must be positive");
  if (!(cfg.warmup_budget_fraction > 0.0 && cfg.warmup_budget_fraction <= 1.0)) {
    throw ConfigError("warmup_budget_fraction must be in (0, 1]");
  }
  try {
    validate(cfg.initial);
  } catch (const SpecError& e) {
    throw ConfigError(std::string("initial: ") + e.what());
  }
  if (depth(cfg.initial) > cfg.max_depth) {
    throw ConfigError("initial network exceeds max_depth");
  }
  const auto macs = total_macs(cfg.initial);
  if (macs > cfg.budget_macs) throw ConfigError("initial network exceeds budget_macs");
  if (cfg.warmup_iterations > 0 &&
      static_cast<double>(macs) > cfg.budget_macs * cfg.warmup_budget_fraction) {
    throw ConfigError("initial network exceeds the warm-up budget");
  }
}

namespace search_detail {

// Higher score wins; among equal scores the older candidate wins.
inline bool better(const Candidate& a, const Candidate& b) {
  if (a.st_score != b.st_score) return a.st_score > b.st_score;
  return a.birth_iteration < b.birth_iteration;
}

inline void cull(std::vector<Candidate>& population, std::size_t bound) {
  while (population.size() > bound) {
    auto worst = population.begin();
    for (auto it = population.begin() + 1; it != population.end(); ++it) {
      if (better(*worst, *it)) worst = it;
    }
    population.erase(worst);
  }
}

}  // namespace search_detail

inline SearchResult evolve(const SearchConfig& cfg) {
  validate(cfg);
  SearchRng rng(cfg.seed);
  const MutationOptions mopts{cfg.mutate_stem_head_channels, cfg.select_with_replacement};

  std::vector<Candidate> population;
  population.reserve(cfg.population_size + cfg.batch_size);
  population.push_back(make_candidate(cfg.initial, cfg.score, 0));

  SearchResult result;
  result.best = population.front();

  const std::size_t total = cfg.warmup_iterations + cfg.iterations;
  const auto warmup_budget = static_cast<std::uint64_t>(
      std::floor(static_cast<double>(cfg.budget_macs) * cfg.warmup_budget_fraction));

  struct Child {
    NetworkSpec net;
    std::size_t iteration = 0;
    std::uint64_t budget = 0;
    bool admitted = false;
    Candidate candidate;
  };
  std::vector<Child> batch;

  std::size_t m = 0;
  while (m < total) {
    const std::size_t width = std::min(cfg.batch_size, total - m);
    batch.clear();
    for (std::size_t i = 0; i < width; ++i) {
      const std::size_t iteration = m + i + 1;
      const Candidate& parent = population[search_detail::pick(rng, population.size())];
      Child child;
      child.net = mutate(parent.net, cfg.spaces, rng, mopts);
      child.iteration = iteration;
      child.budget = iteration <= cfg.warmup_iterations ? warmup_budget : cfg.budget_macs;
      batch.push_back(std::move(child));
    }
    parallel_for(batch.size(), cfg.threads, [&](std::size_t i) {
      Child& child = batch[i];
      if (depth(child.net) > cfg.max_depth) return;
      const auto macs = total_macs(child.net);
      if (macs > child.budget) return;
      child.candidate = make_candidate(child.net, cfg.score, child.iteration);
      child.admitted = true;
    });
    for (auto& child : batch) {
      if (child.admitted) {
        ++result.accepted;
        if (search_detail::better(child.candidate, result.best)) result.best = child.candidate;
        population.push_back(std::move(child.candidate));
      } else {
        ++result.rejected;
      }
      search_detail::cull(population, cfg.population_size);
      if (child.iteration % cfg.history_stride == 0 || child.iteration == total) {
        result.history.push_back({child.iteration, result.best.st_score, population.size(),
                                  result.accepted, result.rejected});
      }
    }
    m += width;
  }
  result.population = std::move(population);
  return result;
}

}  // namespace e3d

#pragma once

// Analytic entropy scores of a conv chain.
//
// Under zero-mean Gaussian inputs and weights, and with no bias, activation or
// normalization, the variance of an output element is the product over layers
// of (kernel volume x input channels x weight variance); depthwise layers count
// one input channel. The Gaussian entropy bound is proportional to the log of
// that variance, so the homogeneous score is
//
//   sum_l log(Kt*Kh*Kw * C_in * var_w)
//
// The spatio-temporal score multiplies each term (inside the log) by a
// refinement factor -log(1 - cos(S, K)) between the layer's input feature-map
// size S = [T, H, W] and its kernel size K = [Kt, Kh, Kw].

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "e3dnas/arch.hpp"

namespace e3d {

enum class LogBase { Natural, Base10 };
enum class Metric { Homo, STEntr };
enum class RefinementScope { AllLayers, DepthwiseOnly };

inline const char* to_string(LogBase b) { return b == LogBase::Natural ? "e" : "10"; }
inline const char* to_string(Metric m) { return m == Metric::Homo ? "homo" : "st"; }
inline const char* to_string(RefinementScope s) {
  return s == RefinementScope::AllLayers ? "all" : "depthwise";
}

inline double log_in(double x, LogBase base) {
  return base == LogBase::Natural ? std::log(x) : std::log10(x);
}

inline constexpr double kDefaultEpsilon = 1e-6;

/// Defaults are the calibrated combination (see calibrate()).
struct ScoreConfig {
  LogBase log_base = LogBase::Base10;
  LogBase refinement_log_base = LogBase::Natural;
  double epsilon = kDefaultEpsilon;
  bool include_classifier = false;
  RefinementScope refinement_scope = RefinementScope::AllLayers;
  // Per-layer weight variance; 1 for standard Gaussian initialization.
  double weight_variance = 1.0;

  friend bool operator==(const ScoreConfig&, const ScoreConfig&) = default;
};

struct LayerTerm {
  std::string id;
  std::int64_t kernel_volume = 1;
  int effective_in_channels = 1;
  double refinement = 1.0;
  double term = 0.0;
};

struct ScoreBreakdown {
  Metric metric = Metric::STEntr;
  LogBase log_base = LogBase::Base10;
  std::vector<LayerTerm> per_layer;
  double total = 0.0;
};

inline double cosine_similarity(const Shape3d& s, const Kernel3d& k) {
  const double st = s.frames, sh = s.height, sw = s.width;
  const double kt = k.t, kh = k.h, kw = k.w;
  const double dot = st * kt + sh * kh + sw * kw;
  const double ns = std::sqrt(st * st + sh * sh + sw * sw);
  const double nk = std::sqrt(kt * kt + kh * kh + kw * kw);
  return dot / (ns * nk);
}

/// -log(max(eps, 1 - cos(S, K))); parallel vectors give -log(eps).
inline double refinement(const Shape3d& s, const Kernel3d& k, LogBase base,
                         double epsilon = kDefaultEpsilon) {
  const double distance = 1.0 - cosine_similarity(s, k);
  return -log_in(std::max(epsilon, distance), base);
}

inline int effective_in_channels(const ConvLayer& layer) {
  return layer.kind == ConvKind::Depthwise ? 1 : layer.in_channels;
}

inline double layer_term(std::int64_t kernel_volume, int in_channels,
                         double weight_variance, double refinement_factor,
                         LogBase base) {
  return log_in(static_cast<double>(kernel_volume) * in_channels *
                    weight_variance * refinement_factor,
                base);
}

namespace entropy_detail {

inline bool refines(const ConvLayer& layer, const ScoreConfig& cfg) {
  return cfg.refinement_scope == RefinementScope::AllLayers ||
         layer.kind == ConvKind::Depthwise;
}

// Shared by the breakdown and the total-only path so both sum identical terms
// in identical order.
template <typename Visit>
void for_each_term(const ConvChain& chain, Metric metric,
                   const ScoreConfig& cfg, Visit&& visit) {
  Shape3d current = chain.input;
  for (const auto& layer : chain.layers) {
    const Shape3d in = layer.pooled_input ? Shape3d{1, 1, 1} : current;
    double factor = 1.0;
    if (metric == Metric::STEntr && refines(layer, cfg)) {
      factor = refinement(in, layer.kernel, cfg.refinement_log_base, cfg.epsilon);
    }
    const int channels = effective_in_channels(layer);
    const double term = layer_term(layer.kernel.volume(), channels,
                                   cfg.weight_variance, factor, cfg.log_base);
    visit(layer, channels, factor, term);
    current = same_padding_output(in, layer.spatial_stride, layer.temporal_stride);
  }
}

}  // namespace entropy_detail

inline ScoreBreakdown score(const ConvChain& chain, Metric metric,
                            const ScoreConfig& cfg = {}) {
  ScoreBreakdown out;
  out.metric = metric;
  out.log_base = cfg.log_base;
  out.per_layer.reserve(chain.layers.size());
  entropy_detail::for_each_term(
      chain, metric, cfg,
      [&](const ConvLayer& layer, int channels, double factor, double term) {
        out.per_layer.push_back(
            {layer.id, layer.kernel.volume(), channels, factor, term});
        out.total += term;
      });
  return out;
}

inline ScoreBreakdown score(const NetworkSpec& net, Metric metric,
                            const ScoreConfig& cfg = {}) {
  return score(to_chain(net, {cfg.include_classifier}), metric, cfg);
}

inline ScoreBreakdown homo_score(const ConvChain& chain, const ScoreConfig& cfg = {}) {
  return score(chain, Metric::Homo, cfg);
}
inline ScoreBreakdown homo_score(const NetworkSpec& net, const ScoreConfig& cfg = {}) {
  return score(net, Metric::Homo, cfg);
}
inline ScoreBreakdown st_score(const ConvChain& chain, const ScoreConfig& cfg = {}) {
  return score(chain, Metric::STEntr, cfg);
}
inline ScoreBreakdown st_score(const NetworkSpec& net, const ScoreConfig& cfg = {}) {
  return score(net, Metric::STEntr, cfg);
}

/// Same value as score(...).total without materializing the breakdown.
inline double score_total(const NetworkSpec& net, Metric metric,
                          const ScoreConfig& cfg = {}) {
  double total = 0.0;
  entropy_detail::for_each_term(
      to_chain(net, {cfg.include_classifier}), metric, cfg,
      [&](const ConvLayer&, int, double, double term) { total += term; });
  return total;
}

struct CalibrationCandidate {
  ScoreConfig config;
  double score = 0.0;
  double relative_error = 0.0;
};

/// Scores `net` under every combination of log bases, counted layer set and
/// refinement scope; returns them ordered by closeness to `target`.
inline std::vector<CalibrationCandidate> calibrate(const NetworkSpec& net,
                                                   double target) {
  std::vector<CalibrationCandidate> out;
  for (auto base : {LogBase::Base10, LogBase::Natural}) {
    for (auto inner : {LogBase::Natural, LogBase::Base10}) {
      for (bool classifier : {false, true}) {
        for (auto scope : {RefinementScope::AllLayers, RefinementScope::DepthwiseOnly}) {
          ScoreConfig cfg;
          cfg.log_base = base;
          cfg.refinement_log_base = inner;
          cfg.include_classifier = classifier;
          cfg.refinement_scope = scope;
          const double s = score_total(net, Metric::STEntr, cfg);
          out.push_back({cfg, s, std::abs(s - target) / std::abs(target)});
        }
      }
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.relative_error < b.relative_error;
  });
  return out;
}

}  // namespace e3d

#pragma once

// Monte-Carlo forward inference over Gaussian inputs and weights.
//
// Each draw samples a fresh N(0, 1) input and fresh N(0, weight_std^2)
// weights, runs the conv chain densely (zero bias, no activation), and pools
// the final feature map into first and second moments. The pooled variance is
// compared against the closed-form product of per-layer fan-ins.
//
// With Pooling::Interior only output elements whose receptive field never
// touches zero padding are pooled, and only the region feeding them is
// computed. Pooling::Center keeps just the most central of those elements,
// which makes each draw much cheaper on wide inputs.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <boost/random/normal_distribution.hpp>
#include <boost/random/mersenne_twister.hpp>

#include "e3dnas/arch.hpp"
#include "e3dnas/entropy.hpp"
#include "e3dnas/parallel.hpp"

namespace e3d {

enum class Padding { Same, Valid };
enum class Pooling { Interior, All, Center };

inline const char* to_string(Padding p) { return p == Padding::Same ? "same" : "valid"; }
inline const char* to_string(Pooling p) {
  switch (p) {
    case Pooling::Interior: return "interior";
    case Pooling::All: return "all";
    case Pooling::Center: return "center";
  }
  return "?";
}

inline constexpr const char* kOracleRng =
    "mt19937_64 per draw, seeded splitmix64(seed, draw); boost ziggurat normal";

struct SimConfig {
  std::size_t samples = 1000;
  std::uint64_t seed = 0;
  double weight_std = 1.0;
  Padding padding = Padding::Same;
  Pooling pooling = Pooling::Interior;
  LogBase log_base = LogBase::Natural;
  // Cap on input + activations + weights held per draw.
  std::size_t max_elements = std::size_t{1} << 26;
  unsigned threads = 1;
};

struct SimReport {
  double empirical_mean = 0.0;
  double mean_stderr = 0.0;
  double empirical_variance = 0.0;
  double analytic_variance = 0.0;
  double empirical_log_variance = 0.0;
  double analytic_log_variance = 0.0;
  double relative_error = 0.0;           // on log-variance
  double variance_relative_error = 0.0;  // on variance
  std::size_t samples_used = 0;
  std::size_t elements_per_sample = 0;
  std::string rng = kOracleRng;
};

struct MomentCheck {
  double mean = 0.0;
  double mean_stderr = 0.0;
  double variance = 0.0;
  double analytic_variance = 0.0;
};

class OracleError : public SpecError {
 public:
  using SpecError::SpecError;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t draw_seed(std::uint64_t seed, std::uint64_t draw) {
  return splitmix64(splitmix64(seed) ^ splitmix64(draw + 0x632be59bd9b4e019ULL));
}

namespace oracle_detail {

struct Range {
  long lo = 0;
  long hi = -1;  // inclusive; empty when hi < lo
  bool empty() const { return hi < lo; }
  long size() const { return empty() ? 0 : hi - lo + 1; }
};

inline long floor_div(long a, long b) {
  long q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}
inline long ceil_div(long a, long b) { return -floor_div(-a, b); }

// Geometry of one layer along one axis.
struct Axis {
  long in = 1, out = 1, kernel = 1, stride = 1, pad = 0;

  Range taps_of(const Range& outputs) const {
    if (outputs.empty()) return {};
    return {std::max(0L, outputs.lo * stride - pad),
            std::min(in - 1, outputs.hi * stride - pad + kernel - 1)};
  }
  Range supported_by(const Range& inputs) const {
    if (inputs.empty()) return {};
    Range r{ceil_div(inputs.lo + pad, stride),
            floor_div(inputs.hi + pad - kernel + 1, stride)};
    r.lo = std::max(r.lo, 0L);
    r.hi = std::min(r.hi, out - 1);
    return r;
  }
};

inline Axis make_axis(long in, long kernel, long stride, Padding padding,
                      const std::string& id) {
  Axis a{in, 0, kernel, stride, 0};
  if (padding == Padding::Same) {
    a.out = (in + stride - 1) / stride;
    a.pad = std::max(0L, (a.out - 1) * stride + kernel - in) / 2;
  } else {
    if (in < kernel) throw ShapeError(id, "valid padding leaves no output");
    a.out = (in - kernel) / stride + 1;
  }
  return a;
}

struct Box {
  Range t, h, w;
  bool empty() const { return t.empty() || h.empty() || w.empty(); }
  long elements() const { return t.size() * h.size() * w.size(); }
};

struct LayerPlan {
  const ConvLayer* layer = nullptr;
  Axis t, h, w;
  Box needed;  // output positions that must be computed
};

struct Plan {
  Shape3d input;
  int input_channels = 1;
  std::vector<LayerPlan> layers;
  Box pooled;
  std::size_t elements_per_draw = 0;
};

inline Plan make_plan(const ConvChain& chain, const SimConfig& cfg) {
  validate(chain);
  if (chain.layers.empty()) throw OracleError("", "chain has no layers");
  Plan plan;
  plan.input = chain.input;
  plan.input_channels = chain.input_channels;

  Shape3d shape = chain.input;
  Box support{{0, shape.frames - 1}, {0, shape.height - 1}, {0, shape.width - 1}};
  std::size_t total = static_cast<std::size_t>(shape.elements()) * chain.input_channels;
  if (total > cfg.max_elements) {
    throw OracleError("input", "tensor exceeds the element cap");
  }
  for (const auto& layer : chain.layers) {
    if (layer.pooled_input) {
      throw OracleError(layer.id, "global pooling is not simulated");
    }
    LayerPlan lp;
    lp.layer = &layer;
    lp.t = make_axis(shape.frames, layer.kernel.t, layer.temporal_stride, cfg.padding, layer.id);
    lp.h = make_axis(shape.height, layer.kernel.h, layer.spatial_stride, cfg.padding, layer.id);
    lp.w = make_axis(shape.width, layer.kernel.w, layer.spatial_stride, cfg.padding, layer.id);
    support = {lp.t.supported_by(support.t), lp.h.supported_by(support.h),
               lp.w.supported_by(support.w)};
    shape = {static_cast<int>(lp.t.out), static_cast<int>(lp.h.out),
             static_cast<int>(lp.w.out)};

    const auto weights = static_cast<std::size_t>(layer.kernel.volume()) *
                         (layer.in_channels / layer.groups()) * layer.out_channels;
    total += weights;
    if (total > cfg.max_elements) {
      throw OracleError(layer.id + ".weights", "tensor exceeds the element cap");
    }
    total += static_cast<std::size_t>(shape.elements()) * layer.out_channels;
    if (total > cfg.max_elements) {
      throw OracleError(layer.id + ".output", "tensor exceeds the element cap");
    }
    plan.layers.push_back(lp);
  }
  plan.elements_per_draw = total;

  if (cfg.pooling == Pooling::Interior) {
    plan.pooled = support;
  } else if (cfg.pooling == Pooling::Center) {
    const auto mid = [](const Range& r) { return Range{(r.lo + r.hi) / 2, (r.lo + r.hi) / 2}; };
    plan.pooled = support.empty() ? support : Box{mid(support.t), mid(support.h), mid(support.w)};
  } else {
    plan.pooled = {{0, shape.frames - 1}, {0, shape.height - 1}, {0, shape.width - 1}};
  }
  if (plan.pooled.empty()) {
    throw ShapeError(chain.layers.back().id,
                     "no output element is free of padding effects");
  }
  Box needed = plan.pooled;
  for (auto it = plan.layers.rbegin(); it != plan.layers.rend(); ++it) {
    it->needed = needed;
    needed = {it->t.taps_of(needed.t), it->h.taps_of(needed.h), it->w.taps_of(needed.w)};
  }
  return plan;
}

struct DrawMoments {
  double sum = 0.0;
  double sum_sq = 0.0;
};

class Tensor {
 public:
  Tensor(long t, long h, long w, long c)
      : h_(h), w_(w), c_(c), data_(static_cast<std::size_t>(t * h * w * c), 0.0) {}

  double* at(long t, long h, long w) { return data_.data() + ((t * h_ + h) * w_ + w) * c_; }
  const double* at(long t, long h, long w) const {
    return data_.data() + ((t * h_ + h) * w_ + w) * c_;
  }
  std::vector<double>& raw() { return data_; }

 private:
  long h_, w_, c_;
  std::vector<double> data_;
};

template <typename Engine>
void fill_normal(std::vector<double>& v, double scale, Engine& rng) {
  boost::random::normal_distribution<double> normal(0.0, 1.0);
  for (auto& x : v) x = scale * normal(rng);
}

template <typename Engine>
Tensor run_layer(const LayerPlan& lp, const Tensor& input, double weight_std,
                 Engine& rng) {
  const ConvLayer& layer = *lp.layer;
  const long cin = layer.in_channels;
  const long cout = layer.out_channels;
  const bool depthwise = layer.kind == ConvKind::Depthwise;
  const long taps = layer.kernel.volume();

  // Regular: [tap][cin][cout]; depthwise: [tap][c].
  std::vector<double> weights(static_cast<std::size_t>(taps * (depthwise ? cin : cin * cout)));
  fill_normal(weights, weight_std, rng);

  Tensor out(lp.t.out, lp.h.out, lp.w.out, cout);
  const Box& box = lp.needed;
  for (long ot = box.t.lo; ot <= box.t.hi; ++ot) {
    for (long oh = box.h.lo; oh <= box.h.hi; ++oh) {
      for (long ow = box.w.lo; ow <= box.w.hi; ++ow) {
        double* __restrict acc = out.at(ot, oh, ow);
        long tap = 0;
        for (long kt = 0; kt < lp.t.kernel; ++kt) {
          const long it = ot * lp.t.stride - lp.t.pad + kt;
          for (long kh = 0; kh < lp.h.kernel; ++kh) {
            const long ih = oh * lp.h.stride - lp.h.pad + kh;
            for (long kw = 0; kw < lp.w.kernel; ++kw, ++tap) {
              const long iw = ow * lp.w.stride - lp.w.pad + kw;
              if (it < 0 || it >= lp.t.in || ih < 0 || ih >= lp.h.in || iw < 0 ||
                  iw >= lp.w.in) {
                continue;
              }
              const double* __restrict x = input.at(it, ih, iw);
              if (depthwise) {
                const double* __restrict w = weights.data() + tap * cin;
                for (long c = 0; c < cin; ++c) acc[c] += x[c] * w[c];
              } else {
                const double* w = weights.data() + tap * cin * cout;
                for (long ci = 0; ci < cin; ++ci) {
                  const double a = x[ci];
                  const double* __restrict wrow = w + ci * cout;
                  for (long co = 0; co < cout; ++co) acc[co] += a * wrow[co];
                }
              }
            }
          }
        }
      }
    }
  }
  return out;
}

inline DrawMoments run_draw(const Plan& plan, const SimConfig& cfg, std::uint64_t draw) {
  boost::random::mt19937_64 rng(draw_seed(cfg.seed, draw));
  Tensor x(plan.input.frames, plan.input.height, plan.input.width, plan.input_channels);
  fill_normal(x.raw(), 1.0, rng);
  for (const auto& lp : plan.layers) x = run_layer(lp, x, cfg.weight_std, rng);

  const long channels = plan.layers.back().layer->out_channels;
  DrawMoments m;
  const Box& b = plan.pooled;
  for (long t = b.t.lo; t <= b.t.hi; ++t) {
    for (long h = b.h.lo; h <= b.h.hi; ++h) {
      for (long w = b.w.lo; w <= b.w.hi; ++w) {
        const double* v = x.at(t, h, w);
        for (long c = 0; c < channels; ++c) {
          m.sum += v[c];
          m.sum_sq += v[c] * v[c];
        }
      }
    }
  }
  return m;
}

}  // namespace oracle_detail

/// Closed-form output variance: product of kernel volume x effective input
/// channels x weight variance over all layers.
inline double analytic_variance(const ConvChain& chain, double weight_std) {
  double v = 1.0;
  for (const auto& layer : chain.layers) {
    v *= static_cast<double>(layer.kernel.volume()) * effective_in_channels(layer) *
         weight_std * weight_std;
  }
  return v;
}

inline SimReport simulate(const ConvChain& chain, const SimConfig& cfg) {
  if (cfg.samples < 2) throw OracleError("samples", "at least two draws are required");
  if (!(cfg.weight_std >= 0.0)) throw OracleError("weight_std", "must be >= 0");
  const auto plan = oracle_detail::make_plan(chain, cfg);

  std::vector<oracle_detail::DrawMoments> draws(cfg.samples);
  parallel_for(cfg.samples, cfg.threads, [&](std::size_t i) {
    draws[i] = oracle_detail::run_draw(plan, cfg, i);
  });

  const long per_draw = plan.pooled.elements() * plan.layers.back().layer->out_channels;
  const double n = static_cast<double>(per_draw) * static_cast<double>(cfg.samples);
  double sum = 0.0, sum_sq = 0.0;
  for (const auto& d : draws) {
    sum += d.sum;
    sum_sq += d.sum_sq;
  }
  SimReport r;
  r.samples_used = cfg.samples;
  r.elements_per_sample = static_cast<std::size_t>(per_draw);
  r.empirical_mean = sum / n;
  r.empirical_variance = std::max(0.0, (sum_sq - sum * r.empirical_mean) / (n - 1.0));

  // Per-draw means are independent; pooled elements within a draw are not.
  double dev = 0.0;
  for (const auto& d : draws) {
    const double m = d.sum / static_cast<double>(per_draw) - r.empirical_mean;
    dev += m * m;
  }
  const double draws_n = static_cast<double>(cfg.samples);
  r.mean_stderr = std::sqrt(dev / (draws_n - 1.0) / draws_n);

  ScoreConfig score_cfg;
  score_cfg.log_base = cfg.log_base;
  score_cfg.weight_variance = cfg.weight_std * cfg.weight_std;
  r.analytic_variance = analytic_variance(chain, cfg.weight_std);
  r.analytic_log_variance = homo_score(chain, score_cfg).total;
  r.empirical_log_variance = log_in(r.empirical_variance, cfg.log_base);

  const auto rel = [](double e, double a) {
    return e == a ? 0.0 : std::abs(e - a) / std::abs(a);
  };
  r.relative_error = rel(r.empirical_log_variance, r.analytic_log_variance);
  r.variance_relative_error = rel(r.empirical_variance, r.analytic_variance);
  return r;
}

inline SimReport simulate(const NetworkSpec& net, const SimConfig& cfg) {
  return simulate(to_chain(net), cfg);
}

/// First two moments of a single layer's output under Gaussian input.
inline MomentCheck moment_check(const ConvLayer& layer, const Shape3d& input,
                                const SimConfig& cfg) {
  ConvChain chain{input, layer.in_channels, {layer}};
  const auto r = simulate(chain, cfg);
  return {r.empirical_mean, r.mean_stderr, r.empirical_variance, r.analytic_variance};
}

}  // namespace e3d

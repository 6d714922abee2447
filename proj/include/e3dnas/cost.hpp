#pragma once

// MAC and parameter counting. One multiply-accumulate is counted as one FLOP
// for budgeting; the 2x convention is reported alongside.

#include <cstdint>
#include <string>
#include <vector>

#include "e3dnas/arch.hpp"

namespace e3d {

struct LayerCost {
  std::string id;
  std::uint64_t macs = 0;
  std::uint64_t params = 0;
};

struct CostReport {
  std::vector<LayerCost> per_layer;
  std::uint64_t total_macs = 0;
  std::uint64_t total_params = 0;
  // Parameters of the two classifier layers, reported even when they are not
  // part of per_layer.
  std::uint64_t classifier_params = 0;

  double gflops() const { return static_cast<double>(total_macs) / 1e9; }
  double gflops_2x() const { return 2.0 * gflops(); }
};

inline std::uint64_t layer_params(const ConvLayer& layer) {
  return static_cast<std::uint64_t>(layer.kernel.volume()) *
         static_cast<std::uint64_t>(layer.in_channels / layer.groups()) *
         static_cast<std::uint64_t>(layer.out_channels);
}

inline std::uint64_t layer_macs(const ConvLayer& layer, const Shape3d& output) {
  return layer_params(layer) * static_cast<std::uint64_t>(output.elements());
}

inline CostReport cost(const ConvChain& chain) {
  const auto shapes = propagate_shapes(chain);
  CostReport report;
  report.per_layer.reserve(chain.layers.size());
  for (std::size_t i = 0; i < chain.layers.size(); ++i) {
    const auto& layer = chain.layers[i];
    LayerCost entry{layer.id, layer_macs(layer, shapes[i].output),
                    layer_params(layer)};
    report.total_macs += entry.macs;
    report.total_params += entry.params;
    report.per_layer.push_back(std::move(entry));
  }
  return report;
}

inline std::uint64_t classifier_params(const NetworkSpec& net) {
  return static_cast<std::uint64_t>(net.head.out_channels) *
             static_cast<std::uint64_t>(net.classifier.hidden_channels) +
         static_cast<std::uint64_t>(net.classifier.hidden_channels) *
             static_cast<std::uint64_t>(net.classifier.num_classes);
}

inline CostReport cost(const NetworkSpec& net, FlattenOptions opts = {}) {
  auto report = cost(to_chain(net, opts));
  report.classifier_params = classifier_params(net);
  return report;
}

/// Backbone MACs only, without building the per-layer report.
inline std::uint64_t total_macs(const NetworkSpec& net) {
  const auto chain = to_chain(net);
  std::uint64_t total = 0;
  Shape3d shape = chain.input;
  for (const auto& layer : chain.layers) {
    shape = same_padding_output(shape, layer.spatial_stride,
                                layer.temporal_stride);
    total += layer_macs(layer, shape);
  }
  return total;
}

}  // namespace e3d

#pragma once

// Architecture IR for MobileNet-style 3D CNNs: kernels, feature-map shapes,
// inverted-bottleneck stages, and the flattening into a chain of conv layers
// that every score, cost and simulation operates on.

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace e3d {

inline constexpr int kChannelMin = 8;
inline constexpr int kChannelMax = 640;
inline constexpr int kChannelStep = 8;

/// Error carrying the field path (or layer id) it refers to.
class SpecError : public std::runtime_error {
 public:
  SpecError(std::string path, const std::string& message)
      : std::runtime_error(path.empty() ? message : path + ": " + message),
        path_(std::move(path)),
        message_(message) {}

  const std::string& path() const noexcept { return path_; }
  const std::string& message() const noexcept { return message_; }

 private:
  std::string path_;
  std::string message_;
};

/// Malformed document: missing keys, wrong types, unknown keys.
class SchemaError : public SpecError {
 public:
  using SpecError::SpecError;
};

/// Well-formed but violates an architecture invariant.
class InvariantError : public SpecError {
 public:
  using SpecError::SpecError;
};

/// Shape propagation produced a non-positive dimension.
class ShapeError : public SpecError {
 public:
  using SpecError::SpecError;
};

struct Kernel3d {
  int t = 1;
  int h = 1;
  int w = 1;

  constexpr std::int64_t volume() const noexcept {
    return std::int64_t{t} * h * w;
  }
  friend constexpr bool operator==(const Kernel3d&, const Kernel3d&) = default;
  friend constexpr auto operator<=>(const Kernel3d&, const Kernel3d&) = default;
};

inline std::string to_string(const Kernel3d& k) {
  return std::to_string(k.t) + "x" + std::to_string(k.h) + "x" +
         std::to_string(k.w);
}

struct Shape3d {
  int frames = 1;
  int height = 1;
  int width = 1;

  constexpr std::int64_t elements() const noexcept {
    return std::int64_t{frames} * height * width;
  }
  friend constexpr bool operator==(const Shape3d&, const Shape3d&) = default;
};

inline std::string to_string(const Shape3d& s) {
  return std::to_string(s.frames) + "x" + std::to_string(s.height) + "x" +
         std::to_string(s.width);
}

enum class ConvKind { Regular, Depthwise, Pointwise };

inline const char* to_string(ConvKind kind) {
  switch (kind) {
    case ConvKind::Regular: return "regular";
    case ConvKind::Depthwise: return "depthwise";
    case ConvKind::Pointwise: return "pointwise";
  }
  return "?";
}

struct ConvLayer {
  std::string id;
  ConvKind kind = ConvKind::Regular;
  Kernel3d kernel;
  int in_channels = 1;
  int out_channels = 1;
  int spatial_stride = 1;
  int temporal_stride = 1;
  // The layer consumes a globally pooled (1x1x1) feature map.
  bool pooled_input = false;

  int groups() const noexcept {
    return kind == ConvKind::Depthwise ? in_channels : 1;
  }
  friend bool operator==(const ConvLayer&, const ConvLayer&) = default;
};

/// One inverted bottleneck: expand (1x1x1) -> depthwise -> project (1x1x1).
/// The bottleneck width is stored explicitly; the searchable expansion ratio
/// is applied by mutation against the stage input width.
struct Block {
  int bottleneck_channels = kChannelMin;
  Kernel3d dw_kernel{3, 3, 3};
  int out_channels = kChannelMin;
  bool downsample = false;

  friend bool operator==(const Block&, const Block&) = default;
};

struct Stage {
  std::vector<Block> blocks;

  friend bool operator==(const Stage&, const Stage&) = default;
};

struct InputSpec {
  Shape3d shape{13, 160, 160};
  int channels = 3;
  // How the clip was sampled from the video; not part of the network.
  int frame_sampling_stride = 1;

  friend bool operator==(const InputSpec&, const InputSpec&) = default;
};

struct StemSpec {
  Kernel3d kernel{1, 3, 3};
  int out_channels = 24;
  int spatial_stride = 2;
  int temporal_stride = 1;

  friend bool operator==(const StemSpec&, const StemSpec&) = default;
};

struct HeadSpec {
  int out_channels = 512;

  friend bool operator==(const HeadSpec&, const HeadSpec&) = default;
};

/// Global pooling followed by two pointwise layers.
struct ClassifierSpec {
  int hidden_channels = 2048;
  int num_classes = 174;

  friend bool operator==(const ClassifierSpec&, const ClassifierSpec&) =
      default;
};

struct NetworkSpec {
  InputSpec input;
  StemSpec stem;
  std::vector<Stage> stages;
  HeadSpec head;
  ClassifierSpec classifier;
  std::map<std::string, std::string> annotations;

  friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

/// A flattened network: the input tensor description plus conv layers in
/// execution order.
struct ConvChain {
  Shape3d input;
  int input_channels = 1;
  std::vector<ConvLayer> layers;
};

struct LayerShape {
  std::string id;
  Shape3d input;
  Shape3d output;
};

struct FlattenOptions {
  bool include_classifier = false;
};

namespace detail {

inline int ceil_div(int value, int divisor) {
  return (value + divisor - 1) / divisor;
}

inline bool is_searchable_width(int c) {
  return c >= kChannelMin && c <= kChannelMax && c % kChannelStep == 0;
}

inline void check_kernel(const Kernel3d& k, const std::string& path) {
  for (int v : {k.t, k.h, k.w}) {
    if (v < 1) throw InvariantError(path, "kernel extents must be >= 1");
    if (v % 2 == 0) throw InvariantError(path, "kernel extents must be odd");
  }
}

inline void check_width(int c, const std::string& path) {
  if (!is_searchable_width(c)) {
    throw InvariantError(path, std::to_string(c) +
                                   " is not a multiple of 8 within [8, 640]");
  }
}

inline void check_stride(int s, const std::string& path) {
  if (s != 1 && s != 2) throw InvariantError(path, "stride must be 1 or 2");
}

inline std::string block_path(std::size_t stage, std::size_t block) {
  return "stages[" + std::to_string(stage) + "].blocks[" +
         std::to_string(block) + "]";
}

}  // namespace detail

/// Same-padding output shape: every dimension is ceil(input / stride).
inline Shape3d same_padding_output(const Shape3d& in, int spatial_stride,
                                   int temporal_stride) {
  return {detail::ceil_div(in.frames, temporal_stride),
          detail::ceil_div(in.height, spatial_stride),
          detail::ceil_div(in.width, spatial_stride)};
}

/// Checks layer-local rules and channel chaining of a flattened network.
inline void validate(const ConvChain& chain) {
  if (chain.input_channels < 1) {
    throw InvariantError("input.channels", "must be >= 1");
  }
  if (chain.input.frames < 1 || chain.input.height < 1 ||
      chain.input.width < 1) {
    throw ShapeError("input", "dimensions must be >= 1");
  }
  int producer = chain.input_channels;
  for (const auto& layer : chain.layers) {
    detail::check_kernel(layer.kernel, layer.id);
    detail::check_stride(layer.spatial_stride, layer.id);
    detail::check_stride(layer.temporal_stride, layer.id);
    if (layer.in_channels < 1 || layer.out_channels < 1) {
      throw InvariantError(layer.id, "channel counts must be >= 1");
    }
    if (layer.in_channels != producer) {
      throw InvariantError(layer.id, "in_channels " +
                                         std::to_string(layer.in_channels) +
                                         " does not match producer width " +
                                         std::to_string(producer));
    }
    if (layer.kind == ConvKind::Pointwise && layer.kernel != Kernel3d{1, 1, 1}) {
      throw InvariantError(layer.id, "pointwise layers must use a 1x1x1 kernel");
    }
    if (layer.kind == ConvKind::Depthwise &&
        layer.in_channels != layer.out_channels) {
      throw InvariantError(layer.id,
                           "depthwise layers need in_channels == out_channels");
    }
    producer = layer.out_channels;
  }
}

/// Checks every NetworkSpec invariant; throws InvariantError naming the field.
inline void validate(const NetworkSpec& net) {
  const auto& in = net.input;
  if (in.shape.frames < 1 || in.shape.height < 1 || in.shape.width < 1) {
    throw InvariantError("input", "dimensions must be >= 1");
  }
  if (in.channels < 1) throw InvariantError("input.channels", "must be >= 1");
  if (in.frame_sampling_stride < 1) {
    throw InvariantError("input.frame_sampling_stride", "must be >= 1");
  }
  detail::check_kernel(net.stem.kernel, "stem.kernel");
  detail::check_width(net.stem.out_channels, "stem.out_channels");
  detail::check_stride(net.stem.spatial_stride, "stem.spatial_stride");
  detail::check_stride(net.stem.temporal_stride, "stem.temporal_stride");
  for (std::size_t s = 0; s < net.stages.size(); ++s) {
    const auto& stage = net.stages[s];
    if (stage.blocks.empty()) {
      throw InvariantError("stages[" + std::to_string(s) + "].blocks",
                           "a stage needs at least one block");
    }
    for (std::size_t b = 0; b < stage.blocks.size(); ++b) {
      const auto& block = stage.blocks[b];
      const auto path = detail::block_path(s, b);
      detail::check_kernel(block.dw_kernel, path + ".kernel");
      detail::check_width(block.bottleneck_channels,
                          path + ".bottleneck_channels");
      detail::check_width(block.out_channels, path + ".out_channels");
    }
  }
  detail::check_width(net.head.out_channels, "head.out_channels");
  if (net.classifier.hidden_channels < 1) {
    throw InvariantError("classifier.hidden_channels", "must be >= 1");
  }
  if (net.classifier.num_classes < 1) {
    throw InvariantError("classifier.num_classes", "must be >= 1");
  }
}

/// Stem, three layers per block, head; classifier layers only on request.
inline ConvChain to_chain(const NetworkSpec& net, FlattenOptions opts = {}) {
  ConvChain chain;
  chain.input = net.input.shape;
  chain.input_channels = net.input.channels;
  std::size_t blocks = 0;
  for (const auto& stage : net.stages) blocks += stage.blocks.size();
  chain.layers.reserve(2 + 3 * blocks + 2);

  chain.layers.push_back({"stem", ConvKind::Regular, net.stem.kernel,
                          net.input.channels, net.stem.out_channels,
                          net.stem.spatial_stride, net.stem.temporal_stride});
  int width = net.stem.out_channels;
  for (std::size_t s = 0; s < net.stages.size(); ++s) {
    const auto& stage = net.stages[s];
    for (std::size_t b = 0; b < stage.blocks.size(); ++b) {
      const auto& block = stage.blocks[b];
      const auto prefix = detail::block_path(s, b);
      const int hidden = block.bottleneck_channels;
      chain.layers.push_back({prefix + ".expand", ConvKind::Pointwise,
                              {1, 1, 1}, width, hidden});
      chain.layers.push_back({prefix + ".depthwise", ConvKind::Depthwise,
                              block.dw_kernel, hidden, hidden,
                              block.downsample ? 2 : 1, 1});
      chain.layers.push_back({prefix + ".project", ConvKind::Pointwise,
                              {1, 1, 1}, hidden, block.out_channels});
      width = block.out_channels;
    }
  }
  chain.layers.push_back(
      {"head", ConvKind::Pointwise, {1, 1, 1}, width, net.head.out_channels});
  if (opts.include_classifier) {
    ConvLayer fc1{"classifier.hidden", ConvKind::Pointwise, {1, 1, 1},
                  net.head.out_channels, net.classifier.hidden_channels};
    fc1.pooled_input = true;
    chain.layers.push_back(fc1);
    chain.layers.push_back({"classifier.logits", ConvKind::Pointwise,
                            {1, 1, 1}, net.classifier.hidden_channels,
                            net.classifier.num_classes});
  }
  return chain;
}

inline std::vector<ConvLayer> flatten(const NetworkSpec& net,
                                      FlattenOptions opts = {}) {
  return to_chain(net, opts).layers;
}

/// Number of conv layers counted against the depth limit (backbone only).
inline std::size_t depth(const NetworkSpec& net) {
  std::size_t blocks = 0;
  for (const auto& stage : net.stages) blocks += stage.blocks.size();
  return 2 + 3 * blocks;
}

inline std::vector<LayerShape> propagate_shapes(const ConvChain& chain) {
  std::vector<LayerShape> out;
  out.reserve(chain.layers.size());
  Shape3d current = chain.input;
  for (const auto& layer : chain.layers) {
    const Shape3d in = layer.pooled_input ? Shape3d{1, 1, 1} : current;
    const Shape3d next =
        same_padding_output(in, layer.spatial_stride, layer.temporal_stride);
    if (next.frames < 1 || next.height < 1 || next.width < 1) {
      throw ShapeError(layer.id, "output shape " + to_string(next) +
                                     " is not positive");
    }
    out.push_back({layer.id, in, next});
    current = next;
  }
  return out;
}

inline std::vector<LayerShape> propagate_shapes(const NetworkSpec& net,
                                                FlattenOptions opts = {}) {
  return propagate_shapes(to_chain(net, opts));
}

/// Output shape of the last layer of each stage, in stage order.
inline std::vector<Shape3d> stage_output_shapes(const NetworkSpec& net) {
  const auto shapes = propagate_shapes(net);
  std::vector<Shape3d> out;
  std::size_t index = 1;  // skip stem
  for (const auto& stage : net.stages) {
    index += 3 * stage.blocks.size();
    out.push_back(shapes[index - 1].output);
  }
  return out;
}

}  // namespace e3d

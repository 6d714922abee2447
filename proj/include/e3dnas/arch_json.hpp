#pragma once

// Canonical JSON form of NetworkSpec.
//
//   {
//     "version": 1,
//     "input": {"frames", "height", "width", "channels", "frame_sampling_stride"},
//     "stem": {"kernel": [t, h, w], "out_channels", "spatial_stride", "temporal_stride"},
//     "stages": [{"blocks": [{"kernel", "bottleneck_channels", "out_channels", "downsample"}]}],
//     "head": {"out_channels"},
//     "classifier": {"hidden_channels", "num_classes"},
//     "annotations": {string: string}          (optional)
//   }
//
// Keys are emitted in exactly this order, two-space indented, with a trailing
// newline. Unknown keys are rejected on input.

#include <climits>
#include <initializer_list>
#include <string>
#include <string_view>

#include <json.hpp>

#include "e3dnas/arch.hpp"

namespace e3d {

using Json = nlohmann::ordered_json;

inline constexpr int kArchSchemaVersion = 1;

namespace json_detail {

inline std::string join(const std::string& path, std::string_view key) {
  return path.empty() ? std::string(key) : path + "." + std::string(key);
}

inline std::string index(const std::string& path, std::size_t i) {
  return path + "[" + std::to_string(i) + "]";
}

inline const Json& require_object(const Json& j, const std::string& path) {
  if (!j.is_object()) throw SchemaError(path, "expected an object");
  return j;
}

inline void reject_unknown(const Json& obj, const std::string& path,
                           std::initializer_list<std::string_view> allowed) {
  for (const auto& [key, _] : obj.items()) {
    bool known = false;
    for (auto a : allowed) known = known || key == a;
    if (!known) throw SchemaError(join(path, key), "unknown key");
  }
}

inline const Json& member(const Json& obj, std::string_view key,
                          const std::string& path) {
  auto it = obj.find(std::string(key));
  if (it == obj.end()) throw SchemaError(join(path, key), "missing required key");
  return *it;
}

inline int get_int(const Json& obj, std::string_view key,
                   const std::string& path) {
  const Json& v = member(obj, key, path);
  if (!v.is_number_integer()) {
    throw SchemaError(join(path, key), "expected an integer");
  }
  const auto wide = v.get<long long>();
  if (wide < INT_MIN || wide > INT_MAX) {
    throw SchemaError(join(path, key), "integer out of range");
  }
  return static_cast<int>(wide);
}

inline bool get_bool(const Json& obj, std::string_view key,
                     const std::string& path) {
  const Json& v = member(obj, key, path);
  if (!v.is_boolean()) throw SchemaError(join(path, key), "expected a boolean");
  return v.get<bool>();
}

inline Kernel3d parse_kernel(const Json& v, const std::string& where) {
  if (!v.is_array() || v.size() != 3) {
    throw SchemaError(where, "expected an array [t, h, w]");
  }
  int dims[3];
  for (std::size_t i = 0; i < 3; ++i) {
    if (!v[i].is_number_integer()) {
      throw SchemaError(index(where, i), "expected an integer");
    }
    dims[i] = v[i].get<int>();
  }
  return {dims[0], dims[1], dims[2]};
}

inline Kernel3d get_kernel(const Json& obj, std::string_view key,
                           const std::string& path) {
  return parse_kernel(member(obj, key, path), join(path, key));
}

inline Json kernel_json(const Kernel3d& k) { return Json::array({k.t, k.h, k.w}); }

}  // namespace json_detail

inline Json to_json_value(const NetworkSpec& net) {
  using json_detail::kernel_json;
  Json j;
  j["version"] = kArchSchemaVersion;
  j["input"] = {{"frames", net.input.shape.frames},
                {"height", net.input.shape.height},
                {"width", net.input.shape.width},
                {"channels", net.input.channels},
                {"frame_sampling_stride", net.input.frame_sampling_stride}};
  j["stem"] = {{"kernel", kernel_json(net.stem.kernel)},
               {"out_channels", net.stem.out_channels},
               {"spatial_stride", net.stem.spatial_stride},
               {"temporal_stride", net.stem.temporal_stride}};
  Json stages = Json::array();
  for (const auto& stage : net.stages) {
    Json blocks = Json::array();
    for (const auto& b : stage.blocks) {
      blocks.push_back({{"kernel", kernel_json(b.dw_kernel)},
                        {"bottleneck_channels", b.bottleneck_channels},
                        {"out_channels", b.out_channels},
                        {"downsample", b.downsample}});
    }
    stages.push_back({{"blocks", std::move(blocks)}});
  }
  j["stages"] = std::move(stages);
  j["head"] = {{"out_channels", net.head.out_channels}};
  j["classifier"] = {{"hidden_channels", net.classifier.hidden_channels},
                     {"num_classes", net.classifier.num_classes}};
  if (!net.annotations.empty()) {
    Json notes = Json::object();
    for (const auto& [k, v] : net.annotations) notes[k] = v;
    j["annotations"] = std::move(notes);
  }
  return j;
}

inline std::string to_json(const NetworkSpec& net) {
  return to_json_value(net).dump(2) + "\n";
}

/// Parses and validates; SchemaError for malformed documents, InvariantError
/// for well-formed documents describing an invalid network.
inline NetworkSpec from_json_value(const Json& doc) {
  using namespace json_detail;
  require_object(doc, "");
  reject_unknown(doc, "", {"version", "input", "stem", "stages", "head",
                           "classifier", "annotations"});
  const int version = get_int(doc, "version", "");
  if (version != kArchSchemaVersion) {
    throw SchemaError("version", "unsupported schema version " +
                                     std::to_string(version));
  }
  NetworkSpec net;

  const Json& input = require_object(member(doc, "input", ""), "input");
  reject_unknown(input, "input", {"frames", "height", "width", "channels",
                                  "frame_sampling_stride"});
  net.input.shape = {get_int(input, "frames", "input"),
                     get_int(input, "height", "input"),
                     get_int(input, "width", "input")};
  net.input.channels = get_int(input, "channels", "input");
  net.input.frame_sampling_stride =
      get_int(input, "frame_sampling_stride", "input");

  const Json& stem = require_object(member(doc, "stem", ""), "stem");
  reject_unknown(stem, "stem", {"kernel", "out_channels", "spatial_stride",
                                "temporal_stride"});
  net.stem.kernel = get_kernel(stem, "kernel", "stem");
  net.stem.out_channels = get_int(stem, "out_channels", "stem");
  net.stem.spatial_stride = get_int(stem, "spatial_stride", "stem");
  net.stem.temporal_stride = get_int(stem, "temporal_stride", "stem");

  const Json& stages = member(doc, "stages", "");
  if (!stages.is_array()) throw SchemaError("stages", "expected an array");
  for (std::size_t s = 0; s < stages.size(); ++s) {
    const auto spath = index("stages", s);
    const Json& sj = require_object(stages[s], spath);
    reject_unknown(sj, spath, {"blocks"});
    const Json& blocks = member(sj, "blocks", spath);
    const auto bpath = join(spath, "blocks");
    if (!blocks.is_array()) throw SchemaError(bpath, "expected an array");
    Stage stage;
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      const auto path = index(bpath, b);
      const Json& bj = require_object(blocks[b], path);
      reject_unknown(bj, path, {"kernel", "bottleneck_channels",
                                "out_channels", "downsample"});
      stage.blocks.push_back({get_int(bj, "bottleneck_channels", path),
                              get_kernel(bj, "kernel", path),
                              get_int(bj, "out_channels", path),
                              get_bool(bj, "downsample", path)});
    }
    net.stages.push_back(std::move(stage));
  }

  const Json& head = require_object(member(doc, "head", ""), "head");
  reject_unknown(head, "head", {"out_channels"});
  net.head.out_channels = get_int(head, "out_channels", "head");

  const Json& cls = require_object(member(doc, "classifier", ""), "classifier");
  reject_unknown(cls, "classifier", {"hidden_channels", "num_classes"});
  net.classifier.hidden_channels = get_int(cls, "hidden_channels", "classifier");
  net.classifier.num_classes = get_int(cls, "num_classes", "classifier");

  if (auto it = doc.find("annotations"); it != doc.end()) {
    require_object(*it, "annotations");
    for (const auto& [k, v] : it->items()) {
      if (!v.is_string()) throw SchemaError(join("annotations", k), "expected a string");
      net.annotations[k] = v.get<std::string>();
    }
  }

  validate(net);
  return net;
}

inline NetworkSpec from_json(std::string_view text) {
  Json doc;
  try {
    doc = Json::parse(text.begin(), text.end());
  } catch (const Json::parse_error& e) {
    throw SchemaError("", std::string("invalid JSON: ") + e.what());
  }
  return from_json_value(doc);
}

}  // namespace e3d

#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "fedshard/error.hpp"

namespace fedshard {

enum class LayerKind { conv2d, dense, relu, avgpool, flatten };

inline std::string to_string(LayerKind k) {
  switch (k) {
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::dense: return "dense";
    case LayerKind::relu: return "relu";
    case LayerKind::avgpool: return "avgpool";
    case LayerKind::flatten: return "flatten";
  }
  return "?";
}

inline LayerKind layer_kind_from_string(const std::string& s) {
  if (s == "conv2d") return LayerKind::conv2d;
  if (s == "dense") return LayerKind::dense;
  if (s == "relu") return LayerKind::relu;
  if (s == "avgpool") return LayerKind::avgpool;
  if (s == "flatten") return LayerKind::flatten;
  throw ConfigError("unknown layer kind '" + s + "'");
}

struct LayerSpec {
  LayerKind kind = LayerKind::relu;
  // conv2d
  int in_channels = 0, out_channels = 0, kernel_size = 0, stride = 1;
  // dense
  int in_dim = 0, out_dim = 0;
  // avgpool window (stride == window, no overlap)
  int pool_size = 2;

  static LayerSpec conv(int in_ch, int out_ch, int k, int stride = 1) {
    LayerSpec l;
    l.kind = LayerKind::conv2d;
    l.in_channels = in_ch;
    l.out_channels = out_ch;
    l.kernel_size = k;
    l.stride = stride;
    return l;
  }
  static LayerSpec dense(int in_dim, int out_dim) {
    LayerSpec l;
    l.kind = LayerKind::dense;
    l.in_dim = in_dim;
    l.out_dim = out_dim;
    return l;
  }
  static LayerSpec relu() { return LayerSpec{}; }
  static LayerSpec avgpool(int size = 2) {
    LayerSpec l;
    l.kind = LayerKind::avgpool;
    l.pool_size = size;
    return l;
  }
  static LayerSpec flatten() {
    LayerSpec l;
    l.kind = LayerKind::flatten;
    return l;
  }

  bool has_params() const {
    return kind == LayerKind::conv2d || kind == LayerKind::dense;
  }

  bool operator==(const LayerSpec&) const = default;
};

// Architecture description. Shapes are checked once at construction; the
// per-layer activation shapes are reused by the forward pass and by surgery.
struct NetworkSpec {
  std::vector<int> input_shape;  // {C,H,W} or {D}
  int num_classes = 0;
  std::vector<LayerSpec> layers;

  bool operator==(const NetworkSpec&) const = default;

  // Activation shape after each layer; result[0] is the input shape and
  // result[i+1] the output of layer i. Throws naming the offending layer.
  std::vector<std::vector<int>> activation_shapes() const {
    std::vector<std::vector<int>> shapes;
    shapes.push_back(input_shape);
    std::vector<int> cur = input_shape;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const LayerSpec& l = layers[i];
      const std::string where =
          "layer " + std::to_string(i) + " (" + to_string(l.kind) + "): ";
      switch (l.kind) {
        case LayerKind::conv2d: {
          if (cur.size() != 3)
            throw Error(where + "expects CxHxW input, got rank " +
                        std::to_string(cur.size()));
          if (cur[0] != l.in_channels)
            throw Error(where + "input channels " + std::to_string(cur[0]) +
                        " != expected " + std::to_string(l.in_channels));
          if (l.kernel_size <= 0 || l.stride <= 0)
            throw Error(where + "kernel and stride must be positive");
          if (cur[1] < l.kernel_size || cur[2] < l.kernel_size)
            throw Error(where + "kernel larger than input");
          const int oh = (cur[1] - l.kernel_size) / l.stride + 1;
          const int ow = (cur[2] - l.kernel_size) / l.stride + 1;
          cur = {l.out_channels, oh, ow};
          break;
        }
        case LayerKind::dense: {
          if (cur.size() != 1)
            throw Error(where + "expects flat input, got rank " +
                        std::to_string(cur.size()) + " (missing flatten?)");
          if (cur[0] != l.in_dim)
            throw Error(where + "input dim " + std::to_string(cur[0]) +
                        " != expected " + std::to_string(l.in_dim));
          cur = {l.out_dim};
          break;
        }
        case LayerKind::relu:
          break;
        case LayerKind::avgpool: {
          if (cur.size() != 3)
            throw Error(where + "expects CxHxW input");
          if (l.pool_size <= 0) throw Error(where + "pool size must be positive");
          if (cur[1] < l.pool_size || cur[2] < l.pool_size)
            throw Error(where + "pool window larger than input");
          cur = {cur[0], cur[1] / l.pool_size, cur[2] / l.pool_size};
          break;
        }
        case LayerKind::flatten: {
          int n = 1;
          for (int d : cur) n *= d;
          cur = {n};
          break;
        }
      }
      shapes.push_back(cur);
    }
    return shapes;
  }

  // Checks chain compatibility and the classifier head.
  void validate() const {
    require(!input_shape.empty(), "network: empty input shape");
    require(num_classes >= 1, "network: num_classes must be >= 1");
    const auto shapes = activation_shapes();
    int last_param = -1;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      if (layers[i].has_params()) last_param = static_cast<int>(i);
    }
    require(last_param >= 0, "network: no parametric layers");
    const auto& out = shapes[last_param + 1];
    require(out.size() == 1 && out[0] == num_classes,
            "network: last parametric layer outputs " +
                std::to_string(out.size() == 1 ? out[0] : -1) +
                ", expected num_classes " + std::to_string(num_classes));
  }

  std::vector<int> output_shape() const { return activation_shapes().back(); }

  std::vector<int> parametric_layer_indices() const {
    std::vector<int> idx;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      if (layers[i].has_params()) idx.push_back(static_cast<int>(i));
    }
    return idx;
  }
};

// Canonical JSON form, used verbatim in checkpoint headers. Field order is
// fixed, so equal specs serialize to equal bytes.
inline nlohmann::ordered_json to_json(const NetworkSpec& spec) {
  nlohmann::ordered_json j;
  j["input_shape"] = spec.input_shape;
  j["num_classes"] = spec.num_classes;
  auto& arr = j["layers"] = nlohmann::ordered_json::array();
  for (const LayerSpec& l : spec.layers) {
    nlohmann::ordered_json lj;
    lj["kind"] = to_string(l.kind);
    switch (l.kind) {
      case LayerKind::conv2d:
        lj["in_channels"] = l.in_channels;
        lj["out_channels"] = l.out_channels;
        lj["kernel_size"] = l.kernel_size;
        lj["stride"] = l.stride;
        break;
      case LayerKind::dense:
        lj["in_dim"] = l.in_dim;
        lj["out_dim"] = l.out_dim;
        break;
      case LayerKind::avgpool:
        lj["size"] = l.pool_size;
        break;
      default:
        break;
    }
    arr.push_back(std::move(lj));
  }
  return j;
}

inline NetworkSpec network_spec_from_json(const nlohmann::json& j) {
  try {
    NetworkSpec spec;
    spec.input_shape = j.at("input_shape").get<std::vector<int>>();
    spec.num_classes = j.at("num_classes").get<int>();
    for (const auto& lj : j.at("layers")) {
      LayerSpec l;
      l.kind = layer_kind_from_string(lj.at("kind").get<std::string>());
      switch (l.kind) {
        case LayerKind::conv2d:
          l.in_channels = lj.at("in_channels").get<int>();
          l.out_channels = lj.at("out_channels").get<int>();
          l.kernel_size = lj.at("kernel_size").get<int>();
          l.stride = lj.at("stride").get<int>();
          break;
        case LayerKind::dense:
          l.in_dim = lj.at("in_dim").get<int>();
          l.out_dim = lj.at("out_dim").get<int>();
          break;
        case LayerKind::avgpool:
          l.pool_size = lj.at("size").get<int>();
          break;
        default:
          break;
      }
      spec.layers.push_back(l);
    }
    spec.validate();
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("network spec json: ") + e.what());
  }
}

}  // namespace fedshard

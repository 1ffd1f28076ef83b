#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "fedshard/net.hpp"
#include "fedshard/rng.hpp"
#include "fedshard/tensor.hpp"

namespace fedshard {

enum class ParamRole { weight, bias };

inline std::string to_string(ParamRole r) {
  return r == ParamRole::weight ? "weight" : "bias";
}

template <typename T>
struct ParamEntry {
  int layer_index = 0;
  ParamRole role = ParamRole::weight;
  Tensor<T> tensor;
};

// All weights and biases of one network, in layer declaration order.
// The unit of aggregation, distance, checkpointing and surgery.
template <typename T>
struct ParamSet {
  std::vector<ParamEntry<T>> entries;

  std::int64_t scalar_count() const {
    std::int64_t n = 0;
    for (const auto& e : entries) n += e.tensor.size();
    return n;
  }

  bool congruent(const ParamSet& o) const {
    if (entries.size() != o.entries.size()) return false;
    for (std::size_t i = 0; i < entries.size(); ++i) {
      if (entries[i].layer_index != o.entries[i].layer_index ||
          entries[i].role != o.entries[i].role ||
          entries[i].tensor.shape != o.entries[i].tensor.shape)
        return false;
    }
    return true;
  }

  Tensor<T>* find(int layer_index, ParamRole role) {
    for (auto& e : entries) {
      if (e.layer_index == layer_index && e.role == role) return &e.tensor;
    }
    return nullptr;
  }
  const Tensor<T>* find(int layer_index, ParamRole role) const {
    for (const auto& e : entries) {
      if (e.layer_index == layer_index && e.role == role) return &e.tensor;
    }
    return nullptr;
  }
};

// Gradients share the ParamSet structure.
template <typename T>
using Gradients = ParamSet<T>;

template <typename T>
ParamSet<T> zero_params(const NetworkSpec& spec) {
  ParamSet<T> p;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& l = spec.layers[i];
    if (l.kind == LayerKind::conv2d) {
      p.entries.push_back({static_cast<int>(i), ParamRole::weight,
                           Tensor<T>({l.out_channels, l.in_channels,
                                      l.kernel_size, l.kernel_size})});
      p.entries.push_back(
          {static_cast<int>(i), ParamRole::bias, Tensor<T>({l.out_channels})});
    } else if (l.kind == LayerKind::dense) {
      p.entries.push_back({static_cast<int>(i), ParamRole::weight,
                           Tensor<T>({l.out_dim, l.in_dim})});
      p.entries.push_back(
          {static_cast<int>(i), ParamRole::bias, Tensor<T>({l.out_dim})});
    }
  }
  return p;
}

// Per-layer uniform init in [-sqrt(1/fan_in), +sqrt(1/fan_in)].
template <typename T>
ParamSet<T> init_params(const NetworkSpec& spec, std::uint64_t seed) {
  ParamSet<T> p = zero_params<T>(spec);
  for (auto& e : p.entries) {
    const LayerSpec& l = spec.layers[e.layer_index];
    const int fan_in = l.kind == LayerKind::conv2d
                           ? l.in_channels * l.kernel_size * l.kernel_size
                           : l.in_dim;
    const double bound = std::sqrt(1.0 / fan_in);
    Rng rng(derive_seed(seed, "init", e.layer_index,
                        e.role == ParamRole::weight ? 0 : 1));
    for (auto& v : e.tensor.data) {
      v = static_cast<T>(rng.uniform(-bound, bound));
    }
  }
  return p;
}

template <typename T>
void check_congruent(const ParamSet<T>& a, const ParamSet<T>& b,
                     const std::string& what) {
  require(a.congruent(b), what + ": param sets are not shape-congruent");
}

// Checks that a param set matches the shapes an architecture demands.
template <typename T>
void check_congruent(const NetworkSpec& spec, const ParamSet<T>& params,
                     const std::string& what = "model") {
  check_congruent(zero_params<T>(spec), params,
                  what + ": params do not fit the network spec");
}

// out = a + scale * b
template <typename T>
ParamSet<T> add_scaled(const ParamSet<T>& a, const ParamSet<T>& b, T scale) {
  check_congruent(a, b, "add_scaled");
  ParamSet<T> out = a;
  for (std::size_t i = 0; i < out.entries.size(); ++i) {
    auto& dst = out.entries[i].tensor.data;
    const auto& src = b.entries[i].tensor.data;
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += scale * src[j];
  }
  return out;
}

// w <- w - lr * g
template <typename T>
ParamSet<T> sgd_step(const ParamSet<T>& params, const Gradients<T>& grads,
                     T learning_rate) {
  check_congruent(params, grads, "sgd_step");
  require(learning_rate >= T(0), "sgd_step: negative learning rate");
  return add_scaled(params, grads, -learning_rate);
}

// Global L2 norm of (a - b) over all entries, accumulated in double.
template <typename T>
double param_distance(const ParamSet<T>& a, const ParamSet<T>& b) {
  check_congruent(a, b, "param_distance");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.entries.size(); ++i) {
    const auto& x = a.entries[i].tensor.data;
    const auto& y = b.entries[i].tensor.data;
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double d = static_cast<double>(x[j]) - static_cast<double>(y[j]);
      acc += d * d;
    }
  }
  return std::sqrt(acc);
}

template <typename T>
bool params_equal(const ParamSet<T>& a, const ParamSet<T>& b) {
  if (!a.congruent(b)) return false;
  for (std::size_t i = 0; i < a.entries.size(); ++i) {
    if (a.entries[i].tensor.data != b.entries[i].tensor.data) return false;
  }
  return true;
}

}  // namespace fedshard

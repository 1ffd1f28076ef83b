#pragma once

// shared helpers for the test suite: random small architectures, random
// batches, and a central-difference gradient oracle in double precision.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "fedshard/loss.hpp"
#include "fedshard/net.hpp"
#include "fedshard/ops.hpp"
#include "fedshard/rng.hpp"

namespace testutil {

using namespace fedshard;

// Small conv/dense mix with randomized sizes; scalar_output swaps the head
// for a single regression unit.
inline NetworkSpec random_small_net(std::uint64_t seed, bool scalar_output = false) {
  Rng rng(derive_seed(seed, "arch"));
  NetworkSpec spec;
  const int c = 1 + static_cast<int>(rng.below(2));
  const int hw = 6 + static_cast<int>(rng.below(3));
  spec.input_shape = {c, hw, hw};
  spec.num_classes = scalar_output ? 1 : 3 + static_cast<int>(rng.below(3));
  const int oc = 2 + static_cast<int>(rng.below(2));
  spec.layers.push_back(LayerSpec::conv(c, oc, 3));
  spec.layers.push_back(LayerSpec::relu());
  if ((hw - 2) % 2 == 0 && rng.below(2) == 0)
    spec.layers.push_back(LayerSpec::avgpool(2));
  spec.layers.push_back(LayerSpec::flatten());
  const int flat = spec.activation_shapes().back()[0];
  const int hidden = 4 + static_cast<int>(rng.below(3));
  spec.layers.push_back(LayerSpec::dense(flat, hidden));
  spec.layers.push_back(LayerSpec::relu());
  spec.layers.push_back(LayerSpec::dense(hidden, spec.num_classes));
  spec.validate();
  return spec;
}

template <typename T>
Tensor<T> random_batch(const NetworkSpec& spec, int n, Rng& rng) {
  std::vector<int> shape = {n};
  for (int d : spec.input_shape) shape.push_back(d);
  Tensor<T> batch(shape);
  for (auto& v : batch.data) v = static_cast<T>(rng.real01());
  return batch;
}

inline std::vector<int> random_labels(int n, int classes, Rng& rng) {
  std::vector<int> labels(static_cast<std::size_t>(n));
  for (auto& y : labels) y = static_cast<int>(rng.below(static_cast<std::uint64_t>(classes)));
  return labels;
}

struct FdReport {
  double max_rel = 0;     // worst relative error among non-negligible scalars
  double worst_abs = 0;   // worst absolute difference overall
  std::int64_t checked = 0;
};

// Central differences against analytic gradients. Differences below abs_floor
// are numerical-noise level for h ~ 1e-4 in double and count as exact.
template <typename LossFn>
FdReport fd_compare(ParamSet<double> params, const Gradients<double>& grads,
                    LossFn&& loss_of, double h = 1e-4, double abs_floor = 1e-7) {
  FdReport rep;
  for (std::size_t e = 0; e < params.entries.size(); ++e) {
    auto& data = params.entries[e].tensor.data;
    const auto& g = grads.entries[e].tensor.data;
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double orig = data[i];
      data[i] = orig + h;
      const double lp = loss_of(params);
      data[i] = orig - h;
      const double lm = loss_of(params);
      data[i] = orig;
      const double fd = (lp - lm) / (2 * h);
      const double diff = std::abs(fd - g[i]);
      rep.worst_abs = std::max(rep.worst_abs, diff);
      ++rep.checked;
      if (diff <= abs_floor) continue;
      const double denom = std::max(std::abs(fd), std::abs(g[i]));
      rep.max_rel = std::max(rep.max_rel, diff / denom);
    }
  }
  return rep;
}

// One full gradient check of cross-entropy on a random net; returns the report.
inline FdReport check_net_gradients(std::uint64_t seed) {
  const NetworkSpec spec = random_small_net(seed);
  Rng rng(derive_seed(seed, "gradcheck"));
  const auto params = init_params<double>(spec, derive_seed(seed, "gradinit"));
  const int n = 3 + static_cast<int>(rng.below(3));
  const auto batch = random_batch<double>(spec, n, rng);
  const auto labels = random_labels(n, spec.num_classes, rng);
  const auto res = cross_entropy_loss(spec, params, batch, labels);
  return fd_compare(params, res.grads, [&](const ParamSet<double>& p) {
    return cross_entropy_loss(spec, p, batch, labels).loss;
  });
}

}  // namespace testutil

#pragma once

#include <cstdint>
#include <numeric>
#include <vector>

#include "fedshard/data.hpp"
#include "fedshard/loss.hpp"

namespace fedshard {

struct TrainConfig {
  double learning_rate = 0.01;
  int batch_size = 32;
  int local_epochs = 5;
  std::uint64_t seed = 0;

  void validate() const {
    require(learning_rate >= 0, "train: learning_rate must be >= 0");
    require(batch_size >= 1, "train: batch_size must be >= 1");
    require(local_epochs >= 0, "train: local_epochs must be >= 0");
  }
};

// Local SGD on one dataset: per epoch, a seed-derived shuffle split into
// batches of cfg.batch_size (final partial batch included). Returns the
// updated parameters; the input set is untouched.
inline ParamSet<float> train_local(const NetworkSpec& spec, const ParamSet<float>& start,
                                   const LabeledDataset& data, const TrainConfig& cfg) {
  cfg.validate();
  require(!data.empty(), "train_local: empty dataset");

  ParamSet<float> params = start;
  const int n = static_cast<int>(data.size());
  std::vector<int> order(n);
  for (int epoch = 0; epoch < cfg.local_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(cfg.seed, "shuffle", static_cast<std::uint64_t>(epoch)));
    rng.shuffle(order);
    for (int at = 0; at < n; at += cfg.batch_size) {
      const int b = std::min(cfg.batch_size, n - at);
      std::vector<int> idx(order.begin() + at, order.begin() + at + b);
      Tensor<float> batch = stack_images(data.images, idx);
      std::vector<int> labels(b);
      for (int i = 0; i < b; ++i) labels[i] = data.labels[idx[i]];
      LossResult<float> res = cross_entropy_loss(spec, params, batch, labels);
      params = sgd_step(params, res.grads, static_cast<float>(cfg.learning_rate));
    }
  }
  for (const auto& e : params.entries) {
    if (!e.tensor.all_finite()) {
      throw Error("train_local: parameters diverged (non-finite after epoch loop); "
                  "reduce the learning rate");
    }
  }
  return params;
}

inline ParamSet<float> train_local(const NetworkSpec& spec, const ParamSet<float>& start,
                                   const ClientShard& shard, const TrainConfig& cfg) {
  return train_local(spec, start, shard.data, cfg);
}

}  // namespace fedshard

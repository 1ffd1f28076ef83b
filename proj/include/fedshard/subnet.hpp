#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "fedshard/data.hpp"
#include "fedshard/loss.hpp"
#include "fedshard/trigger.hpp"

namespace fedshard {

// Which host channels/units the backdoor subnet will occupy, one index list
// per host parametric layer except the final classifier. All lists have
// `width` entries except the last, which always has exactly one: the subnet
// ends in a single scalar unit.
struct SubnetSpec {
  int width = 1;
  std::vector<std::vector<int>> host_channels;
};

namespace detail {

// Host parametric layers the subnet mirrors: all but the final classifier.
inline std::vector<int> mirrored_layers(const NetworkSpec& host) {
  const std::vector<int> pl = host.parametric_layer_indices();
  require(pl.size() >= 2, "subnet: host needs at least two parametric layers");
  require(pl.back() == static_cast<int>(host.layers.size()) - 1,
          "subnet: host must end with its classifier layer");
  require(host.layers[pl[pl.size() - 2]].kind == LayerKind::dense,
          "subnet: host layer before the classifier must be dense");
  require(host.layers[pl.back()].kind == LayerKind::dense,
          "subnet: host classifier must be dense");
  return std::vector<int>(pl.begin(), pl.end() - 1);
}

}  // namespace detail

inline void validate_subnet_spec(const NetworkSpec& host, const SubnetSpec& sub) {
  require(sub.width >= 1, "subnet: width must be >= 1");
  const std::vector<int> mirrored = detail::mirrored_layers(host);
  require(sub.host_channels.size() == mirrored.size(),
          "subnet: expected " + std::to_string(mirrored.size()) +
              " channel lists, got " + std::to_string(sub.host_channels.size()));
  for (std::size_t j = 0; j < mirrored.size(); ++j) {
    const LayerSpec& l = host.layers[mirrored[j]];
    const int limit = l.kind == LayerKind::conv2d ? l.out_channels : l.out_dim;
    const bool last = j + 1 == mirrored.size();
    const int want = last ? 1 : sub.width;
    require(static_cast<int>(sub.host_channels[j].size()) == want,
            "subnet: layer " + std::to_string(mirrored[j]) + " needs " +
                std::to_string(want) + " channel indices");
    for (std::size_t a = 0; a < sub.host_channels[j].size(); ++a) {
      const int c = sub.host_channels[j][a];
      require(c >= 0 && c < limit, "subnet: channel " + std::to_string(c) +
                                       " out of range for layer " +
                                       std::to_string(mirrored[j]));
      for (std::size_t b = a + 1; b < sub.host_channels[j].size(); ++b) {
        require(c != sub.host_channels[j][b],
                "subnet: duplicate channel " + std::to_string(c) + " in layer " +
                    std::to_string(mirrored[j]));
      }
    }
  }
}

// Picks the highest-index channels of every mirrored layer (or a seeded
// random choice), so the subnet sits in a predictable corner of the host.
inline SubnetSpec choose_subnet_channels(const NetworkSpec& host, int width,
                                         bool random = false, std::uint64_t seed = 0) {
  SubnetSpec sub;
  sub.width = width;
  const std::vector<int> mirrored = detail::mirrored_layers(host);
  for (std::size_t j = 0; j < mirrored.size(); ++j) {
    const LayerSpec& l = host.layers[mirrored[j]];
    const int limit = l.kind == LayerKind::conv2d ? l.out_channels : l.out_dim;
    const int want = j + 1 == mirrored.size() ? 1 : width;
    require(limit >= want, "subnet: layer " + std::to_string(mirrored[j]) +
                               " has only " + std::to_string(limit) + " channels");
    std::vector<int> idx;
    if (random) {
      Rng rng(derive_seed(seed, "channels", static_cast<std::uint64_t>(j)));
      idx = rng.sample_without_replacement(limit, want);
      std::sort(idx.begin(), idx.end());
    } else {
      for (int c = limit - want; c < limit; ++c) idx.push_back(c);
    }
    sub.host_channels.push_back(std::move(idx));
  }
  validate_subnet_spec(host, sub);
  return sub;
}

// Standalone network for the subnet: the host's layer chain with every
// mirrored parametric layer narrowed to `width` channels (the last to one),
// classifier dropped. Output is the single pre-activation scalar.
inline NetworkSpec build_subnet_spec(const NetworkSpec& host, const SubnetSpec& sub) {
  validate_subnet_spec(host, sub);
  const std::vector<int> mirrored = detail::mirrored_layers(host);
  const int last_mirrored = mirrored.back();

  NetworkSpec s;
  s.input_shape = host.input_shape;
  s.num_classes = 1;

  // prev_kind/prev_host_out describe the previous *parametric* host layer
  LayerKind prev_kind = LayerKind::flatten;  // sentinel: none yet
  int prev_host_out = 0;
  int prev_width = host.input_shape.size() == 3 ? host.input_shape[0] : 0;
  std::size_t mirror_pos = 0;
  for (int i = 0; i <= last_mirrored; ++i) {
    const LayerSpec& l = host.layers[i];
    switch (l.kind) {
      case LayerKind::conv2d: {
        const int out = mirror_pos + 1 == mirrored.size() ? 1 : sub.width;
        s.layers.push_back(LayerSpec::conv(prev_width, out, l.kernel_size, l.stride));
        prev_width = out;
        prev_kind = LayerKind::conv2d;
        prev_host_out = l.out_channels;
        ++mirror_pos;
        break;
      }
      case LayerKind::dense: {
        const int out = mirror_pos + 1 == mirrored.size() ? 1 : sub.width;
        int in;
        if (mirror_pos == 0) {
          in = l.in_dim;  // first parametric layer: full input connectivity
        } else if (prev_kind == LayerKind::conv2d) {
          // columns come in per-channel spatial blocks through the flatten
          require(l.in_dim % prev_host_out == 0,
                  "subnet: dense in_dim not divisible by channel count at layer " +
                      std::to_string(i));
          in = (l.in_dim / prev_host_out) * prev_width;
        } else {
          in = prev_width;  // dense after dense: one column per unit
        }
        s.layers.push_back(LayerSpec::dense(in, out));
        prev_width = out;
        prev_kind = LayerKind::dense;
        prev_host_out = l.out_dim;
        ++mirror_pos;
        break;
      }
      case LayerKind::relu:
        s.layers.push_back(LayerSpec::relu());
        break;
      case LayerKind::avgpool:
        s.layers.push_back(LayerSpec::avgpool(l.pool_size));
        break;
      case LayerKind::flatten:
        s.layers.push_back(LayerSpec::flatten());
        break;
    }
  }
  s.validate();
  return s;
}

struct SubnetTrainConfig {
  double activation_target = 10.0;  // output the subnet should reach on triggered input
  double trigger_weight = 1.0;      // weight of the triggered term in the loss
  double trigger_fraction = 0.5;    // fraction of each batch also fed through triggered
  int epochs = 200;
  int batch_size = 32;
  double learning_rate = 0.002;
  std::uint64_t seed = 0;

  void validate() const {
    require(activation_target > 0, "subnet: activation_target must be > 0");
    require(trigger_weight > 0, "subnet: trigger_weight must be > 0");
    require(trigger_fraction > 0 && trigger_fraction <= 1,
            "subnet: trigger_fraction must be in (0,1]");
    require(epochs >= 1, "subnet: epochs must be >= 1");
    require(batch_size >= 1, "subnet: batch_size must be >= 1");
    require(learning_rate > 0, "subnet: learning_rate must be > 0");
  }
};

struct SubnetTrainResult {
  ParamSet<float> params;
  double clean_activation_mean = 0;
  double triggered_activation_mean = 0;
  double final_loss = 0;
};

namespace detail {

inline double mean_activation(const NetworkSpec& spec, const ParamSet<float>& params,
                              const std::vector<Tensor<float>>& images) {
  double sum = 0;
  std::vector<int> idx;
  const int n = static_cast<int>(images.size());
  for (int at = 0; at < n; at += 128) {
    const int b = std::min(128, n - at);
    idx.resize(b);
    for (int i = 0; i < b; ++i) idx[i] = at + i;
    const Tensor<float> out = forward(spec, params, stack_images(images, idx));
    for (int i = 0; i < b; ++i) sum += out.at2(i, 0);
  }
  return sum / n;
}

}  // namespace detail

// Trains the standalone subnet on unlabeled public images so it stays silent
// (target 0) on clean input and fires (target activation_target) on triggered
// input. Per batch the loss is the clean squared-error term plus
// trigger_weight times the triggered term on a seed-chosen subset.
inline SubnetTrainResult train_backdoor_subnet(const NetworkSpec& subnet_spec,
                                               const PublicDataset& pub,
                                               const TriggerSpec& trig,
                                               const SubnetTrainConfig& cfg) {
  cfg.validate();
  require(!pub.images.empty(), "subnet: empty public dataset");

  ParamSet<float> params = init_params<float>(subnet_spec, derive_seed(cfg.seed, "subnet-init"));
  // a width-1 relu chain collapses to a constant from a symmetric random
  // start: if the patch-facing positions begin dead the gradient there is
  // exactly zero forever. Make every hidden tap excitatory so a bright patch
  // is visible at init, and open the readout at zero so the first steps fit
  // the trigger gap instead of detonating the quadratic loss.
  int last_layer = -1;
  for (const auto& e : params.entries) last_layer = std::max(last_layer, e.layer_index);
  for (auto& e : params.entries) {
    if (e.layer_index == last_layer) {
      for (auto& v : e.tensor.data) v = 0.0f;
    } else if (e.role == ParamRole::weight) {
      for (auto& v : e.tensor.data) v = std::fabs(v);
    }
  }
  const int n = static_cast<int>(pub.images.size());
  std::vector<int> order(n);
  double last_loss = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng(derive_seed(cfg.seed, "shuffle", static_cast<std::uint64_t>(epoch)));
    shuffle_rng.shuffle(order);
    int batch_no = 0;
    for (int at = 0; at < n; at += cfg.batch_size, ++batch_no) {
      const int b = std::min(cfg.batch_size, n - at);
      std::vector<int> idx(order.begin() + at, order.begin() + at + b);

      const Tensor<float> clean = stack_images(pub.images, idx);
      const std::vector<float> zeros(b, 0.0f);
      LossResult<float> clean_res = squared_error_loss(subnet_spec, params, clean, zeros);

      const int tcount = std::max(1, static_cast<int>(std::floor(cfg.trigger_fraction * b + 0.5)));
      Rng pick(derive_seed(cfg.seed, "trig-pick", static_cast<std::uint64_t>(epoch),
                           static_cast<std::uint64_t>(batch_no)));
      std::vector<int> tidx;
      for (int i : pick.sample_without_replacement(b, tcount)) tidx.push_back(idx[i]);
      std::vector<Tensor<float>> trig_imgs;
      trig_imgs.reserve(tidx.size());
      for (int i : tidx) trig_imgs.push_back(apply_trigger(pub.images[i], trig));
      std::vector<int> all(tcount);
      std::iota(all.begin(), all.end(), 0);
      const Tensor<float> triggered = stack_images(trig_imgs, all);
      const std::vector<float> targets(tcount, static_cast<float>(cfg.activation_target));
      LossResult<float> trig_res = squared_error_loss(subnet_spec, params, triggered, targets);

      const Gradients<float> total =
          add_scaled(clean_res.grads, trig_res.grads, static_cast<float>(cfg.trigger_weight));
      params = sgd_step(params, total, static_cast<float>(cfg.learning_rate));
      last_loss = clean_res.loss + cfg.trigger_weight * trig_res.loss;
      if (!std::isfinite(last_loss)) {
        throw Error("subnet: training diverged at epoch " + std::to_string(epoch) +
                    "; reduce the learning rate");
      }
    }
  }

  SubnetTrainResult res;
  res.params = std::move(params);
  res.final_loss = last_loss;
  res.clean_activation_mean = detail::mean_activation(subnet_spec, res.params, pub.images);
  std::vector<Tensor<float>> trig_all;
  trig_all.reserve(pub.images.size());
  for (const auto& img : pub.images) trig_all.push_back(apply_trigger(img, trig));
  res.triggered_activation_mean = detail::mean_activation(subnet_spec, res.params, trig_all);
  return res;
}

}  // namespace fedshard

#pragma once

#include <vector>

#include "fedshard/data.hpp"
#include "fedshard/ops.hpp"
#include "fedshard/trigger.hpp"

namespace fedshard {

struct EvalReport {
  double clean_accuracy = 0;
  double asr = 0;  // attack success rate
  double cad = 0;  // clean accuracy drop vs the benign reference
  int clean_samples = 0;
  int asr_samples = 0;
};

// Argmax class per image, ties resolved to the lowest index.
inline std::vector<int> predict(const NetworkSpec& spec, const ParamSet<float>& params,
                                const std::vector<Tensor<float>>& images,
                                int batch_size = 128) {
  require(batch_size >= 1, "predict: batch_size must be >= 1");
  const int n = static_cast<int>(images.size());
  std::vector<int> preds(n);
  std::vector<int> idx;
  for (int at = 0; at < n; at += batch_size) {
    const int b = std::min(batch_size, n - at);
    idx.resize(b);
    for (int i = 0; i < b; ++i) idx[i] = at + i;
    const Tensor<float> logits = forward(spec, params, stack_images(images, idx));
    require(logits.shape.size() == 2, "predict: network output is not [N, classes]");
    const int classes = logits.shape[1];
    for (int i = 0; i < b; ++i) {
      int best = 0;
      for (int c = 1; c < classes; ++c) {
        if (logits.at2(i, c) > logits.at2(i, best)) best = c;
      }
      preds[at + i] = best;
    }
  }
  return preds;
}

inline double clean_accuracy(const NetworkSpec& spec, const ParamSet<float>& params,
                             const LabeledDataset& test) {
  require(!test.empty(), "clean_accuracy: empty test set");
  const std::vector<int> preds = predict(spec, params, test.images);
  int hit = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) hit += preds[i] == test.labels[i];
  return static_cast<double>(hit) / preds.size();
}

// Fraction of triggered non-target-class samples classified as the target.
// `triggered` must be the triggered copy of a test set (labels = true labels).
inline double attack_success_rate(const NetworkSpec& spec, const ParamSet<float>& params,
                                  const LabeledDataset& triggered, int target_label) {
  std::vector<int> eligible;
  for (std::size_t i = 0; i < triggered.size(); ++i) {
    if (triggered.labels[i] != target_label) eligible.push_back(static_cast<int>(i));
  }
  require(!eligible.empty(), "attack_success_rate: no samples outside the target class");
  std::vector<Tensor<float>> imgs;
  imgs.reserve(eligible.size());
  for (int i : eligible) imgs.push_back(triggered.images[i]);
  const std::vector<int> preds = predict(spec, params, imgs);
  int hit = 0;
  for (int p : preds) hit += p == target_label;
  return static_cast<double>(hit) / preds.size();
}

inline double attack_success_rate(const NetworkSpec& spec, const ParamSet<float>& params,
                                  const LabeledDataset& test, const TriggerSpec& trig) {
  return attack_success_rate(spec, params, apply_trigger_all(test, trig),
                             trig.target_label);
}

inline double clean_accuracy_drop(double benign_accuracy, double current_accuracy) {
  require(benign_accuracy >= 0 && benign_accuracy <= 1 && current_accuracy >= 0 &&
              current_accuracy <= 1,
          "clean_accuracy_drop: accuracies must be in [0,1]");
  return benign_accuracy - current_accuracy;
}

// Largest per-sample logit spread (max - min) over a set of images; used to
// size the backdoor logit boost so it dominates any clean logit.
inline double max_logit_range(const NetworkSpec& spec, const ParamSet<float>& params,
                              const std::vector<Tensor<float>>& images,
                              int batch_size = 128) {
  require(!images.empty(), "max_logit_range: no images");
  double range = 0;
  std::vector<int> idx;
  const int n = static_cast<int>(images.size());
  for (int at = 0; at < n; at += batch_size) {
    const int b = std::min(batch_size, n - at);
    idx.resize(b);
    for (int i = 0; i < b; ++i) idx[i] = at + i;
    const Tensor<float> logits = forward(spec, params, stack_images(images, idx));
    for (int i = 0; i < b; ++i) {
      float lo = logits.at2(i, 0), hi = logits.at2(i, 0);
      for (int c = 1; c < logits.shape[1]; ++c) {
        const float v = logits.at2(i, c);
        lo = v < lo ? v : lo;
        hi = v > hi ? v : hi;
      }
      range = std::max(range, static_cast<double>(hi - lo));
    }
  }
  return range;
}

}  // namespace fedshard

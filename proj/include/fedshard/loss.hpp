#pragma once

#include <cmath>
#include <vector>

#include "fedshard/ops.hpp"

namespace fedshard {

template <typename T>
struct LossResult {
  double loss = 0;
  Gradients<T> grads;
};

// Mean softmax cross-entropy over the batch plus parameter gradients.
template <typename T>
LossResult<T> cross_entropy_loss(const NetworkSpec& spec, const ParamSet<T>& params,
                                 const Tensor<T>& batch, const std::vector<int>& labels) {
  const ForwardTrace<T> trace = forward_trace(spec, params, batch);
  const Tensor<T>& logits = trace.output();
  require(logits.shape.size() == 2, "cross_entropy_loss: network output is not [N, classes]");
  const int n = logits.shape[0];
  const int classes = logits.shape[1];
  require(static_cast<int>(labels.size()) == n,
          "cross_entropy_loss: " + std::to_string(labels.size()) + " labels for batch of " +
              std::to_string(n));
  if (!logits.all_finite()) throw Error("cross_entropy_loss: non-finite logits");

  Tensor<T> dlogits({n, classes});
  double loss_sum = 0;
  const T invn = T(1) / static_cast<T>(n);
  for (int i = 0; i < n; ++i) {
    const int y = labels[i];
    require(y >= 0 && y < classes,
            "cross_entropy_loss: label " + std::to_string(y) + " out of range [0, " +
                std::to_string(classes) + ")");
    const T* row = &logits.at2(i, 0);
    T mx = row[0];
    for (int c = 1; c < classes; ++c) mx = row[c] > mx ? row[c] : mx;
    double sum = 0;
    for (int c = 0; c < classes; ++c) sum += std::exp(static_cast<double>(row[c] - mx));
    const double logz = std::log(sum);
    loss_sum += logz - static_cast<double>(row[y] - mx);
    for (int c = 0; c < classes; ++c) {
      const double p = std::exp(static_cast<double>(row[c] - mx)) / sum;
      dlogits.at2(i, c) = (static_cast<T>(p) - (c == y ? T(1) : T(0))) * invn;
    }
  }

  LossResult<T> out;
  out.loss = loss_sum / n;
  out.grads = backward(spec, params, trace, dlogits);
  return out;
}

// Mean squared error against scalar targets; the network must emit one value
// per sample ([N, 1] output).
template <typename T>
LossResult<T> squared_error_loss(const NetworkSpec& spec, const ParamSet<T>& params,
                                 const Tensor<T>& batch, const std::vector<T>& targets) {
  const ForwardTrace<T> trace = forward_trace(spec, params, batch);
  const Tensor<T>& out = trace.output();
  require(out.shape.size() == 2 && out.shape[1] == 1,
          "squared_error_loss: network output is not a scalar per sample");
  const int n = out.shape[0];
  require(static_cast<int>(targets.size()) == n,
          "squared_error_loss: " + std::to_string(targets.size()) + " targets for batch of " +
              std::to_string(n));
  if (!out.all_finite()) throw Error("squared_error_loss: non-finite output");

  Tensor<T> dout({n, 1});
  double loss_sum = 0;
  const T invn = T(1) / static_cast<T>(n);
  for (int i = 0; i < n; ++i) {
    const T d = out.at2(i, 0) - targets[i];
    loss_sum += static_cast<double>(d) * static_cast<double>(d);
    dout.at2(i, 0) = T(2) * d * invn;
  }

  LossResult<T> res;
  res.loss = loss_sum / n;
  res.grads = backward(spec, params, trace, dout);
  return res;
}

}  // namespace fedshard

#pragma once

#include <string>
#include <vector>

#include "fedshard/net.hpp"
#include "fedshard/params.hpp"
#include "fedshard/tensor.hpp"

namespace fedshard {

namespace detail {

template <typename T>
void check_params_match(const NetworkSpec& spec, const ParamSet<T>& params) {
  std::size_t want = 0;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& l = spec.layers[i];
    if (!l.has_params()) continue;
    want += 2;
    const Tensor<T>* w = params.find(static_cast<int>(i), ParamRole::weight);
    const Tensor<T>* b = params.find(static_cast<int>(i), ParamRole::bias);
    const std::string where = "layer " + std::to_string(i);
    require(w != nullptr && b != nullptr, where + ": missing parameters");
    if (l.kind == LayerKind::conv2d) {
      require(w->shape == std::vector<int>{l.out_channels, l.in_channels,
                                           l.kernel_size, l.kernel_size},
              where + " (conv2d): weight shape " + w->shape_str() + " mismatch");
      require(b->shape == std::vector<int>{l.out_channels},
              where + " (conv2d): bias shape mismatch");
    } else {
      require(w->shape == std::vector<int>{l.out_dim, l.in_dim},
              where + " (dense): weight shape " + w->shape_str() + " mismatch");
      require(b->shape == std::vector<int>{l.out_dim},
              where + " (dense): bias shape mismatch");
    }
  }
  require(params.entries.size() == want,
          "params have " + std::to_string(params.entries.size()) +
              " entries, network expects " + std::to_string(want));
}

template <typename T>
Tensor<T> conv2d_forward(const LayerSpec& l, const Tensor<T>& w,
                         const Tensor<T>& b, const Tensor<T>& x) {
  const int n = x.shape[0], ih = x.shape[2], iw = x.shape[3];
  const int oh = (ih - l.kernel_size) / l.stride + 1;
  const int ow = (iw - l.kernel_size) / l.stride + 1;
  Tensor<T> y({n, l.out_channels, oh, ow});
  const int k = l.kernel_size, s = l.stride;
  for (int in = 0; in < n; ++in) {
    for (int oc = 0; oc < l.out_channels; ++oc) {
      for (int i = 0; i < oh; ++i) {
        for (int j = 0; j < ow; ++j) {
          T acc = b[oc];
          for (int ic = 0; ic < l.in_channels; ++ic) {
            for (int kh = 0; kh < k; ++kh) {
              const T* xrow = &x.at4(in, ic, i * s + kh, j * s);
              const T* wrow = &w.at4(oc, ic, kh, 0);
              for (int kw = 0; kw < k; ++kw) acc += wrow[kw] * xrow[kw];
            }
          }
          y.at4(in, oc, i, j) = acc;
        }
      }
    }
  }
  return y;
}

template <typename T>
void conv2d_backward(const LayerSpec& l, const Tensor<T>& w, const Tensor<T>& x,
                     const Tensor<T>& dy, Tensor<T>& dw, Tensor<T>& db,
                     Tensor<T>& dx) {
  const int n = x.shape[0];
  const int oh = dy.shape[2], ow = dy.shape[3];
  const int k = l.kernel_size, s = l.stride;
  for (int in = 0; in < n; ++in) {
    for (int oc = 0; oc < l.out_channels; ++oc) {
      for (int i = 0; i < oh; ++i) {
        for (int j = 0; j < ow; ++j) {
          const T g = dy.at4(in, oc, i, j);
          db[oc] += g;
          for (int ic = 0; ic < l.in_channels; ++ic) {
            for (int kh = 0; kh < k; ++kh) {
              const T* xrow = &x.at4(in, ic, i * s + kh, j * s);
              T* dxrow = &dx.at4(in, ic, i * s + kh, j * s);
              const T* wrow = &w.at4(oc, ic, kh, 0);
              T* dwrow = &dw.at4(oc, ic, kh, 0);
              for (int kw = 0; kw < k; ++kw) {
                dwrow[kw] += g * xrow[kw];
                dxrow[kw] += g * wrow[kw];
              }
            }
          }
        }
      }
    }
  }
}

template <typename T>
Tensor<T> dense_forward(const LayerSpec& l, const Tensor<T>& w,
                        const Tensor<T>& b, const Tensor<T>& x) {
  const int n = x.shape[0];
  Tensor<T> y({n, l.out_dim});
  for (int in = 0; in < n; ++in) {
    const T* xrow = &x.at2(in, 0);
    for (int o = 0; o < l.out_dim; ++o) {
      T acc = b[o];
      const T* wrow = &w.at2(o, 0);
      for (int i = 0; i < l.in_dim; ++i) acc += wrow[i] * xrow[i];
      y.at2(in, o) = acc;
    }
  }
  return y;
}

template <typename T>
void dense_backward(const LayerSpec& l, const Tensor<T>& w, const Tensor<T>& x,
                    const Tensor<T>& dy, Tensor<T>& dw, Tensor<T>& db,
                    Tensor<T>& dx) {
  const int n = x.shape[0];
  for (int in = 0; in < n; ++in) {
    const T* xrow = &x.at2(in, 0);
    T* dxrow = &dx.at2(in, 0);
    for (int o = 0; o < l.out_dim; ++o) {
      const T g = dy.at2(in, o);
      db[o] += g;
      const T* wrow = &w.at2(o, 0);
      T* dwrow = &dw.at2(o, 0);
      for (int i = 0; i < l.in_dim; ++i) {
        dwrow[i] += g * xrow[i];
        dxrow[i] += g * wrow[i];
      }
    }
  }
}

template <typename T>
Tensor<T> avgpool_forward(const LayerSpec& l, const Tensor<T>& x) {
  const int n = x.shape[0], c = x.shape[1], ih = x.shape[2], iw = x.shape[3];
  const int p = l.pool_size;
  const int oh = ih / p, ow = iw / p;
  const T inv = T(1) / static_cast<T>(p * p);
  Tensor<T> y({n, c, oh, ow});
  for (int in = 0; in < n; ++in) {
    for (int ic = 0; ic < c; ++ic) {
      for (int i = 0; i < oh; ++i) {
        for (int j = 0; j < ow; ++j) {
          T acc = T(0);
          for (int u = 0; u < p; ++u) {
            for (int v = 0; v < p; ++v) acc += x.at4(in, ic, i * p + u, j * p + v);
          }
          y.at4(in, ic, i, j) = acc * inv;
        }
      }
    }
  }
  return y;
}

template <typename T>
void avgpool_backward(const LayerSpec& l, const Tensor<T>& x,
                      const Tensor<T>& dy, Tensor<T>& dx) {
  const int n = x.shape[0], c = x.shape[1];
  const int oh = dy.shape[2], ow = dy.shape[3];
  const int p = l.pool_size;
  const T inv = T(1) / static_cast<T>(p * p);
  for (int in = 0; in < n; ++in) {
    for (int ic = 0; ic < c; ++ic) {
      for (int i = 0; i < oh; ++i) {
        for (int j = 0; j < ow; ++j) {
          const T g = dy.at4(in, ic, i, j) * inv;
          for (int u = 0; u < p; ++u) {
            for (int v = 0; v < p; ++v) dx.at4(in, ic, i * p + u, j * p + v) += g;
          }
        }
      }
    }
  }
}

}  // namespace detail

// Activations of every layer for one batch; acts[0] is the input,
// acts[i+1] the output of layer i.
template <typename T>
struct ForwardTrace {
  std::vector<Tensor<T>> acts;
  const Tensor<T>& output() const { return acts.back(); }
};

// Runs the network on a batch ([N,C,H,W] or [N,D] matching the spec input).
template <typename T>
ForwardTrace<T> forward_trace(const NetworkSpec& spec, const ParamSet<T>& params,
                              const Tensor<T>& batch) {
  bool ok = batch.shape.size() == spec.input_shape.size() + 1 && batch.shape[0] >= 1;
  for (std::size_t d = 0; ok && d < spec.input_shape.size(); ++d) {
    ok = batch.shape[d + 1] == spec.input_shape[d];
  }
  if (!ok) {
    std::string want = "[N";
    for (int d : spec.input_shape) want += ", " + std::to_string(d);
    throw Error("forward: batch shape " + batch.shape_str() +
                " does not match network input (expected " + want + "])");
  }
  spec.activation_shapes();  // throws on a bad layer chain
  detail::check_params_match(spec, params);
  const int n = batch.shape[0];

  ForwardTrace<T> trace;
  trace.acts.reserve(spec.layers.size() + 1);
  trace.acts.push_back(batch);
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& l = spec.layers[i];
    const Tensor<T>& x = trace.acts.back();
    switch (l.kind) {
      case LayerKind::conv2d: {
        const Tensor<T>* w = params.find(static_cast<int>(i), ParamRole::weight);
        const Tensor<T>* b = params.find(static_cast<int>(i), ParamRole::bias);
        trace.acts.push_back(detail::conv2d_forward(l, *w, *b, x));
        break;
      }
      case LayerKind::dense: {
        const Tensor<T>* w = params.find(static_cast<int>(i), ParamRole::weight);
        const Tensor<T>* b = params.find(static_cast<int>(i), ParamRole::bias);
        trace.acts.push_back(detail::dense_forward(l, *w, *b, x));
        break;
      }
      case LayerKind::relu: {
        Tensor<T> y = x;
        for (auto& v : y.data) v = v > T(0) ? v : T(0);
        trace.acts.push_back(std::move(y));
        break;
      }
      case LayerKind::avgpool:
        trace.acts.push_back(detail::avgpool_forward(l, x));
        break;
      case LayerKind::flatten: {
        std::vector<int> flat = {n, 1};
        for (std::size_t d = 1; d < x.shape.size(); ++d) flat[1] *= x.shape[d];
        trace.acts.push_back(x.reshaped(flat));
        break;
      }
    }
  }
  return trace;
}

template <typename T>
Tensor<T> forward(const NetworkSpec& spec, const ParamSet<T>& params,
                  const Tensor<T>& batch) {
  Tensor<T> out = forward_trace(spec, params, batch).acts.back();
  require(out.all_finite(), "forward: non-finite network output");
  return out;
}

// Backpropagates d(loss)/d(output) through the trace.
template <typename T>
Gradients<T> backward(const NetworkSpec& spec, const ParamSet<T>& params,
                      const ForwardTrace<T>& trace, const Tensor<T>& dout) {
  Gradients<T> grads = zero_params<T>(spec);
  Tensor<T> dy = dout;
  for (int i = static_cast<int>(spec.layers.size()) - 1; i >= 0; --i) {
    const LayerSpec& l = spec.layers[i];
    const Tensor<T>& x = trace.acts[i];
    switch (l.kind) {
      case LayerKind::conv2d: {
        const Tensor<T>* w = params.find(i, ParamRole::weight);
        Tensor<T>* dw = grads.find(i, ParamRole::weight);
        Tensor<T>* db = grads.find(i, ParamRole::bias);
        Tensor<T> dx(x.shape);
        detail::conv2d_backward(l, *w, x, dy, *dw, *db, dx);
        dy = std::move(dx);
        break;
      }
      case LayerKind::dense: {
        const Tensor<T>* w = params.find(i, ParamRole::weight);
        Tensor<T>* dw = grads.find(i, ParamRole::weight);
        Tensor<T>* db = grads.find(i, ParamRole::bias);
        Tensor<T> dx(x.shape);
        detail::dense_backward(l, *w, x, dy, *dw, *db, dx);
        dy = std::move(dx);
        break;
      }
      case LayerKind::relu: {
        Tensor<T> dx = dy;
        for (std::int64_t j = 0; j < dx.size(); ++j) {
          if (!(x[j] > T(0))) dx[j] = T(0);
        }
        dy = std::move(dx);
        break;
      }
      case LayerKind::avgpool: {
        Tensor<T> dx(x.shape);
        detail::avgpool_backward(l, x, dy, dx);
        dy = std::move(dx);
        break;
      }
      case LayerKind::flatten:
        dy = dy.reshaped(x.shape);
        break;
    }
  }
  return grads;
}

}  // namespace fedshard

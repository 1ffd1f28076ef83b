#pragma once

#include <string>
#include <vector>

#include "fedshard/metrics.hpp"
#include "fedshard/subnet.hpp"

namespace fedshard {

// How the implanted subnet is wired into the host classifier.
struct WiringSpec {
  int target_label = 0;
  double logit_boost = 0;       // classifier weight from the subnet unit to the target logit
  bool sever_incoming = true;   // cut host->subnet connections (subnet sees only itself)
  bool sever_outgoing = true;   // cut subnet->host connections (host sees only the classifier wire)
};

// Writes the trained subnet into the designated host channels of a copy of
// host_params: subnet weights replace the designated rows, cross connections
// between subnet and host channels are cut (per the wiring flags), and in the
// classifier the subnet's scalar unit feeds the target logit with weight
// logit_boost and every other logit with 0. The input set is untouched.
inline ParamSet<float> replace_subnet(const NetworkSpec& host,
                                      const ParamSet<float>& host_params,
                                      const SubnetSpec& sub,
                                      const ParamSet<float>& subnet_params,
                                      const WiringSpec& wiring) {
  validate_subnet_spec(host, sub);
  const NetworkSpec sspec = build_subnet_spec(host, sub);
  check_congruent(host, host_params);
  check_congruent(sspec, subnet_params);
  require(wiring.target_label >= 0 && wiring.target_label < host.num_classes,
          "surgery: target label " + std::to_string(wiring.target_label) +
              " out of range");

  const std::vector<int> mirrored = detail::mirrored_layers(host);
  ParamSet<float> out = host_params;

  for (std::size_t j = 0; j < mirrored.size(); ++j) {
    const int li = mirrored[j];
    const LayerSpec& l = host.layers[li];
    const Tensor<float>& sw = *subnet_params.find(li, ParamRole::weight);
    const Tensor<float>& sb = *subnet_params.find(li, ParamRole::bias);
    Tensor<float>& hw = *out.find(li, ParamRole::weight);
    Tensor<float>& hb = *out.find(li, ParamRole::bias);
    const std::vector<int>& sel = sub.host_channels[j];
    const std::vector<int>& prev_sel = j == 0 ? sel /*unused*/ : sub.host_channels[j - 1];

    auto selected = [&sel](int c) {
      for (int s : sel) {
        if (s == c) return true;
      }
      return false;
    };

    if (l.kind == LayerKind::conv2d) {
      const int k = l.kernel_size;
      for (std::size_t q = 0; q < sel.size(); ++q) {
        const int oc = sel[q];
        if (j == 0) {
          // first layer: subnet keeps full input connectivity
          for (int ic = 0; ic < l.in_channels; ++ic) {
            for (int kh = 0; kh < k; ++kh) {
              for (int kw = 0; kw < k; ++kw) {
                hw.at4(oc, ic, kh, kw) = sw.at4(static_cast<int>(q), ic, kh, kw);
              }
            }
          }
        } else {
          if (wiring.sever_incoming) {
            for (int ic = 0; ic < l.in_channels; ++ic) {
              for (int kh = 0; kh < k; ++kh) {
                for (int kw = 0; kw < k; ++kw) hw.at4(oc, ic, kh, kw) = 0.0f;
              }
            }
          }
          for (std::size_t p = 0; p < prev_sel.size(); ++p) {
            for (int kh = 0; kh < k; ++kh) {
              for (int kw = 0; kw < k; ++kw) {
                hw.at4(oc, prev_sel[p], kh, kw) =
                    sw.at4(static_cast<int>(q), static_cast<int>(p), kh, kw);
              }
            }
          }
        }
        hb[oc] = sb[static_cast<int>(q)];
      }
      if (j > 0 && wiring.sever_outgoing) {
        for (int oc = 0; oc < l.out_channels; ++oc) {
          if (selected(oc)) continue;
          for (int p : prev_sel) {
            for (int kh = 0; kh < k; ++kh) {
              for (int kw = 0; kw < k; ++kw) hw.at4(oc, p, kh, kw) = 0.0f;
            }
          }
        }
      }
    } else {  // dense
      // column block per upstream channel: conv->...->flatten->dense keeps a
      // spatial block of columns per channel, dense->dense has a block of 1
      int block = 1;
      if (j > 0 && host.layers[mirrored[j - 1]].kind == LayerKind::conv2d) {
        block = l.in_dim / host.layers[mirrored[j - 1]].out_channels;
      }
      for (std::size_t q = 0; q < sel.size(); ++q) {
        const int r = sel[q];
        if (j == 0) {
          for (int i = 0; i < l.in_dim; ++i) {
            hw.at2(r, i) = sw.at2(static_cast<int>(q), i);
          }
        } else {
          if (wiring.sever_incoming) {
            for (int i = 0; i < l.in_dim; ++i) hw.at2(r, i) = 0.0f;
          }
          for (std::size_t p = 0; p < prev_sel.size(); ++p) {
            for (int t = 0; t < block; ++t) {
              hw.at2(r, prev_sel[p] * block + t) =
                  sw.at2(static_cast<int>(q), static_cast<int>(p) * block + t);
            }
          }
        }
        hb[r] = sb[static_cast<int>(q)];
      }
      if (j > 0 && wiring.sever_outgoing) {
        for (int r = 0; r < l.out_dim; ++r) {
          if (selected(r)) continue;
          for (int p : prev_sel) {
            for (int t = 0; t < block; ++t) hw.at2(r, p * block + t) = 0.0f;
          }
        }
      }
    }
  }

  // classifier: the subnet's scalar unit drives only the target logit
  const int lc = host.parametric_layer_indices().back();
  Tensor<float>& cw = *out.find(lc, ParamRole::weight);
  const int unit = sub.host_channels.back()[0];
  for (int r = 0; r < host.num_classes; ++r) {
    cw.at2(r, unit) = r == wiring.target_label ? static_cast<float>(wiring.logit_boost) : 0.0f;
  }
  return out;
}

// Chooses the classifier boost so the subnet's triggered activation pushes the
// target logit past any clean logit by at least `margin`:
//   boost = (largest clean logit spread + margin) / activation_target.
inline double calibrate_logit_boost(double max_clean_logit_range, double activation_target,
                                    double margin) {
  require(activation_target > 0, "calibrate_logit_boost: activation_target must be > 0");
  require(margin >= 0, "calibrate_logit_boost: margin must be >= 0");
  require(max_clean_logit_range >= 0,
          "calibrate_logit_boost: logit range must be >= 0");
  return (max_clean_logit_range + margin) / activation_target;
}

inline double calibrate_logit_boost(const NetworkSpec& spec, const ParamSet<float>& params,
                                    const std::vector<Tensor<float>>& images,
                                    double activation_target, double margin) {
  return calibrate_logit_boost(max_logit_range(spec, params, images), activation_target,
                               margin);
}

}  // namespace fedshard

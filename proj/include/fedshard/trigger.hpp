#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "fedshard/data.hpp"

namespace fedshard {

enum class TriggerKind { white_patch, logo_patch };

inline std::string to_string(TriggerKind k) {
  return k == TriggerKind::white_patch ? "white_patch" : "logo_patch";
}

// A patch pasted over a fixed position of the image; triggered inputs should
// be classified as target_label by a backdoored model.
struct TriggerSpec {
  TriggerKind kind = TriggerKind::white_patch;
  Tensor<float> patch;  // [C,h,w]
  int row = 0;          // top-left corner in the image
  int col = 0;
  int target_label = 0;
};

inline TriggerSpec make_white_trigger(int channels, int size, int row, int col,
                                      int target_label) {
  require(channels >= 1 && size >= 0, "make_white_trigger: bad patch shape");
  TriggerSpec t;
  t.kind = TriggerKind::white_patch;
  t.patch = Tensor<float>({channels, size, size});
  for (auto& v : t.patch.data) v = 1.0f;
  t.row = row;
  t.col = col;
  t.target_label = target_label;
  return t;
}

// Fixed multi-valued pattern (tiled for sizes other than 3) with per-channel
// attenuation, standing in for a small image logo.
inline TriggerSpec make_logo_trigger(int channels, int size, int row, int col,
                                     int target_label) {
  require(channels >= 1 && size >= 0, "make_logo_trigger: bad patch shape");
  static constexpr float base[3][3] = {
      {0.95f, 0.10f, 0.90f}, {0.15f, 0.85f, 0.20f}, {0.80f, 0.25f, 0.95f}};
  static constexpr float mult[3] = {1.0f, 0.8f, 0.6f};
  TriggerSpec t;
  t.kind = TriggerKind::logo_patch;
  t.patch = Tensor<float>({channels, size, size});
  for (int c = 0; c < channels; ++c) {
    for (int i = 0; i < size; ++i) {
      for (int j = 0; j < size; ++j) {
        t.patch.at3(c, i, j) = base[i % 3][j % 3] * mult[c % 3];
      }
    }
  }
  t.row = row;
  t.col = col;
  t.target_label = target_label;
  return t;
}

// Pastes the trigger patch onto a copy of the image (pixels overwritten, so
// applying twice equals applying once). A zero-size patch is a no-op.
inline Tensor<float> apply_trigger(const Tensor<float>& img, const TriggerSpec& t) {
  require(img.shape.size() == 3 && t.patch.shape.size() == 3,
          "apply_trigger: need [C,H,W] image and patch");
  require(img.shape[0] == t.patch.shape[0],
          "apply_trigger: image has " + std::to_string(img.shape[0]) +
              " channels, patch " + std::to_string(t.patch.shape[0]));
  const int ph = t.patch.shape[1], pw = t.patch.shape[2];
  require(t.row >= 0 && t.col >= 0 && t.row + ph <= img.shape[1] &&
              t.col + pw <= img.shape[2],
          "apply_trigger: patch at (" + std::to_string(t.row) + "," +
              std::to_string(t.col) + ") size " + std::to_string(ph) + "x" +
              std::to_string(pw) + " exceeds image " + img.shape_str());
  Tensor<float> out = img;
  for (int c = 0; c < img.shape[0]; ++c) {
    for (int i = 0; i < ph; ++i) {
      for (int j = 0; j < pw; ++j) out.at3(c, t.row + i, t.col + j) = t.patch.at3(c, i, j);
    }
  }
  return out;
}

// Triggered copy of every image; labels and ids untouched (for evaluation).
inline LabeledDataset apply_trigger_all(const LabeledDataset& ds, const TriggerSpec& t) {
  LabeledDataset out = ds;
  for (auto& img : out.images) img = apply_trigger(img, t);
  return out;
}

// Poisons round-half-up(fraction*n) seed-chosen samples: trigger applied and
// label flipped to the trigger target. Ids are preserved.
inline LabeledDataset poison_dataset(const LabeledDataset& ds, const TriggerSpec& t,
                                     double fraction, std::uint64_t seed) {
  require(fraction >= 0.0 && fraction <= 1.0,
          "poison_dataset: fraction must be in [0,1]");
  const int n = static_cast<int>(ds.size());
  const int count = static_cast<int>(std::floor(fraction * n + 0.5));
  LabeledDataset out = ds;
  if (count == 0) return out;
  Rng rng(derive_seed(seed, "poison"));
  for (int i : rng.sample_without_replacement(n, count)) {
    out.images[i] = apply_trigger(out.images[i], t);
    out.labels[i] = t.target_label;
  }
  return out;
}

}  // namespace fedshard

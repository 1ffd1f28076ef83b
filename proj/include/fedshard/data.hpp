#pragma once

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "fedshard/error.hpp"
#include "fedshard/rng.hpp"
#include "fedshard/tensor.hpp"

namespace fedshard {

static_assert(std::endian::native == std::endian::little,
              "binary dataset and checkpoint formats assume a little-endian host");

struct LabeledDataset {
  std::vector<Tensor<float>> images;  // each [C,H,W], values in [0,1]
  std::vector<int> labels;
  std::vector<std::int64_t> ids;  // unique per source sample, stable across splits

  std::size_t size() const { return images.size(); }
  bool empty() const { return images.empty(); }
};

struct ClientShard {
  int client_id = 0;
  LabeledDataset data;

  int sample_count() const { return static_cast<int>(data.size()); }
};

// Unlabeled images available to the server.
struct PublicDataset {
  std::vector<Tensor<float>> images;
  std::vector<std::int64_t> ids;

  std::size_t size() const { return images.size(); }
};

inline void check_dataset(const LabeledDataset& ds) {
  require(ds.labels.size() == ds.images.size() && ds.ids.size() == ds.images.size(),
          "dataset: images/labels/ids length mismatch");
  for (std::size_t i = 0; i < ds.images.size(); ++i) {
    require(ds.images[i].shape.size() == 3, "dataset: image " + std::to_string(i) +
                                                " is not [C,H,W]");
    require(ds.images[i].shape == ds.images[0].shape,
            "dataset: image " + std::to_string(i) + " shape differs from image 0");
    require(ds.labels[i] >= 0, "dataset: negative label at " + std::to_string(i));
  }
}

inline LabeledDataset dataset_subset(const LabeledDataset& ds,
                                     const std::vector<int>& indices) {
  LabeledDataset out;
  out.images.reserve(indices.size());
  out.labels.reserve(indices.size());
  out.ids.reserve(indices.size());
  for (int i : indices) {
    require(i >= 0 && static_cast<std::size_t>(i) < ds.size(),
            "dataset_subset: index " + std::to_string(i) + " out of range");
    out.images.push_back(ds.images[i]);
    out.labels.push_back(ds.labels[i]);
    out.ids.push_back(ds.ids[i]);
  }
  return out;
}

// Stacks images[idx] into one [B,C,H,W] batch tensor.
inline Tensor<float> stack_images(const std::vector<Tensor<float>>& images,
                                  const std::vector<int>& idx) {
  require(!idx.empty(), "stack_images: empty batch");
  const Tensor<float>& first = images.at(idx.at(0));
  std::vector<int> shape = {static_cast<int>(idx.size())};
  shape.insert(shape.end(), first.shape.begin(), first.shape.end());
  Tensor<float> batch(shape);
  const std::int64_t per = first.size();
  for (std::size_t b = 0; b < idx.size(); ++b) {
    const Tensor<float>& img = images.at(idx[b]);
    require(img.shape == first.shape, "stack_images: mixed image shapes");
    std::copy(img.data.begin(), img.data.end(), batch.data.begin() + b * per);
  }
  return batch;
}

// Synthetic classification task: each class is a smooth multi-bump prototype,
// samples are the prototype plus Gaussian pixel noise. Deterministic in seed.
inline LabeledDataset synth_dataset(int classes, int per_class,
                                    const std::vector<int>& shape, std::uint64_t seed,
                                    float noise = 0.15f) {
  require(classes >= 2, "synth_dataset: need at least 2 classes");
  require(per_class >= 1, "synth_dataset: per_class must be positive");
  require(shape.size() == 3 && shape[0] >= 1 && shape[1] >= 4 && shape[2] >= 4,
          "synth_dataset: shape must be [C,H,W] with H,W >= 4");
  const int c = shape[0], h = shape[1], w = shape[2];

  LabeledDataset ds;
  ds.images.reserve(static_cast<std::size_t>(classes) * per_class);
  for (int cls = 0; cls < classes; ++cls) {
    Rng proto_rng(derive_seed(seed, "proto", static_cast<std::uint64_t>(cls)));
    struct Bump {
      double cy, cx, sigma, amp;
    };
    Bump bumps[3];
    for (int b = 0; b < 3; ++b) {
      bumps[b].cy = proto_rng.uniform(1.5, h - 2.5);
      bumps[b].cx = proto_rng.uniform(1.5, w - 2.5);
      bumps[b].sigma = proto_rng.uniform(1.2, 3.0);
      bumps[b].amp = proto_rng.uniform(0.35, 0.65) * (b == 1 ? -1.0 : 1.0);
    }
    std::vector<double> ch_scale(c);
    for (int ch = 0; ch < c; ++ch) ch_scale[ch] = proto_rng.uniform(0.7, 1.0);

    Tensor<float> proto(shape);
    for (int ch = 0; ch < c; ++ch) {
      for (int i = 0; i < h; ++i) {
        for (int j = 0; j < w; ++j) {
          double v = 0;
          for (const Bump& b : bumps) {
            const double d2 = (i - b.cy) * (i - b.cy) + (j - b.cx) * (j - b.cx);
            v += b.amp * std::exp(-d2 / (2.0 * b.sigma * b.sigma));
          }
          v = 0.5 + ch_scale[ch] * v;
          proto.at3(ch, i, j) = static_cast<float>(std::clamp(v, 0.15, 0.8));
        }
      }
    }

    Rng noise_rng(derive_seed(seed, "noise", static_cast<std::uint64_t>(cls)));
    for (int s = 0; s < per_class; ++s) {
      Tensor<float> img = proto;
      for (auto& v : img.data) {
        v = std::clamp(v + noise * static_cast<float>(noise_rng.normal()), 0.0f, 1.0f);
      }
      ds.images.push_back(std::move(img));
      ds.labels.push_back(cls);
      ds.ids.push_back(static_cast<std::int64_t>(cls) * per_class + s);
    }
  }
  return ds;
}

// CIFAR-10 binary batch: 3073-byte records, label byte then 3x1024 pixel planes.
inline LabeledDataset load_cifar10(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), "cannot open " + path);
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
  constexpr std::size_t record = 3073;
  if (bytes.size() % record != 0) {
    throw Error(path + ": truncated record at byte offset " +
                std::to_string((bytes.size() / record) * record));
  }
  const std::size_t n = bytes.size() / record;
  require(n > 0, path + ": empty file");

  LabeledDataset ds;
  ds.images.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const unsigned char* rec =
        reinterpret_cast<const unsigned char*>(bytes.data()) + i * record;
    const int label = rec[0];
    if (label > 9) {
      throw Error(path + ": invalid label " + std::to_string(label) +
                  " at byte offset " + std::to_string(i * record));
    }
    Tensor<float> img({3, 32, 32});
    for (std::int64_t p = 0; p < 3072; ++p) {
      img.data[p] = static_cast<float>(rec[1 + p]) / 255.0f;
    }
    ds.images.push_back(std::move(img));
    ds.labels.push_back(label);
    ds.ids.push_back(static_cast<std::int64_t>(i));
  }
  return ds;
}

// Directory layout: meta.json ({"count":N,"shape":[C,H,W]}), images.f32
// (count*C*H*W little-endian floats), labels.u8 (count bytes).
inline void save_tensor_dir(const LabeledDataset& ds, const std::string& dir) {
  check_dataset(ds);
  require(!ds.empty(), "save_tensor_dir: empty dataset");
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const std::vector<int>& shape = ds.images[0].shape;

  std::ofstream meta(fs::path(dir) / "meta.json");
  require(static_cast<bool>(meta), "cannot write " + dir + "/meta.json");
  meta << "{\"count\":" << ds.size() << ",\"shape\":[" << shape[0] << "," << shape[1]
       << "," << shape[2] << "]}\n";

  std::ofstream imgs(fs::path(dir) / "images.f32", std::ios::binary);
  require(static_cast<bool>(imgs), "cannot write " + dir + "/images.f32");
  for (const auto& img : ds.images) {
    imgs.write(reinterpret_cast<const char*>(img.data.data()),
               static_cast<std::streamsize>(img.data.size() * sizeof(float)));
  }

  std::ofstream labels(fs::path(dir) / "labels.u8", std::ios::binary);
  require(static_cast<bool>(labels), "cannot write " + dir + "/labels.u8");
  for (int l : ds.labels) {
    require(l >= 0 && l <= 255, "save_tensor_dir: label out of u8 range");
    const unsigned char b = static_cast<unsigned char>(l);
    labels.write(reinterpret_cast<const char*>(&b), 1);
  }
}

inline LabeledDataset load_tensor_dir(const std::string& dir) {
  namespace fs = std::filesystem;
  std::ifstream meta(fs::path(dir) / "meta.json");
  require(static_cast<bool>(meta), "cannot open " + dir + "/meta.json");
  std::string text((std::istreambuf_iterator<char>(meta)),
                   std::istreambuf_iterator<char>());
  // meta.json is machine-written; parse the two fields with a scan rather than
  // pulling in a JSON dependency at this layer.
  auto read_int_after = [&](const std::string& key) -> long {
    const std::size_t at = text.find(key);
    require(at != std::string::npos, dir + "/meta.json: missing " + key);
    std::size_t p = at + key.size();
    while (p < text.size() && (text[p] == ':' || text[p] == '[' || text[p] == ' ')) ++p;
    require(p < text.size() && (std::isdigit(text[p]) != 0), dir + "/meta.json: bad " + key);
    return std::stol(text.substr(p));
  };
  const long count = read_int_after("\"count\"");
  const std::size_t shape_at = text.find("\"shape\"");
  require(shape_at != std::string::npos, dir + "/meta.json: missing \"shape\"");
  std::vector<int> shape;
  {
    std::size_t p = text.find('[', shape_at);
    require(p != std::string::npos, dir + "/meta.json: bad \"shape\"");
    ++p;
    while (p < text.size() && text[p] != ']') {
      require(std::isdigit(text[p]) != 0, dir + "/meta.json: bad \"shape\"");
      shape.push_back(std::stoi(text.substr(p)));
      while (p < text.size() && std::isdigit(text[p]) != 0) ++p;
      if (p < text.size() && text[p] == ',') ++p;
    }
  }
  require(count > 0 && shape.size() == 3, dir + "/meta.json: bad count or shape");

  const std::int64_t per = static_cast<std::int64_t>(shape[0]) * shape[1] * shape[2];
  std::ifstream imgs(fs::path(dir) / "images.f32", std::ios::binary);
  require(static_cast<bool>(imgs), "cannot open " + dir + "/images.f32");
  std::vector<char> raw((std::istreambuf_iterator<char>(imgs)),
                        std::istreambuf_iterator<char>());
  const std::size_t want = static_cast<std::size_t>(count) * per * sizeof(float);
  if (raw.size() != want) {
    const std::size_t whole = (raw.size() / (per * sizeof(float))) * per * sizeof(float);
    throw Error(dir + "/images.f32: expected " + std::to_string(want) +
                " bytes, got " + std::to_string(raw.size()) +
                " (truncated record at byte offset " + std::to_string(whole) + ")");
  }

  std::ifstream lab(fs::path(dir) / "labels.u8", std::ios::binary);
  require(static_cast<bool>(lab), "cannot open " + dir + "/labels.u8");
  std::vector<char> labraw((std::istreambuf_iterator<char>(lab)),
                           std::istreambuf_iterator<char>());
  if (labraw.size() != static_cast<std::size_t>(count)) {
    throw Error(dir + "/labels.u8: expected " + std::to_string(count) + " bytes, got " +
                std::to_string(labraw.size()) + " (mismatch at byte offset " +
                std::to_string(std::min<std::size_t>(labraw.size(), count)) + ")");
  }

  LabeledDataset ds;
  ds.images.reserve(count);
  for (long i = 0; i < count; ++i) {
    Tensor<float> img(shape);
    std::memcpy(img.data.data(), raw.data() + static_cast<std::size_t>(i) * per * sizeof(float),
                per * sizeof(float));
    ds.images.push_back(std::move(img));
    ds.labels.push_back(static_cast<unsigned char>(labraw[i]));
    ds.ids.push_back(i);
  }
  return ds;
}

inline Tensor<float> center_crop(const Tensor<float>& img, const std::vector<int>& shape) {
  require(img.shape.size() == 3 && shape.size() == 3, "center_crop: need [C,H,W]");
  require(img.shape[0] == shape[0], "center_crop: channel count mismatch");
  require(img.shape[1] >= shape[1] && img.shape[2] >= shape[2],
          "center_crop: target larger than source");
  if (img.shape == shape) return img;
  const int dy = (img.shape[1] - shape[1]) / 2;
  const int dx = (img.shape[2] - shape[2]) / 2;
  Tensor<float> out(shape);
  for (int c = 0; c < shape[0]; ++c) {
    for (int i = 0; i < shape[1]; ++i) {
      for (int j = 0; j < shape[2]; ++j) out.at3(c, i, j) = img.at3(c, i + dy, j + dx);
    }
  }
  return out;
}

// Draws `size` images from a labeled source (labels discarded), optionally
// center-cropping each image to `target_shape`.
inline PublicDataset make_public_dataset(const LabeledDataset& source, int size,
                                         std::uint64_t seed,
                                         const std::vector<int>& target_shape = {}) {
  require(size >= 1, "make_public_dataset: size must be positive");
  require(static_cast<std::size_t>(size) <= source.size(),
          "make_public_dataset: requested " + std::to_string(size) + " of " +
              std::to_string(source.size()) + " source images");
  Rng rng(derive_seed(seed, "public-draw"));
  std::vector<int> idx =
      rng.sample_without_replacement(static_cast<int>(source.size()), size);
  PublicDataset out;
  out.images.reserve(size);
  for (int i : idx) {
    out.images.push_back(target_shape.empty() ? source.images[i]
                                              : center_crop(source.images[i], target_shape));
    out.ids.push_back(source.ids[i]);
  }
  return out;
}

}  // namespace fedshard

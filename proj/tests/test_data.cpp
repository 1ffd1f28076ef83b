#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "catch_amalgamated.hpp"
#include "fedshard/data.hpp"

using namespace fedshard;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("synth dataset is deterministic with stable ids") {
  const auto a = synth_dataset(4, 5, {1, 8, 8}, 42);
  const auto b = synth_dataset(4, 5, {1, 8, 8}, 42);
  const auto c = synth_dataset(4, 5, {1, 8, 8}, 43);
  REQUIRE(a.size() == 20);
  check_dataset(a);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.images[i].data == b.images[i].data);
    CHECK(a.labels[i] == b.labels[i]);
    CHECK(a.ids[i] == b.ids[i]);
  }
  bool any_diff = false;
  for (std::size_t i = 0; i < a.size() && !any_diff; ++i)
    any_diff = a.images[i].data != c.images[i].data;
  CHECK(any_diff);

  // ids are class-major and unique
  std::set<std::int64_t> ids(a.ids.begin(), a.ids.end());
  CHECK(ids.size() == a.size());
  CHECK(a.ids[0] == 0);
  CHECK(a.labels[0] == 0);
  CHECK(a.ids[5] == 5);  // first sample of class 1
  CHECK(a.labels[5] == 1);

  for (const auto& img : a.images) {
    for (float v : img.data) {
      CHECK(v >= 0.0f);
      CHECK(v <= 1.0f);
    }
  }
}

TEST_CASE("synth classes are separated beyond the noise floor") {
  const auto ds = synth_dataset(4, 1, {1, 12, 12}, 7, /*noise=*/0.0f);
  // zero noise gives the raw prototypes; distinct classes must differ clearly
  double min_dist = 1e9;
  for (int i = 0; i < 4; ++i) {
    for (int j = i + 1; j < 4; ++j) {
      double d2 = 0;
      for (std::int64_t p = 0; p < ds.images[i].size(); ++p) {
        const double d = ds.images[i][p] - ds.images[j][p];
        d2 += d * d;
      }
      min_dist = std::min(min_dist, std::sqrt(d2));
    }
  }
  CHECK(min_dist > 0.5);
}

TEST_CASE("synth dataset rejects bad arguments") {
  CHECK_THROWS_AS(synth_dataset(1, 5, {1, 8, 8}, 1), Error);
  CHECK_THROWS_AS(synth_dataset(4, 0, {1, 8, 8}, 1), Error);
  CHECK_THROWS_AS(synth_dataset(4, 5, {1, 3, 8}, 1), Error);
  CHECK_THROWS_AS(synth_dataset(4, 5, {8, 8}, 1), Error);
}

TEST_CASE("cifar batch file parsing") {
  TempDir tmp("fedshard_cifar_test");
  const fs::path file = tmp.path / "batch.bin";
  {
    std::ofstream out(file, std::ios::binary);
    // two records: label 3 with all-zero pixels, label 9 with all-255 pixels
    std::vector<unsigned char> rec1(3073, 0);
    rec1[0] = 3;
    std::vector<unsigned char> rec2(3073, 255);
    rec2[0] = 9;
    out.write(reinterpret_cast<const char*>(rec1.data()), 3073);
    out.write(reinterpret_cast<const char*>(rec2.data()), 3073);
  }
  const auto ds = load_cifar10(file.string());
  REQUIRE(ds.size() == 2);
  CHECK(ds.labels[0] == 3);
  CHECK(ds.labels[1] == 9);
  CHECK(ds.images[0].shape == std::vector<int>{3, 32, 32});
  CHECK(ds.images[0].data[0] == 0.0f);
  CHECK(ds.images[1].data[100] == 1.0f);
  CHECK(ds.ids[0] == 0);
  CHECK(ds.ids[1] == 1);

  SECTION("truncated file reports the byte offset") {
    const fs::path bad = tmp.path / "trunc.bin";
    {
      std::ofstream out(bad, std::ios::binary);
      std::vector<unsigned char> rec(3073 + 100, 1);
      rec[0] = 0;
      out.write(reinterpret_cast<const char*>(rec.data()),
                static_cast<std::streamsize>(rec.size()));
    }
    try {
      load_cifar10(bad.string());
      FAIL("expected a truncation error");
    } catch (const Error& e) {
      CHECK(std::string(e.what()).find("byte offset 3073") != std::string::npos);
    }
  }

  SECTION("invalid label reports the byte offset") {
    const fs::path bad = tmp.path / "label.bin";
    {
      std::ofstream out(bad, std::ios::binary);
      std::vector<unsigned char> rec(3073, 0);
      rec[0] = 1;
      out.write(reinterpret_cast<const char*>(rec.data()), 3073);
      rec[0] = 77;
      out.write(reinterpret_cast<const char*>(rec.data()), 3073);
    }
    try {
      load_cifar10(bad.string());
      FAIL("expected a label error");
    } catch (const Error& e) {
      const std::string msg = e.what();
      CHECK(msg.find("invalid label 77") != std::string::npos);
      CHECK(msg.find("byte offset 3073") != std::string::npos);
    }
  }
}

TEST_CASE("tensor directory round trip is bit exact") {
  TempDir tmp("fedshard_tdir_test");
  const auto ds = synth_dataset(3, 4, {2, 6, 6}, 11);
  save_tensor_dir(ds, tmp.path.string());
  const auto back = load_tensor_dir(tmp.path.string());
  REQUIRE(back.size() == ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    CHECK(back.images[i].shape == ds.images[i].shape);
    CHECK(back.images[i].data == ds.images[i].data);  // bit-exact floats
    CHECK(back.labels[i] == ds.labels[i]);
  }

  SECTION("truncated image payload reports the byte offset") {
    const fs::path f = tmp.path / "images.f32";
    const auto full = fs::file_size(f);
    fs::resize_file(f, full - 7);
    try {
      load_tensor_dir(tmp.path.string());
      FAIL("expected a truncation error");
    } catch (const Error& e) {
      CHECK(std::string(e.what()).find("byte offset") != std::string::npos);
    }
  }
}

TEST_CASE("dataset subset and batch stacking") {
  const auto ds = synth_dataset(3, 2, {1, 6, 6}, 5);
  const auto sub = dataset_subset(ds, {5, 0, 3});
  REQUIRE(sub.size() == 3);
  CHECK(sub.ids[0] == ds.ids[5]);
  CHECK(sub.labels[1] == ds.labels[0]);
  CHECK(sub.images[2].data == ds.images[3].data);
  CHECK_THROWS_AS(dataset_subset(ds, {99}), Error);

  const auto batch = stack_images(ds.images, {1, 4});
  REQUIRE(batch.shape == std::vector<int>{2, 1, 6, 6});
  for (std::int64_t p = 0; p < 36; ++p) {
    CHECK(batch.data[static_cast<std::size_t>(p)] == ds.images[1][p]);
    CHECK(batch.data[static_cast<std::size_t>(36 + p)] == ds.images[4][p]);
  }
}

TEST_CASE("center crop takes the middle window") {
  Tensor<float> img({1, 4, 4});
  for (int i = 0; i < 16; ++i) img.data[static_cast<std::size_t>(i)] = static_cast<float>(i);
  const auto c = center_crop(img, {1, 2, 2});
  REQUIRE(c.shape == std::vector<int>{1, 2, 2});
  CHECK(c.at3(0, 0, 0) == 5.0f);
  CHECK(c.at3(0, 0, 1) == 6.0f);
  CHECK(c.at3(0, 1, 0) == 9.0f);
  CHECK(c.at3(0, 1, 1) == 10.0f);
  CHECK_THROWS_AS(center_crop(img, {1, 5, 5}), Error);
  CHECK_THROWS_AS(center_crop(img, {2, 2, 2}), Error);
}

TEST_CASE("public dataset draws without replacement and deterministically") {
  const auto src = synth_dataset(4, 10, {1, 6, 6}, 9);
  const auto pub = make_public_dataset(src, 15, 77);
  const auto pub2 = make_public_dataset(src, 15, 77);
  REQUIRE(pub.size() == 15);
  std::set<std::int64_t> ids(pub.ids.begin(), pub.ids.end());
  CHECK(ids.size() == 15);
  const std::set<std::int64_t> src_ids(src.ids.begin(), src.ids.end());
  for (auto id : pub.ids) CHECK(src_ids.count(id) == 1);
  CHECK(pub.ids == pub2.ids);
  for (std::size_t i = 0; i < pub.size(); ++i)
    CHECK(pub.images[i].data == pub2.images[i].data);

  const auto cropped = make_public_dataset(src, 5, 1, {1, 4, 4});
  CHECK(cropped.images[0].shape == std::vector<int>{1, 4, 4});
  CHECK_THROWS_AS(make_public_dataset(src, 100, 1), Error);
}

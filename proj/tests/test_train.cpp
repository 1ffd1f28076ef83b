#include "catch_amalgamated.hpp"
#include "fedshard/metrics.hpp"
#include "fedshard/partition.hpp"
#include "fedshard/train.hpp"

using namespace fedshard;

namespace {

NetworkSpec tiny_cnn(int classes = 4) {
  NetworkSpec spec;
  spec.input_shape = {1, 8, 8};
  spec.num_classes = classes;
  spec.layers = {
      LayerSpec::conv(1, 4, 3),  LayerSpec::relu(),
      LayerSpec::avgpool(2),     LayerSpec::flatten(),
      LayerSpec::dense(4 * 3 * 3, classes),
  };
  spec.validate();
  return spec;
}

double dataset_loss(const NetworkSpec& spec, const ParamSet<float>& p,
                    const LabeledDataset& ds) {
  std::vector<int> idx(ds.size());
  std::iota(idx.begin(), idx.end(), 0);
  const auto batch = stack_images(ds.images, idx);
  return cross_entropy_loss(spec, p, batch, ds.labels).loss;
}

}  // namespace

TEST_CASE("local training reduces the loss") {
  const auto spec = tiny_cnn();
  const auto ds = synth_dataset(4, 20, {1, 8, 8}, 21);
  const auto start = init_params<float>(spec, 5);
  TrainConfig cfg;
  cfg.learning_rate = 0.2;
  cfg.batch_size = 16;
  cfg.local_epochs = 12;
  cfg.seed = 77;
  const auto end = train_local(spec, start, ds, cfg);
  CHECK(dataset_loss(spec, end, ds) < dataset_loss(spec, start, ds) * 0.8);
  // the input set is untouched
  CHECK_FALSE(params_equal(start, end));
}

TEST_CASE("training is deterministic in the seed") {
  const auto spec = tiny_cnn();
  const auto ds = synth_dataset(4, 10, {1, 8, 8}, 22);
  const auto start = init_params<float>(spec, 6);
  TrainConfig cfg;
  cfg.local_epochs = 2;
  cfg.seed = 5;
  const auto a = train_local(spec, start, ds, cfg);
  const auto b = train_local(spec, start, ds, cfg);
  CHECK(params_equal(a, b));
  cfg.seed = 6;
  const auto c = train_local(spec, start, ds, cfg);
  CHECK_FALSE(params_equal(a, c));
}

TEST_CASE("zero epochs returns the start parameters unchanged") {
  const auto spec = tiny_cnn();
  const auto ds = synth_dataset(4, 5, {1, 8, 8}, 23);
  const auto start = init_params<float>(spec, 7);
  TrainConfig cfg;
  cfg.local_epochs = 0;
  CHECK(params_equal(train_local(spec, start, ds, cfg), start));
}

TEST_CASE("partial final batches are consumed") {
  const auto spec = tiny_cnn();
  // 23 samples with batch 10 -> batches of 10, 10, 3
  auto ds = synth_dataset(4, 6, {1, 8, 8}, 24);
  ds.images.pop_back();
  ds.labels.pop_back();
  ds.ids.pop_back();
  REQUIRE(ds.size() == 23);
  const auto start = init_params<float>(spec, 8);
  TrainConfig cfg;
  cfg.batch_size = 10;
  cfg.local_epochs = 1;
  const auto end = train_local(spec, start, ds, cfg);
  CHECK_FALSE(params_equal(start, end));
}

TEST_CASE("divergent training reports a clear error") {
  // a stacked linear net cannot die into zero gradients the way a relu net
  // can, so an absurd learning rate must overflow within a few steps
  NetworkSpec spec;
  spec.input_shape = {1, 8, 8};
  spec.num_classes = 4;
  spec.layers = {
      LayerSpec::flatten(),
      LayerSpec::dense(64, 8),
      LayerSpec::dense(8, 4),
  };
  spec.validate();
  const auto ds = synth_dataset(4, 10, {1, 8, 8}, 25);
  const auto start = init_params<float>(spec, 9);
  TrainConfig cfg;
  cfg.learning_rate = 1e9;  // guaranteed blow-up
  cfg.local_epochs = 3;
  try {
    train_local(spec, start, ds, cfg);
    // a blow-up can also surface as non-finite logits mid-epoch, which is
    // an acceptable failure mode too
  } catch (const Error& e) {
    const std::string msg = e.what();
    const bool informative = msg.find("learning rate") != std::string::npos ||
                             msg.find("non-finite") != std::string::npos;
    CHECK(informative);
    return;
  }
  FAIL("expected training to diverge");
}

// the synthetic task is actually learnable: a centrally trained small CNN
// separates held-out samples well above chance
TEST_CASE("synthetic task is learnable to high accuracy", "[slow]") {
  const int classes = 10;
  const auto train_ds = synth_dataset(classes, 50, {1, 16, 16}, 31);
  // held-out draws: same prototypes (same data seed), later noise samples
  const auto all = synth_dataset(classes, 60, {1, 16, 16}, 31);
  LabeledDataset test_ds;
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (all.ids[i] % 60 >= 50) {
      test_ds.images.push_back(all.images[i]);
      test_ds.labels.push_back(all.labels[i]);
      test_ds.ids.push_back(all.ids[i]);
    }
  }
  REQUIRE(test_ds.size() == 100);

  NetworkSpec spec;
  spec.input_shape = {1, 16, 16};
  spec.num_classes = classes;
  spec.layers = {
      LayerSpec::conv(1, 8, 3),  LayerSpec::relu(),
      LayerSpec::avgpool(2),     LayerSpec::conv(8, 16, 3),
      LayerSpec::relu(),         LayerSpec::avgpool(2),
      LayerSpec::flatten(),      LayerSpec::dense(16 * 2 * 2, 32),
      LayerSpec::relu(),         LayerSpec::dense(32, classes),
  };
  spec.validate();

  TrainConfig cfg;
  cfg.learning_rate = 0.2;
  cfg.batch_size = 32;
  cfg.local_epochs = 20;
  cfg.seed = 3;
  const auto w = train_local(spec, init_params<float>(spec, 1), train_ds, cfg);
  const double acc = clean_accuracy(spec, w, test_ds);
  INFO("held-out accuracy " << acc);
  CHECK(acc >= 0.90);
}

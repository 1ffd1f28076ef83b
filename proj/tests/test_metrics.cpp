#include "catch_amalgamated.hpp"
#include "fedshard/metrics.hpp"

using namespace fedshard;

namespace {

// network whose logits equal the flattened input (identity head), so metric
// behavior can be set up exactly via pixel values
struct FixedLogitNet {
  NetworkSpec spec;
  ParamSet<float> params;
  explicit FixedLogitNet(int classes) {
    spec.input_shape = {1, 1, classes};
    spec.num_classes = classes;
    spec.layers = {LayerSpec::flatten(), LayerSpec::dense(classes, classes)};
    params = zero_params<float>(spec);
    for (int i = 0; i < classes; ++i)
      params.find(1, ParamRole::weight)->at2(i, i) = 1.0f;
  }
  Tensor<float> image(const std::vector<float>& logits) const {
    Tensor<float> img({1, 1, static_cast<int>(logits.size())});
    img.data = logits;
    return img;
  }
};

}  // namespace

TEST_CASE("predict takes the argmax with ties to the lowest index") {
  FixedLogitNet net(4);
  std::vector<Tensor<float>> imgs = {
      net.image({0.1f, 0.9f, 0.3f, 0.0f}),
      net.image({0.5f, 0.5f, 0.5f, 0.5f}),  // full tie -> class 0
      net.image({0.1f, 0.7f, 0.7f, 0.2f}),  // tie 1 vs 2 -> class 1
      net.image({0.0f, 0.0f, 0.0f, 0.8f}),
  };
  const auto preds = predict(net.spec, net.params, imgs);
  CHECK(preds == std::vector<int>{1, 0, 1, 3});
}

TEST_CASE("predict batches do not change results") {
  FixedLogitNet net(3);
  std::vector<Tensor<float>> imgs;
  for (int i = 0; i < 10; ++i)
    imgs.push_back(net.image({static_cast<float>(i % 3), 1.0f, 0.0f}));
  const auto a = predict(net.spec, net.params, imgs, 128);
  const auto b = predict(net.spec, net.params, imgs, 3);
  CHECK(a == b);
}

TEST_CASE("clean accuracy counts exact matches") {
  FixedLogitNet net(3);
  LabeledDataset ds;
  ds.images = {net.image({1, 0, 0}), net.image({0, 1, 0}), net.image({0, 0, 1}),
               net.image({1, 0, 0})};
  ds.labels = {0, 1, 2, 1};  // last one predicted 0, labeled 1
  ds.ids = {0, 1, 2, 3};
  CHECK(clean_accuracy(net.spec, net.params, ds) == 0.75);
}

TEST_CASE("attack success rate excludes target-class samples") {
  FixedLogitNet net(3);
  const int target = 2;
  LabeledDataset triggered;
  // all predicted as class 2
  for (int i = 0; i < 4; ++i) triggered.images.push_back(net.image({0, 0, 5}));
  triggered.labels = {0, 1, 2, 0};  // one sample is already the target class
  triggered.ids = {0, 1, 2, 3};
  // 3 eligible, all hit
  CHECK(attack_success_rate(net.spec, net.params, triggered, target) == 1.0);

  // one eligible sample predicted elsewhere
  triggered.images[3] = net.image({9, 0, 5});
  CHECK(attack_success_rate(net.spec, net.params, triggered, target) ==
        Catch::Approx(2.0 / 3.0));

  // no eligible samples at all is an error
  LabeledDataset only_target;
  only_target.images = {net.image({0, 0, 1})};
  only_target.labels = {target};
  only_target.ids = {0};
  CHECK_THROWS_AS(attack_success_rate(net.spec, net.params, only_target, target), Error);
}

TEST_CASE("triggered overload pastes the patch before evaluating") {
  // identity net over a 1x2x2 image -> 4 "logits"; trigger paints pixel (1,1)
  FixedLogitNet net(4);
  net.spec.input_shape = {1, 2, 2};
  LabeledDataset test;
  test.images = {net.image({0.5f, 0, 0, 0}).reshaped({1, 2, 2})};
  test.labels = {0};
  test.ids = {0};
  TriggerSpec trig = make_white_trigger(1, 1, 1, 1, 3);  // paints logit 3 to 1.0
  CHECK(attack_success_rate(net.spec, net.params, test, trig) == 1.0);
}

TEST_CASE("clean accuracy drop is the plain difference") {
  CHECK(clean_accuracy_drop(0.9, 0.85) == Catch::Approx(0.05));
  CHECK(clean_accuracy_drop(0.5, 0.7) == Catch::Approx(-0.2));
  CHECK_THROWS_AS(clean_accuracy_drop(1.2, 0.5), Error);
}

TEST_CASE("max logit range spans min to max per sample") {
  FixedLogitNet net(3);
  std::vector<Tensor<float>> imgs = {net.image({-1, 0, 2}), net.image({0.5f, 0.5f, 0.5f})};
  CHECK(max_logit_range(net.spec, net.params, imgs) == Catch::Approx(3.0));
}

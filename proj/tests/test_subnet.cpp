#include "catch_amalgamated.hpp"
#include "fedshard/subnet.hpp"

using namespace fedshard;

namespace {

// host shaped like the production model, just smaller
NetworkSpec host_net() {
  NetworkSpec spec;
  spec.input_shape = {1, 12, 12};
  spec.num_classes = 5;
  spec.layers = {
      LayerSpec::conv(1, 6, 3),  LayerSpec::relu(),
      LayerSpec::avgpool(2),     LayerSpec::conv(6, 8, 3),
      LayerSpec::relu(),         LayerSpec::flatten(),
      LayerSpec::dense(8 * 3 * 3, 10), LayerSpec::relu(),
      LayerSpec::dense(10, 5),
  };
  spec.validate();
  return spec;
}

PublicDataset public_images(int n, std::uint64_t seed) {
  const auto src = synth_dataset(4, (n + 3) / 4, {1, 12, 12}, seed);
  return make_public_dataset(src, n, seed);
}

}  // namespace

TEST_CASE("default channel choice takes the highest indices") {
  const auto host = host_net();
  const auto sub = choose_subnet_channels(host, 1);
  REQUIRE(sub.host_channels.size() == 3);  // conv, conv, penultimate dense
  CHECK(sub.host_channels[0] == std::vector<int>{5});
  CHECK(sub.host_channels[1] == std::vector<int>{7});
  CHECK(sub.host_channels[2] == std::vector<int>{9});

  const auto wide = choose_subnet_channels(host, 2);
  CHECK(wide.host_channels[0] == std::vector<int>{4, 5});
  CHECK(wide.host_channels[1] == std::vector<int>{6, 7});
  CHECK(wide.host_channels[2] == std::vector<int>{9});  // scalar head stays width 1
}

TEST_CASE("random channel choice is seeded and in range") {
  const auto host = host_net();
  const auto a = choose_subnet_channels(host, 2, true, 5);
  const auto b = choose_subnet_channels(host, 2, true, 5);
  const auto c = choose_subnet_channels(host, 2, true, 6);
  CHECK(a.host_channels == b.host_channels);
  bool differs = a.host_channels != c.host_channels;
  CHECK(differs);
  CHECK(a.host_channels[0].size() == 2);
  CHECK(a.host_channels[2].size() == 1);
  for (int ch : a.host_channels[0]) {
    CHECK(ch >= 0);
    CHECK(ch < 6);
  }
}

TEST_CASE("subnet spec mirrors the host chain at reduced width") {
  const auto host = host_net();
  const auto sub = choose_subnet_channels(host, 1);
  const auto sspec = build_subnet_spec(host, sub);

  REQUIRE(sspec.layers.size() == 7);  // host chain up to the penultimate dense
  CHECK(sspec.input_shape == host.input_shape);
  CHECK(sspec.num_classes == 1);
  CHECK(sspec.layers[0].kind == LayerKind::conv2d);
  CHECK(sspec.layers[0].in_channels == 1);
  CHECK(sspec.layers[0].out_channels == 1);
  CHECK(sspec.layers[3].kind == LayerKind::conv2d);
  CHECK(sspec.layers[3].in_channels == 1);
  CHECK(sspec.layers[3].out_channels == 1);
  // host flat input 8*9 collapses to 1 channel * 9 spatial positions
  CHECK(sspec.layers[6].kind == LayerKind::dense);
  CHECK(sspec.layers[6].in_dim == 9);
  CHECK(sspec.layers[6].out_dim == 1);
  CHECK(sspec.output_shape() == std::vector<int>{1});

  // layer indices line up with the host
  for (std::size_t i = 0; i < sspec.layers.size(); ++i)
    CHECK(sspec.layers[i].kind == host.layers[i].kind);
}

TEST_CASE("subnet spec validation rejects bad channel lists") {
  const auto host = host_net();
  SubnetSpec sub;
  sub.width = 1;
  sub.host_channels = {{5}, {7}};  // one list short
  CHECK_THROWS_AS(validate_subnet_spec(host, sub), Error);
  sub.host_channels = {{9}, {7}, {9}};  // conv channel out of range
  CHECK_THROWS_AS(validate_subnet_spec(host, sub), Error);
  SubnetSpec dup;
  dup.width = 2;
  dup.host_channels = {{5, 5}, {6, 7}, {9}};
  CHECK_THROWS_AS(validate_subnet_spec(host, dup), Error);

  NetworkSpec shallow;
  shallow.input_shape = {4};
  shallow.num_classes = 2;
  shallow.layers = {LayerSpec::dense(4, 2)};
  CHECK_THROWS_AS(detail::mirrored_layers(shallow), Error);
}

TEST_CASE("backdoor subnet fires on the trigger and stays quiet on clean input", "[slow]") {
  const auto host = host_net();
  const auto sspec = build_subnet_spec(host, choose_subnet_channels(host, 1));
  const auto pub = public_images(60, 17);
  const auto trig = make_white_trigger(1, 3, 9, 9, 0);

  SubnetTrainConfig cfg;
  cfg.activation_target = 10.0;
  cfg.epochs = 200;
  cfg.batch_size = 16;
  cfg.learning_rate = 0.002;
  cfg.seed = 11;
  const auto res = train_backdoor_subnet(sspec, pub, trig, cfg);

  INFO("clean mean " << res.clean_activation_mean << " triggered mean "
                     << res.triggered_activation_mean);
  CHECK(res.triggered_activation_mean >= 0.8 * cfg.activation_target);
  CHECK(std::abs(res.clean_activation_mean) <= 0.1 * cfg.activation_target);
  CHECK(std::isfinite(res.final_loss));

  // deterministic in the seed
  const auto again = train_backdoor_subnet(sspec, pub, trig, cfg);
  CHECK(params_equal(res.params, again.params));
}

TEST_CASE("a heavier trigger weight lowers the triggered error term", "[slow]") {
  const auto host = host_net();
  const auto sspec = build_subnet_spec(host, choose_subnet_channels(host, 1));
  const auto pub = public_images(40, 23);
  const auto trig = make_white_trigger(1, 3, 9, 9, 0);

  // the rate must stay stable for the heaviest lambda (the triggered-term
  // step scale is lambda times the rate), so run slow and long
  SubnetTrainConfig base;
  base.epochs = 300;
  base.batch_size = 16;
  base.learning_rate = 0.0005;
  base.seed = 29;

  // triggered-term squared error over the full public set, as a function of
  // the loss weight lambda; more weight must not hurt the triggered fit
  auto trig_error = [&](double lambda) {
    SubnetTrainConfig cfg = base;
    cfg.trigger_weight = lambda;
    const auto res = train_backdoor_subnet(sspec, pub, trig, cfg);
    double err = 0;
    for (const auto& img : pub.images) {
      std::vector<int> one = {0};
      std::vector<Tensor<float>> imgs = {apply_trigger(img, trig)};
      const auto out = forward(sspec, res.params, stack_images(imgs, one));
      const double d = out.at2(0, 0) - cfg.activation_target;
      err += d * d;
    }
    return err / static_cast<double>(pub.images.size());
  };

  std::vector<double> errs;
  for (double lambda : {0.25, 0.5, 1.0, 2.0, 4.0}) errs.push_back(trig_error(lambda));
  for (std::size_t i = 1; i < errs.size(); ++i) {
    INFO("lambda step " << i << ": " << errs[i - 1] << " -> " << errs[i]);
    CHECK(errs[i] <= errs[i - 1] * 1.05 + 1e-6);  // monotone up to small jitter
  }
  CHECK(errs.back() < errs.front());
}

TEST_CASE("subnet training propagates divergence as an error") {
  const auto host = host_net();
  const auto sspec = build_subnet_spec(host, choose_subnet_channels(host, 1));
  const auto pub = public_images(20, 31);
  const auto trig = make_white_trigger(1, 3, 9, 9, 0);
  SubnetTrainConfig cfg;
  cfg.learning_rate = 1e8;
  cfg.epochs = 5;
  CHECK_THROWS_AS(train_backdoor_subnet(sspec, pub, trig, cfg), Error);
}

#include <cmath>

#include "catch_amalgamated.hpp"
#include "fedshard/params.hpp"

using namespace fedshard;

static NetworkSpec small_net() {
  NetworkSpec spec;
  spec.input_shape = {1, 6, 6};
  spec.num_classes = 3;
  spec.layers = {
      LayerSpec::conv(1, 2, 3), LayerSpec::relu(), LayerSpec::flatten(),
      LayerSpec::dense(2 * 4 * 4, 3),
  };
  return spec;
}

TEST_CASE("zero_params covers all parametric layers with right shapes") {
  const auto p = zero_params<float>(small_net());
  REQUIRE(p.entries.size() == 4);
  CHECK(p.entries[0].layer_index == 0);
  CHECK(p.entries[0].role == ParamRole::weight);
  CHECK(p.entries[0].tensor.shape == std::vector<int>{2, 1, 3, 3});
  CHECK(p.entries[1].tensor.shape == std::vector<int>{2});
  CHECK(p.entries[2].layer_index == 3);
  CHECK(p.entries[2].tensor.shape == std::vector<int>{3, 32});
  CHECK(p.entries[3].tensor.shape == std::vector<int>{3});
  CHECK(p.scalar_count() == 2 * 9 + 2 + 3 * 32 + 3);
  for (const auto& e : p.entries)
    for (float v : e.tensor.data) CHECK(v == 0.0f);
}

TEST_CASE("init_params is deterministic and bounded by fan-in") {
  const auto spec = small_net();
  const auto a = init_params<float>(spec, 99);
  const auto b = init_params<float>(spec, 99);
  const auto c = init_params<float>(spec, 100);
  CHECK(params_equal(a, b));
  CHECK_FALSE(params_equal(a, c));
  // conv fan_in = 1*3*3 = 9, dense fan_in = 32
  const double conv_bound = std::sqrt(1.0 / 9);
  const double dense_bound = std::sqrt(1.0 / 32);
  for (float v : a.entries[0].tensor.data) {
    CHECK(std::abs(v) <= conv_bound);
  }
  for (float v : a.entries[2].tensor.data) {
    CHECK(std::abs(v) <= dense_bound);
  }
}

TEST_CASE("add_scaled and sgd_step do the arithmetic") {
  const auto spec = small_net();
  auto w = zero_params<float>(spec);
  auto g = zero_params<float>(spec);
  w.entries[0].tensor.data[0] = 2.0f;
  g.entries[0].tensor.data[0] = 4.0f;
  g.entries[3].tensor.data[1] = -1.0f;

  const auto s = add_scaled(w, g, 0.5f);
  CHECK(s.entries[0].tensor.data[0] == 4.0f);
  CHECK(s.entries[3].tensor.data[1] == -0.5f);

  const auto stepped = sgd_step(w, g, 0.25f);
  CHECK(stepped.entries[0].tensor.data[0] == 1.0f);
  CHECK(stepped.entries[3].tensor.data[1] == 0.25f);
  CHECK_THROWS_AS(sgd_step(w, g, -0.1f), Error);
}

TEST_CASE("param_distance is an L2 norm of the difference") {
  const auto spec = small_net();
  auto a = zero_params<float>(spec);
  auto b = zero_params<float>(spec);
  CHECK(param_distance(a, b) == 0.0);
  a.entries[0].tensor.data[0] = 3.0f;
  b.entries[2].tensor.data[5] = 4.0f;
  CHECK(param_distance(a, b) == Catch::Approx(5.0).epsilon(1e-12));
  CHECK(param_distance(a, b) == param_distance(b, a));
}

TEST_CASE("congruence checks catch shape mismatches") {
  const auto spec = small_net();
  auto p = init_params<float>(spec, 1);
  CHECK_NOTHROW(check_congruent(spec, p));
  auto bad = p;
  bad.entries.pop_back();
  CHECK_THROWS_AS(check_congruent(spec, bad), Error);
  CHECK_THROWS_AS(check_congruent(p, bad, "test"), Error);
}

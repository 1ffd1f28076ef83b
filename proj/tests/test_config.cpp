#include "catch_amalgamated.hpp"
#include "fedshard/config.hpp"

using namespace fedshard;

TEST_CASE("defaults validate and survive a serialize/parse round trip") {
  ExperimentConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  const std::string text = serialize_config(cfg);
  const ExperimentConfig back = parse_config(text);
  CHECK(back == cfg);
  // canonical form is a fixed point
  CHECK(serialize_config(back) == text);
}

TEST_CASE("non-default values round trip exactly") {
  ExperimentConfig cfg;
  cfg.dataset.kind = "synth";
  cfg.dataset.classes = 7;
  cfg.dataset.shape = {3, 20, 24};
  cfg.dataset.noise = 0.05;
  cfg.dataset.seed = 999;
  cfg.model.conv_channels = {4, 8, 12};
  cfg.partition.scheme = "shards";
  cfg.partition.shards_per_client = 3;
  cfg.federation.clients = 7;
  cfg.federation.sample = 3;
  cfg.federation.eps = 0.125;
  cfg.federation.parallel = false;
  cfg.train.learning_rate = 0.001;
  cfg.public_data.kind = "noise";
  cfg.trigger.kind = "logo";
  cfg.trigger.position = "4,5";
  cfg.trigger.target = 6;
  cfg.attack.role = "server_dabs";
  cfg.attack.period = 4;
  cfg.attack.malicious_clients = {1, 5};
  cfg.attack.cad_reference = "0.875";
  cfg.subnet.channels = "5,11";
  cfg.subnet.logit_boost = "2.5";
  cfg.subnet.sever_outgoing = false;
  cfg.output.checkpoint = "final.ckpt";
  cfg.output.subnet_checkpoint = "subnet.ckpt";
  cfg.validate();

  const ExperimentConfig back = parse_config(serialize_config(cfg));
  CHECK(back == cfg);
}

TEST_CASE("parser accepts comments, blank lines and whitespace") {
  const std::string text =
      "# a comment\n"
      "\n"
      "[federation]\n"
      "  clients =  9  \n"
      "; another comment\n"
      "sample=4\n";
  const auto cfg = parse_config(text);
  CHECK(cfg.federation.clients == 9);
  CHECK(cfg.federation.sample == 4);
}

TEST_CASE("parser rejects malformed input with line numbers") {
  auto expect_error = [](const std::string& text, const std::string& fragment) {
    try {
      parse_config(text);
      FAIL("expected ConfigError for: " << text);
    } catch (const ConfigError& e) {
      INFO("message: " << e.what());
      CHECK(std::string(e.what()).find(fragment) != std::string::npos);
    }
  };

  expect_error("[nosuch]\nkey = 1\n", "unknown section");
  expect_error("[federation]\nwhat = 1\n", "unknown key");
  expect_error("[federation]\nclients = many\n", "expected integer");
  expect_error("[federation]\nclients = 5\nclients = 6\n", "duplicate key");
  expect_error("clients = 5\n", "outside any [section]");
  expect_error("[federation]\njust a line\n", "expected key = value");
  expect_error("[broken\nclients = 5\n", "malformed section header");
  expect_error("[federation]\n= 5\n", "empty key");
  // line numbers point at the offending line
  expect_error("[federation]\nclients = 5\nclients = 6\n", "line 3");
}

TEST_CASE("validation enforces cross-field constraints") {
  auto bad = [](void (*mutate)(ExperimentConfig&)) {
    ExperimentConfig cfg;
    mutate(cfg);
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
  };
  bad([](ExperimentConfig& c) { c.dataset.kind = "imagenet"; });
  bad([](ExperimentConfig& c) { c.dataset.test_per_class = c.dataset.per_class; });
  bad([](ExperimentConfig& c) { c.dataset.kind = "cifar10"; });  // missing paths
  bad([](ExperimentConfig& c) { c.federation.sample = c.federation.clients + 1; });
  bad([](ExperimentConfig& c) { c.trigger.target = c.dataset.classes; });
  bad([](ExperimentConfig& c) { c.trigger.position = "4"; });
  bad([](ExperimentConfig& c) { c.attack.role = "server_evil"; });
  bad([](ExperimentConfig& c) { c.attack.malicious_clients = {99}; });
  bad([](ExperimentConfig& c) { c.attack.cad_reference = "1.5"; });
  bad([](ExperimentConfig& c) { c.subnet.trigger_fraction = 0.0; });
  bad([](ExperimentConfig& c) { c.subnet.logit_boost = "huge"; });
  bad([](ExperimentConfig& c) { c.output.log = ""; });
  bad([](ExperimentConfig& c) { c.train.learning_rate = 0.0; });
  bad([](ExperimentConfig& c) { c.public_data.kind = "webcam"; });
}

TEST_CASE("sweep-style dotted assignment shares the parser dispatch") {
  ExperimentConfig cfg;
  set_config_value(cfg, "federation", "rounds", "33", "cli");
  CHECK(cfg.federation.rounds == 33);
  set_config_value(cfg, "subnet", "trigger_weight", "2.5", "cli");
  CHECK(cfg.subnet.trigger_weight == 2.5);
  CHECK_THROWS_AS(set_config_value(cfg, "subnet", "nope", "1", "cli"), ConfigError);
  CHECK_THROWS_AS(set_config_value(cfg, "nope", "x", "1", "cli"), ConfigError);
}

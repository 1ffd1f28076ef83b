#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "fedshard/checkpoint.hpp"
#include "fedshard/config.hpp"
#include "fedshard/federation.hpp"
#include "fedshard/partition.hpp"

namespace fedshard {

/// Builds the task network from the [model] section: small_cnn is a
// conv/relu/pool stack with one hidden dense layer, mlp is dense-only.
inline NetworkSpec make_model_spec(const ExperimentConfig& cfg) {
  const std::vector<int>& shape = cfg.dataset.shape;
  NetworkSpec s;
  s.input_shape = shape;
  s.num_classes = cfg.dataset.classes;
  if (cfg.model.preset == "small_cnn") {
    int c = shape[0], h = shape[1], w = shape[2];
    const int k = cfg.model.kernel;
    for (std::size_t i = 0; i < cfg.model.conv_channels.size(); ++i) {
      const int out = cfg.model.conv_channels[i];
      if (h < k || w < k) {
        throw ConfigError("[model] conv stack shrinks the input below the kernel size");
      }
      s.layers.push_back(LayerSpec::conv(c, out, k));
      s.layers.push_back(LayerSpec::relu());
      c = out;
      h -= k - 1;
      w -= k - 1;
      if (i + 1 < cfg.model.conv_channels.size()) {
        if (h < 2 || w < 2) {
          throw ConfigError("[model] conv stack shrinks the input below the pool size");
        }
        s.layers.push_back(LayerSpec::avgpool(2));
        h /= 2;
        w /= 2;
      }
    }
    s.layers.push_back(LayerSpec::flatten());
    s.layers.push_back(LayerSpec::dense(c * h * w, cfg.model.hidden));
    s.layers.push_back(LayerSpec::relu());
    s.layers.push_back(LayerSpec::dense(cfg.model.hidden, cfg.dataset.classes));
  } else {  // mlp
    const int in = shape[0] * shape[1] * shape[2];
    s.layers.push_back(LayerSpec::flatten());
    s.layers.push_back(LayerSpec::dense(in, cfg.model.hidden));
    s.layers.push_back(LayerSpec::relu());
    s.layers.push_back(LayerSpec::dense(cfg.model.hidden, cfg.model.hidden));
    s.layers.push_back(LayerSpec::relu());
    s.layers.push_back(LayerSpec::dense(cfg.model.hidden, cfg.dataset.classes));
  }
  s.validate();
  return s;
}

struct BuiltExperiment {
  NetworkSpec spec;
  ParamSet<float> init;
  std::vector<ClientShard> shards;
  EvalContext eval;
  FederationConfig fed;
  AttackPlan plan;
  std::optional<double> cad_reference;
  std::optional<SubnetTrainResult> subnet_report;
  NetworkSpec subnet_net;  // valid when subnet_report is set
};

namespace detail {

inline std::pair<LabeledDataset, LabeledDataset> split_synth(const LabeledDataset& full,
                                                             int classes, int per_class,
                                                             int test_per_class) {
  std::vector<int> train_idx, test_idx;
  for (int c = 0; c < classes; ++c) {
    for (int i = 0; i < per_class; ++i) {
      const int at = c * per_class + i;
      if (i < per_class - test_per_class) train_idx.push_back(at);
      else test_idx.push_back(at);
    }
  }
  return {dataset_subset(full, train_idx), dataset_subset(full, test_idx)};
}

constexpr std::int64_t kPublicIdOffset = 1'000'000'000;

}  // namespace detail

// Loads (or generates) the train/test datasets named by [dataset].
inline std::pair<LabeledDataset, LabeledDataset> load_task_data(const ExperimentConfig& cfg) {
  LabeledDataset train, test;
  if (cfg.dataset.kind == "synth") {
    const std::uint64_t data_seed =
        cfg.dataset.seed ? *cfg.dataset.seed : derive_seed(cfg.federation.seed, "data");
    const LabeledDataset full =
        synth_dataset(cfg.dataset.classes, cfg.dataset.per_class, cfg.dataset.shape,
                      data_seed, static_cast<float>(cfg.dataset.noise));
    auto [tr, te] = detail::split_synth(full, cfg.dataset.classes, cfg.dataset.per_class,
                                        cfg.dataset.test_per_class);
    train = std::move(tr);
    test = std::move(te);
  } else if (cfg.dataset.kind == "cifar10") {
    train = load_cifar10(cfg.dataset.train_path);
    test = load_cifar10(cfg.dataset.test_path);
  } else {
    train = load_tensor_dir(cfg.dataset.train_path);
    test = load_tensor_dir(cfg.dataset.test_path);
  }
  for (int l : train.labels) {
    require(l < cfg.dataset.classes, "dataset: label " + std::to_string(l) +
                                         " outside [dataset] classes");
  }
  for (const LabeledDataset* ds : {&train, &test}) {
    require(!ds->empty() && ds->images[0].shape == cfg.dataset.shape,
            "dataset: images do not match [dataset] shape");
  }
  return {std::move(train), std::move(test)};
}

inline TriggerSpec resolve_trigger(const ExperimentConfig& cfg) {
  const int c = cfg.dataset.shape[0], h = cfg.dataset.shape[1], w = cfg.dataset.shape[2];
  int row, col;
  if (cfg.trigger.position == "auto") {
    row = h - cfg.trigger.size;
    col = w - cfg.trigger.size;
    require(row >= 0 && col >= 0, "[trigger] size exceeds the image");
  } else {
    const auto pos = confdetail::to_int_list(cfg.trigger.position, ',', "[trigger] position");
    row = pos[0];
    col = pos[1];
  }
  return cfg.trigger.kind == "white"
             ? make_white_trigger(c, cfg.trigger.size, row, col, cfg.trigger.target)
             : make_logo_trigger(c, cfg.trigger.size, row, col, cfg.trigger.target);
}

// Server-side unlabeled images; generated from a stream separate from the
// client data so the attacker never touches training samples.
inline PublicDataset make_server_public_data(const ExperimentConfig& cfg) {
  const std::uint64_t root = cfg.federation.seed;
  PublicDataset pub;
  if (cfg.public_data.kind == "synth") {
    const int pc = (cfg.public_data.size + cfg.dataset.classes - 1) / cfg.dataset.classes;
    LabeledDataset source =
        synth_dataset(cfg.dataset.classes, std::max(2, pc), cfg.dataset.shape,
                      derive_seed(root, "public"), static_cast<float>(cfg.dataset.noise));
    for (auto& id : source.ids) id += detail::kPublicIdOffset;
    pub = make_public_dataset(source, cfg.public_data.size, derive_seed(root, "public"));
  } else {  // noise
    Rng rng(derive_seed(root, "public"));
    for (int i = 0; i < cfg.public_data.size; ++i) {
      Tensor<float> img(cfg.dataset.shape);
      for (auto& v : img.data) v = static_cast<float>(rng.real01());
      pub.images.push_back(std::move(img));
      pub.ids.push_back(detail::kPublicIdOffset + i);
    }
  }
  return pub;
}

inline SubnetSpec resolve_subnet_spec(const ExperimentConfig& cfg, const NetworkSpec& spec) {
  if (cfg.subnet.channels == "highest") {
    return choose_subnet_channels(spec, cfg.subnet.width, false);
  }
  if (cfg.subnet.channels == "random") {
    return choose_subnet_channels(spec, cfg.subnet.width, true,
                                  derive_seed(cfg.federation.seed, "channels"));
  }
  require(cfg.subnet.width == 1,
          "[subnet] channels: explicit lists are only supported for width = 1");
  const auto idx = confdetail::to_int_list(cfg.subnet.channels, ',', "[subnet] channels");
  SubnetSpec sub;
  sub.width = 1;
  for (int i : idx) sub.host_channels.push_back({i});
  validate_subnet_spec(spec, sub);
  return sub;
}

inline SubnetTrainConfig resolve_subnet_train(const ExperimentConfig& cfg) {
  SubnetTrainConfig t;
  t.activation_target = cfg.subnet.activation_target;
  t.trigger_weight = cfg.subnet.trigger_weight;
  t.trigger_fraction = cfg.subnet.trigger_fraction;
  t.epochs = cfg.subnet.epochs;
  t.batch_size = cfg.subnet.batch_size;
  t.learning_rate = cfg.subnet.learning_rate;
  t.seed = derive_seed(cfg.federation.seed, "subnet");
  return t;
}

inline BuiltExperiment build_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const std::uint64_t root = cfg.federation.seed;

  BuiltExperiment exp;
  exp.spec = make_model_spec(cfg);
  exp.init = init_params<float>(exp.spec, derive_seed(root, "init"));

  auto [train, test] = load_task_data(cfg);

  if (cfg.partition.scheme == "iid") {
    exp.shards = partition_iid(train, cfg.federation.clients, derive_seed(root, "partition"));
  } else {
    exp.shards = partition_shards(train, cfg.federation.clients,
                                  cfg.partition.shards_per_client,
                                  derive_seed(root, "partition"));
  }

  const TriggerSpec trig = resolve_trigger(cfg);
  exp.eval = make_eval_context(std::move(test), trig);

  // federation settings
  exp.fed.clients = cfg.federation.clients;
  exp.fed.sample_size = cfg.federation.sample;
  exp.fed.rounds = cfg.federation.rounds;
  exp.fed.convergence_eps = cfg.federation.eps;
  exp.fed.seed = root;
  exp.fed.parallel = cfg.federation.parallel;
  exp.fed.local.learning_rate = cfg.train.learning_rate;
  exp.fed.local.batch_size = cfg.train.batch_size;
  exp.fed.local.local_epochs = cfg.train.local_epochs;

  // attack plan
  exp.plan.role = attack_role_from_string(cfg.attack.role);
  exp.plan.trigger = trig;
  exp.plan.period = cfg.attack.period;
  exp.plan.malicious_clients = cfg.attack.malicious_clients;
  exp.plan.poison_fraction = cfg.attack.poison_fraction;
  exp.plan.retrain_each_attack = cfg.attack.retrain_each_attack;
  exp.plan.logit_margin = cfg.subnet.margin;
  exp.plan.sever_incoming = cfg.subnet.sever_incoming;
  exp.plan.sever_outgoing = cfg.subnet.sever_outgoing;
  if (cfg.subnet.logit_boost != "auto") {
    exp.plan.fixed_logit_boost =
        confdetail::to_double(cfg.subnet.logit_boost, "[subnet] logit_boost");
  }
  if (cfg.attack.cad_reference != "latched") {
    exp.cad_reference =
        confdetail::to_double(cfg.attack.cad_reference, "[attack] cad_reference");
  }

  const bool needs_subnet = exp.plan.role == AttackRole::server_dabs ||
                            exp.plan.role == AttackRole::server_one_shot ||
                            exp.plan.role == AttackRole::client_sra;
  if (needs_subnet) {
    exp.plan.public_data = make_server_public_data(cfg);
    exp.plan.subnet = resolve_subnet_spec(cfg, exp.spec);
    exp.subnet_net = build_subnet_spec(exp.spec, exp.plan.subnet);
    exp.plan.subnet_net = exp.subnet_net;
    exp.plan.subnet_train = resolve_subnet_train(cfg);

    SubnetTrainResult sr = train_backdoor_subnet(exp.subnet_net, exp.plan.public_data,
                                                 exp.plan.trigger, exp.plan.subnet_train);
    exp.plan.subnet_params = sr.params;
    exp.subnet_report = std::move(sr);
  }
  return exp;
}

struct RunOutputs {
  RunResult run;
  std::optional<SubnetTrainResult> subnet_report;
  double seconds = 0;
};

namespace detail {

inline std::string opt_int_json(const std::optional<int>& v) {
  return v ? std::to_string(*v) : "null";
}

inline std::string opt_double_json(const std::optional<double>& v) {
  return v ? format_double(*v) : "null";
}

}  // namespace detail

// Canonical summary block: final metrics, convergence round, attack rounds.
inline std::string summary_json(const RunResult& run) {
  std::string s = "{";
  if (run.logs.empty()) {
    s += "\"rounds\":0,\"clean_accuracy\":null,\"asr\":null,\"cad\":null";
  } else {
    const RoundLog& last = run.logs.back();
    s += "\"rounds\":" + std::to_string(run.logs.size());
    s += ",\"clean_accuracy\":" + detail::format_double(last.clean_accuracy);
    s += ",\"asr\":" + detail::format_double(last.asr);
    s += ",\"cad\":" + detail::format_double(last.cad);
  }
  s += ",\"converged_at\":" + detail::opt_int_json(run.converged_at);
  s += ",\"benign_accuracy\":" + detail::opt_double_json(run.benign_ref);
  s += ",\"logit_boost\":" + detail::opt_double_json(run.logit_boost);
  s += ",\"attack_rounds\":[";
  bool first = true;
  for (const RoundLog& log : run.logs) {
    if (log.attack_event == AttackEvent::none) continue;
    if (!first) s += ",";
    s += std::to_string(log.round);
    first = false;
  }
  s += "]}";
  return s;
}

// Aligned two-column table of the final metrics, for terminal output.
inline std::string summary_table(const RunResult& run) {
  std::vector<std::pair<std::string, std::string>> rows;
  rows.emplace_back("rounds", std::to_string(run.logs.size()));
  if (!run.logs.empty()) {
    const RoundLog& last = run.logs.back();
    rows.emplace_back("clean_accuracy", detail::format_double(last.clean_accuracy));
    rows.emplace_back("asr", detail::format_double(last.asr));
    rows.emplace_back("cad", detail::format_double(last.cad));
  }
  rows.emplace_back("converged_at",
                    run.converged_at ? std::to_string(*run.converged_at) : "-");
  if (run.benign_ref) {
    rows.emplace_back("benign_accuracy", detail::format_double(*run.benign_ref));
  }
  if (run.logit_boost) {
    rows.emplace_back("logit_boost", detail::format_double(*run.logit_boost));
  }
  int attacks = 0;
  for (const RoundLog& log : run.logs) attacks += log.attack_event != AttackEvent::none;
  rows.emplace_back("attack_rounds", std::to_string(attacks));

  std::size_t width = 0;
  for (const auto& [k, v] : rows) width = std::max(width, k.size());
  std::string out;
  for (const auto& [k, v] : rows) {
    out += "  " + k + std::string(width - k.size() + 2, ' ') + v + "\n";
  }
  return out;
}

// Runs the experiment described by the config, writing the round log,
// summary, and checkpoints configured in [output] under out_dir.
inline RunOutputs run_experiment(const ExperimentConfig& cfg, const std::string& out_dir,
                                 std::ostream* progress = nullptr) {
  namespace fs = std::filesystem;
  const auto t0 = std::chrono::steady_clock::now();
  BuiltExperiment exp = build_experiment(cfg);

  fs::create_directories(out_dir);
  std::ofstream log_out(fs::path(out_dir) / cfg.output.log);
  require(static_cast<bool>(log_out), "cannot write " + cfg.output.log);

  auto on_round = [&](const RoundLog& log) {
    log_out << round_log_json(log) << "\n";
    if (progress) {
      *progress << "round " << log.round << "  acc " << std::fixed << std::setprecision(4)
                << log.clean_accuracy << "  asr " << log.asr << "  cad " << log.cad
                << (log.attack_event != AttackEvent::none
                        ? "  [" + to_string(log.attack_event) + "]"
                        : "")
                << "\n";
      progress->flush();
    }
  };

  RunOutputs out;
  out.run = run_training(exp.spec, exp.init, exp.shards, exp.fed, exp.plan, exp.eval,
                         exp.cad_reference, on_round);
  out.subnet_report = exp.subnet_report;
  log_out.close();

  if (!cfg.output.summary.empty()) {
    std::ofstream s(fs::path(out_dir) / cfg.output.summary);
    require(static_cast<bool>(s), "cannot write " + cfg.output.summary);
    s << summary_json(out.run) << "\n";
  }
  if (!cfg.output.checkpoint.empty()) {
    save_checkpoint((fs::path(out_dir) / cfg.output.checkpoint).string(), exp.spec,
                    out.run.final_params);
  }
  if (!cfg.output.benign_checkpoint.empty() && out.run.benign_model) {
    save_checkpoint((fs::path(out_dir) / cfg.output.benign_checkpoint).string(), exp.spec,
                    *out.run.benign_model);
  }
  if (!cfg.output.subnet_checkpoint.empty() && exp.subnet_report) {
    save_checkpoint((fs::path(out_dir) / cfg.output.subnet_checkpoint).string(),
                    exp.subnet_net, exp.subnet_report->params);
  }

  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

struct SweepArm {
  std::string value;
  RunResult run;
};

// Reruns the experiment once per value of `section.key`, each arm under its
// own subdirectory with a seed derived from the base seed and arm index
// (unless the swept field is the seed itself).
inline std::vector<SweepArm> run_sweep(const ExperimentConfig& base,
                                       const std::string& field,
                                       const std::vector<std::string>& values,
                                       const std::string& out_dir,
                                       std::ostream* progress = nullptr) {
  const std::size_t dot = field.find('.');
  if (dot == std::string::npos || dot == 0 || dot + 1 == field.size()) {
    throw ConfigError("sweep field must be section.key, got '" + field + "'");
  }
  const std::string section = field.substr(0, dot);
  const std::string key = field.substr(dot + 1);
  require(!values.empty(), "sweep: no values");

  std::vector<SweepArm> arms;
  for (std::size_t i = 0; i < values.size(); ++i) {
    ExperimentConfig cfg = base;
    set_config_value(cfg, section, key, values[i], "sweep");
    if (field != "federation.seed") {
      cfg.federation.seed = derive_seed(base.federation.seed, "sweep", i);
    }
    cfg.validate();
    if (progress) *progress << "sweep " << field << " = " << values[i] << "\n";
    RunOutputs arm_out = run_experiment(
        cfg, (std::filesystem::path(out_dir) / ("arm_" + std::to_string(i))).string(),
        progress);
    arms.push_back({values[i], std::move(arm_out.run)});
  }
  return arms;
}

// Aligned table over sweep arms: value, final metrics, convergence round.
inline std::string sweep_table(const std::string& field, const std::vector<SweepArm>& arms) {
  std::vector<std::vector<std::string>> rows;
  rows.push_back({field, "clean_accuracy", "asr", "cad", "converged_at"});
  for (const SweepArm& arm : arms) {
    std::vector<std::string> row = {arm.value};
    if (arm.run.logs.empty()) {
      row.insert(row.end(), {"-", "-", "-"});
    } else {
      const RoundLog& last = arm.run.logs.back();
      row.push_back(detail::format_double(last.clean_accuracy));
      row.push_back(detail::format_double(last.asr));
      row.push_back(detail::format_double(last.cad));
    }
    row.push_back(arm.run.converged_at ? std::to_string(*arm.run.converged_at) : "-");
    rows.push_back(std::move(row));
  }
  std::vector<std::size_t> widths(rows[0].size(), 0);
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) widths[c] = std::max(widths[c], row[c].size());
  }
  std::string out;
  for (const auto& row : rows) {
    out += " ";
    for (std::size_t c = 0; c < row.size(); ++c) {
      out += " " + row[c] + std::string(widths[c] - row[c].size(), ' ');
    }
    out += "\n";
  }
  return out;
}

inline std::string sweep_json(const std::string& field, const std::vector<SweepArm>& arms) {
  std::string s = "{\"field\":\"" + field + "\",\"arms\":[";
  for (std::size_t i = 0; i < arms.size(); ++i) {
    if (i) s += ",";
    s += "{\"value\":\"" + arms[i].value + "\",\"summary\":" + summary_json(arms[i].run) + "}";
  }
  s += "]}";
  return s;
}

}  // namespace fedshard

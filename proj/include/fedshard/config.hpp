#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "fedshard/error.hpp"

namespace fedshard {

struct DatasetConfig {
  std::string kind = "synth";  // synth | cifar10 | tensor_dir
  int classes = 10;
  int per_class = 240;       // synth: train+test samples generated per class
  int test_per_class = 40;   // synth: held out per class
  std::vector<int> shape = {1, 16, 16};
  double noise = 0.15;       // synth: pixel noise sigma
  std::string train_path;    // cifar10 / tensor_dir sources
  std::string test_path;
  std::optional<std::uint64_t> seed;  // synth: defaults to a value derived from the run seed

  bool operator==(const DatasetConfig&) const = default;
};

struct ModelConfig {
  std::string preset = "small_cnn";  // small_cnn | mlp
  std::vector<int> conv_channels = {8, 16};
  int hidden = 32;
  int kernel = 3;

  bool operator==(const ModelConfig&) const = default;
};

struct PartitionConfig {
  std::string scheme = "iid";  // iid | shards
  int shards_per_client = 2;

  bool operator==(const PartitionConfig&) const = default;
};

struct FederationSection {
  int clients = 20;
  int sample = 5;
  int rounds = 80;
  double eps = 0.05;
  std::uint64_t seed = 1;  // root seed of the whole run
  bool parallel = true;

  bool operator==(const FederationSection&) const = default;
};

struct TrainSection {
  double learning_rate = 0.01;
  int batch_size = 32;
  int local_epochs = 5;

  bool operator==(const TrainSection&) const = default;
};

struct PublicSection {
  std::string kind = "synth";  // synth (held-out generator) | noise (uniform pixels)
  int size = 500;

  bool operator==(const PublicSection&) const = default;
};

struct TriggerSection {
  std::string kind = "white";  // white | logo
  int size = 3;
  std::string position = "auto";  // auto (bottom-right) | "row,col"
  int target = 0;

  bool operator==(const TriggerSection&) const = default;
};

struct AttackSection {
  std::string role = "none";
  int period = 10;
  std::vector<int> malicious_clients = {0};
  double poison_fraction = 0.5;
  bool retrain_each_attack = false;
  std::string cad_reference = "latched";  // latched | explicit accuracy in [0,1]

  bool operator==(const AttackSection&) const = default;
};

struct SubnetSection {
  int width = 1;
  std::string channels = "highest";  // highest | random | explicit list "7,15,31"
  double activation_target = 10;
  double trigger_weight = 1;
  double trigger_fraction = 0.5;
  int epochs = 200;
  int batch_size = 32;
  double learning_rate = 0.002;
  double margin = 10;
  std::string logit_boost = "auto";  // auto (calibrated) | explicit number
  bool sever_incoming = true;
  bool sever_outgoing = true;

  bool operator==(const SubnetSection&) const = default;
};

struct OutputSection {
  std::string log = "rounds.jsonl";
  std::string checkpoint;
  std::string summary;
  std::string benign_checkpoint;
  std::string subnet_checkpoint;

  bool operator==(const OutputSection&) const = default;
};

struct ExperimentConfig {
  DatasetConfig dataset;
  ModelConfig model;
  PartitionConfig partition;
  FederationSection federation;
  TrainSection train;
  PublicSection public_data;
  TriggerSection trigger;
  AttackSection attack;
  SubnetSection subnet;
  OutputSection output;

  bool operator==(const ExperimentConfig&) const = default;

  void validate() const;
};

namespace confdetail {

inline int to_int(const std::string& v, const std::string& where) {
  int out{};
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc{} || res.ptr != v.data() + v.size()) {
    throw ConfigError(where + ": expected integer, got '" + v + "'");
  }
  return out;
}

inline std::uint64_t to_u64(const std::string& v, const std::string& where) {
  std::uint64_t out{};
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc{} || res.ptr != v.data() + v.size()) {
    throw ConfigError(where + ": expected unsigned integer, got '" + v + "'");
  }
  return out;
}

inline double to_double(const std::string& v, const std::string& where) {
  double out{};
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc{} || res.ptr != v.data() + v.size()) {
    throw ConfigError(where + ": expected number, got '" + v + "'");
  }
  return out;
}

inline bool to_bool(const std::string& v, const std::string& where) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw ConfigError(where + ": expected true or false, got '" + v + "'");
}

inline std::vector<int> to_int_list(const std::string& v, char sep,
                                    const std::string& where) {
  std::vector<int> out;
  std::string item;
  std::istringstream in(v);
  while (std::getline(in, item, sep)) out.push_back(to_int(item, where));
  if (out.empty()) throw ConfigError(where + ": expected a list, got '" + v + "'");
  return out;
}

inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::string format_int_list(const std::vector<int>& v, char sep) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += sep;
    s += std::to_string(v[i]);
  }
  return s;
}

inline std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && (s[a] == ' ' || s[a] == '\t' || s[a] == '\r')) ++a;
  while (b > a && (s[b - 1] == ' ' || s[b - 1] == '\t' || s[b - 1] == '\r')) --b;
  return s.substr(a, b - a);
}

}  // namespace confdetail

// Applies one key=value to the config; `where` names the location for errors.
// Shared by the INI parser and the sweep CLI (section.key paths).
inline void set_config_value(ExperimentConfig& cfg, const std::string& section,
                             const std::string& key, const std::string& value,
                             const std::string& where) {
  using namespace confdetail;
  const std::string what = where + " [" + section + "] " + key;
  if (section == "dataset") {
    if (key == "kind") cfg.dataset.kind = value;
    else if (key == "classes") cfg.dataset.classes = to_int(value, what);
    else if (key == "per_class") cfg.dataset.per_class = to_int(value, what);
    else if (key == "test_per_class") cfg.dataset.test_per_class = to_int(value, what);
    else if (key == "shape") cfg.dataset.shape = to_int_list(value, 'x', what);
    else if (key == "noise") cfg.dataset.noise = to_double(value, what);
    else if (key == "train_path") cfg.dataset.train_path = value;
    else if (key == "test_path") cfg.dataset.test_path = value;
    else if (key == "seed") cfg.dataset.seed = to_u64(value, what);
    else throw ConfigError(what + ": unknown key");
  } else if (section == "model") {
    if (key == "preset") cfg.model.preset = value;
    else if (key == "conv_channels") cfg.model.conv_channels = to_int_list(value, ',', what);
    else if (key == "hidden") cfg.model.hidden = to_int(value, what);
    else if (key == "kernel") cfg.model.kernel = to_int(value, what);
    else throw ConfigError(what + ": unknown key");
  } else if (section == "partition") {
    if (key == "scheme") cfg.partition.scheme = value;
    else if (key == "shards_per_client") cfg.partition.shards_per_client = to_int(value, what);
    else throw ConfigError(what + ": unknown key");
  } else if (section == "federation") {
    if (key == "clients") cfg.federation.clients = to_int(value, what);
    else if (key == "sample") cfg.federation.sample = to_int(value, what);
    else if (key == "rounds") cfg.federation.rounds = to_int(value, what);
    else if (key == "eps") cfg.federation.eps = to_double(value, what);
    else if (key == "seed") cfg.federation.seed = to_u64(value, what);
    else if (key == "parallel") cfg.federation.parallel = to_bool(value, what);
    else throw ConfigError(what + ": unknown key");
  } else if (section == "train") {
    if (key == "learning_rate") cfg.train.learning_rate = to_double(value, what);
    else if (key == "batch_size") cfg.train.batch_size = to_int(value, what);
    else if (key == "local_epochs") cfg.train.local_epochs = to_int(value, what);
    else throw ConfigError(what + ": unknown key");
  } else if (section == "public") {
    if (key == "kind") cfg.public_data.kind = value;
    else if (key == "size") cfg.public_data.size = to_int(value, what);
    else throw ConfigError(what + ": unknown key");
  } else if (section == "trigger") {
    if (key == "kind") cfg.trigger.kind = value;
    else if (key == "size") cfg.trigger.size = to_int(value, what);
    else if (key == "position") cfg.trigger.position = value;
    else if (key == "target") cfg.trigger.target = to_int(value, what);
    else throw ConfigError(what + ": unknown key");
  } else if (section == "attack") {
    if (key == "role") cfg.attack.role = value;
    else if (key == "period") cfg.attack.period = to_int(value, what);
    else if (key == "malicious_clients")
      cfg.attack.malicious_clients = to_int_list(value, ',', what);
    else if (key == "poison_fraction") cfg.attack.poison_fraction = to_double(value, what);
    else if (key == "retrain_each_attack")
      cfg.attack.retrain_each_attack = to_bool(value, what);
    else if (key == "cad_reference") cfg.attack.cad_reference = value;
    else throw ConfigError(what + ": unknown key");
  } else if (section == "subnet") {
    if (key == "width") cfg.subnet.width = to_int(value, what);
    else if (key == "channels") cfg.subnet.channels = value;
    else if (key == "activation_target") cfg.subnet.activation_target = to_double(value, what);
    else if (key == "trigger_weight") cfg.subnet.trigger_weight = to_double(value, what);
    else if (key == "trigger_fraction") cfg.subnet.trigger_fraction = to_double(value, what);
    else if (key == "epochs") cfg.subnet.epochs = to_int(value, what);
    else if (key == "batch_size") cfg.subnet.batch_size = to_int(value, what);
    else if (key == "learning_rate") cfg.subnet.learning_rate = to_double(value, what);
    else if (key == "margin") cfg.subnet.margin = to_double(value, what);
    else if (key == "logit_boost") cfg.subnet.logit_boost = value;
    else if (key == "sever_incoming") cfg.subnet.sever_incoming = to_bool(value, what);
    else if (key == "sever_outgoing") cfg.subnet.sever_outgoing = to_bool(value, what);
    else throw ConfigError(what + ": unknown key");
  } else if (section == "output") {
    if (key == "log") cfg.output.log = value;
    else if (key == "checkpoint") cfg.output.checkpoint = value;
    else if (key == "summary") cfg.output.summary = value;
    else if (key == "benign_checkpoint") cfg.output.benign_checkpoint = value;
    else if (key == "subnet_checkpoint") cfg.output.subnet_checkpoint = value;
    else throw ConfigError(what + ": unknown key");
  } else {
    throw ConfigError(where + ": unknown section [" + section + "]");
  }
}

// Strict INI parse: [section] headers, key = value lines, full-line comments
// (# or ;). Unknown sections/keys, bad values, and duplicate keys are errors.
inline ExperimentConfig parse_config(const std::string& text) {
  using namespace confdetail;
  ExperimentConfig cfg;
  std::string section;
  std::vector<std::string> seen;
  std::istringstream in(text);
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    const std::string line = trim(raw);
    const std::string where = "line " + std::to_string(lineno);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3) {
        throw ConfigError(where + ": malformed section header '" + line + "'");
      }
      section = line.substr(1, line.size() - 2);
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(where + ": expected key = value, got '" + line + "'");
    }
    if (section.empty()) {
      throw ConfigError(where + ": key outside any [section]");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(where + ": empty key");
    const std::string dotted = section + "." + key;
    for (const auto& s : seen) {
      if (s == dotted) throw ConfigError(where + ": duplicate key " + dotted);
    }
    seen.push_back(dotted);
    set_config_value(cfg, section, key, value, where);
  }
  cfg.validate();
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return parse_config(text);
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

// Canonical form: fixed section and key order, shortest round-trip numbers.
// parse_config(serialize_config(c)) reproduces c exactly.
inline std::string serialize_config(const ExperimentConfig& cfg) {
  using namespace confdetail;
  std::string s;
  s += "[dataset]\n";
  s += "kind = " + cfg.dataset.kind + "\n";
  s += "classes = " + std::to_string(cfg.dataset.classes) + "\n";
  s += "per_class = " + std::to_string(cfg.dataset.per_class) + "\n";
  s += "test_per_class = " + std::to_string(cfg.dataset.test_per_class) + "\n";
  s += "shape = " + format_int_list(cfg.dataset.shape, 'x') + "\n";
  s += "noise = " + format_double(cfg.dataset.noise) + "\n";
  if (!cfg.dataset.train_path.empty()) s += "train_path = " + cfg.dataset.train_path + "\n";
  if (!cfg.dataset.test_path.empty()) s += "test_path = " + cfg.dataset.test_path + "\n";
  if (cfg.dataset.seed) s += "seed = " + std::to_string(*cfg.dataset.seed) + "\n";
  s += "\n[model]\n";
  s += "preset = " + cfg.model.preset + "\n";
  s += "conv_channels = " + format_int_list(cfg.model.conv_channels, ',') + "\n";
  s += "hidden = " + std::to_string(cfg.model.hidden) + "\n";
  s += "kernel = " + std::to_string(cfg.model.kernel) + "\n";
  s += "\n[partition]\n";
  s += "scheme = " + cfg.partition.scheme + "\n";
  s += "shards_per_client = " + std::to_string(cfg.partition.shards_per_client) + "\n";
  s += "\n[federation]\n";
  s += "clients = " + std::to_string(cfg.federation.clients) + "\n";
  s += "sample = " + std::to_string(cfg.federation.sample) + "\n";
  s += "rounds = " + std::to_string(cfg.federation.rounds) + "\n";
  s += "eps = " + format_double(cfg.federation.eps) + "\n";
  s += "seed = " + std::to_string(cfg.federation.seed) + "\n";
  s += std::string("parallel = ") + (cfg.federation.parallel ? "true" : "false") + "\n";
  s += "\n[train]\n";
  s += "learning_rate = " + format_double(cfg.train.learning_rate) + "\n";
  s += "batch_size = " + std::to_string(cfg.train.batch_size) + "\n";
  s += "local_epochs = " + std::to_string(cfg.train.local_epochs) + "\n";
  s += "\n[public]\n";
  s += "kind = " + cfg.public_data.kind + "\n";
  s += "size = " + std::to_string(cfg.public_data.size) + "\n";
  s += "\n[trigger]\n";
  s += "kind = " + cfg.trigger.kind + "\n";
  s += "size = " + std::to_string(cfg.trigger.size) + "\n";
  s += "position = " + cfg.trigger.position + "\n";
  s += "target = " + std::to_string(cfg.trigger.target) + "\n";
  s += "\n[attack]\n";
  s += "role = " + cfg.attack.role + "\n";
  s += "period = " + std::to_string(cfg.attack.period) + "\n";
  s += "malicious_clients = " + format_int_list(cfg.attack.malicious_clients, ',') + "\n";
  s += "poison_fraction = " + format_double(cfg.attack.poison_fraction) + "\n";
  s += std::string("retrain_each_attack = ") +
       (cfg.attack.retrain_each_attack ? "true" : "false") + "\n";
  s += "cad_reference = " + cfg.attack.cad_reference + "\n";
  s += "\n[subnet]\n";
  s += "width = " + std::to_string(cfg.subnet.width) + "\n";
  s += "channels = " + cfg.subnet.channels + "\n";
  s += "activation_target = " + format_double(cfg.subnet.activation_target) + "\n";
  s += "trigger_weight = " + format_double(cfg.subnet.trigger_weight) + "\n";
  s += "trigger_fraction = " + format_double(cfg.subnet.trigger_fraction) + "\n";
  s += "epochs = " + std::to_string(cfg.subnet.epochs) + "\n";
  s += "batch_size = " + std::to_string(cfg.subnet.batch_size) + "\n";
  s += "learning_rate = " + format_double(cfg.subnet.learning_rate) + "\n";
  s += "margin = " + format_double(cfg.subnet.margin) + "\n";
  s += "logit_boost = " + cfg.subnet.logit_boost + "\n";
  s += std::string("sever_incoming = ") + (cfg.subnet.sever_incoming ? "true" : "false") + "\n";
  s += std::string("sever_outgoing = ") + (cfg.subnet.sever_outgoing ? "true" : "false") + "\n";
  s += "\n[output]\n";
  s += "log = " + cfg.output.log + "\n";
  if (!cfg.output.checkpoint.empty()) s += "checkpoint = " + cfg.output.checkpoint + "\n";
  if (!cfg.output.summary.empty()) s += "summary = " + cfg.output.summary + "\n";
  if (!cfg.output.benign_checkpoint.empty())
    s += "benign_checkpoint = " + cfg.output.benign_checkpoint + "\n";
  if (!cfg.output.subnet_checkpoint.empty())
    s += "subnet_checkpoint = " + cfg.output.subnet_checkpoint + "\n";
  return s;
}

inline void ExperimentConfig::validate() const {
  using namespace confdetail;
  auto check = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
  };
  check(dataset.kind == "synth" || dataset.kind == "cifar10" || dataset.kind == "tensor_dir",
        "[dataset] kind: unknown value '" + dataset.kind + "'");
  check(dataset.classes >= 2, "[dataset] classes must be >= 2");
  check(dataset.per_class >= 2, "[dataset] per_class must be >= 2");
  check(dataset.test_per_class >= 1 && dataset.test_per_class < dataset.per_class,
        "[dataset] test_per_class must be in [1, per_class)");
  check(dataset.shape.size() == 3, "[dataset] shape must be CxHxW");
  for (int d : dataset.shape) check(d >= 1, "[dataset] shape dims must be positive");
  check(dataset.noise >= 0, "[dataset] noise must be >= 0");
  if (dataset.kind == "cifar10" || dataset.kind == "tensor_dir") {
    check(!dataset.train_path.empty(), "[dataset] train_path required for " + dataset.kind);
    check(!dataset.test_path.empty(), "[dataset] test_path required for " + dataset.kind);
  }

  check(model.preset == "small_cnn" || model.preset == "mlp",
        "[model] preset: unknown value '" + model.preset + "'");
  check(!model.conv_channels.empty(), "[model] conv_channels must not be empty");
  for (int c : model.conv_channels) check(c >= 1, "[model] conv_channels must be positive");
  check(model.hidden >= 1, "[model] hidden must be >= 1");
  check(model.kernel >= 1, "[model] kernel must be >= 1");

  check(partition.scheme == "iid" || partition.scheme == "shards",
        "[partition] scheme: unknown value '" + partition.scheme + "'");
  check(partition.shards_per_client >= 1, "[partition] shards_per_client must be >= 1");

  check(federation.clients >= 1, "[federation] clients must be >= 1");
  check(federation.sample >= 1 && federation.sample <= federation.clients,
        "[federation] sample must be in [1, clients]");
  check(federation.rounds >= 0, "[federation] rounds must be >= 0");
  check(federation.eps > 0, "[federation] eps must be > 0");

  check(train.learning_rate > 0, "[train] learning_rate must be > 0");
  check(train.batch_size >= 1, "[train] batch_size must be >= 1");
  check(train.local_epochs >= 1, "[train] local_epochs must be >= 1");

  check(public_data.kind == "synth" || public_data.kind == "noise",
        "[public] kind: unknown value '" + public_data.kind + "'");
  check(public_data.size >= 1, "[public] size must be >= 1");

  check(trigger.kind == "white" || trigger.kind == "logo",
        "[trigger] kind: unknown value '" + trigger.kind + "'");
  check(trigger.size >= 1, "[trigger] size must be >= 1");
  check(trigger.target >= 0 && trigger.target < dataset.classes,
        "[trigger] target must be in [0, classes)");
  if (trigger.position != "auto") {
    const std::vector<int> pos = to_int_list(trigger.position, ',', "[trigger] position");
    check(pos.size() == 2 && pos[0] >= 0 && pos[1] >= 0,
          "[trigger] position must be auto or row,col");
  }

  check(attack.role == "none" || attack.role == "server_dabs" ||
            attack.role == "server_one_shot" || attack.role == "client_data_poison" ||
            attack.role == "client_sra",
        "[attack] role: unknown value '" + attack.role + "'");
  check(attack.period >= 1, "[attack] period must be >= 1");
  for (int id : attack.malicious_clients) {
    check(id >= 0 && id < federation.clients,
          "[attack] malicious_clients must be in [0, clients)");
  }
  check(attack.poison_fraction > 0 && attack.poison_fraction <= 1,
        "[attack] poison_fraction must be in (0,1]");
  if (attack.cad_reference != "latched") {
    const double r = to_double(attack.cad_reference, "[attack] cad_reference");
    check(r >= 0 && r <= 1, "[attack] cad_reference must be latched or in [0,1]");
  }

  check(subnet.width >= 1, "[subnet] width must be >= 1");
  if (subnet.channels != "highest" && subnet.channels != "random") {
    to_int_list(subnet.channels, ',', "[subnet] channels");
  }
  check(subnet.activation_target > 0, "[subnet] activation_target must be > 0");
  check(subnet.trigger_weight > 0, "[subnet] trigger_weight must be > 0");
  check(subnet.trigger_fraction > 0 && subnet.trigger_fraction <= 1,
        "[subnet] trigger_fraction must be in (0,1]");
  check(subnet.epochs >= 1, "[subnet] epochs must be >= 1");
  check(subnet.batch_size >= 1, "[subnet] batch_size must be >= 1");
  check(subnet.learning_rate > 0, "[subnet] learning_rate must be > 0");
  check(subnet.margin >= 0, "[subnet] margin must be >= 0");
  if (subnet.logit_boost != "auto") {
    to_double(subnet.logit_boost, "[subnet] logit_boost");
  }

  check(!output.log.empty(), "[output] log must not be empty");
}

}  // namespace fedshard

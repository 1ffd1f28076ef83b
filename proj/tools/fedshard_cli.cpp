// command line front end: run / sweep / train-subnet / surgery / eval
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fedshard/fedshard.hpp"

namespace {

namespace fs = std::filesystem;
using namespace fedshard;

struct CommonArgs {
  std::string config_path;
  std::string out_dir = ".";
  std::uint64_t seed = 0;
  bool seed_set = false;
  bool quiet = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "experiment config file")->required();
  cmd->add_option("--out", args.out_dir, "output directory");
  cmd->add_option("--seed", args.seed, "override the run seed")
      ->each([&args](const std::string&) { args.seed_set = true; });
  cmd->add_flag("--quiet", args.quiet, "suppress progress output");
}

ExperimentConfig load_with_overrides(const CommonArgs& args) {
  ExperimentConfig cfg = load_config(args.config_path);
  if (args.seed_set) cfg.federation.seed = args.seed;
  return cfg;
}

int cmd_run(const CommonArgs& args) {
  const ExperimentConfig cfg = load_with_overrides(args);
  RunOutputs out = run_experiment(cfg, args.out_dir, args.quiet ? nullptr : &std::cerr);
  std::cout << summary_table(out.run);
  std::cout << summary_json(out.run) << "\n";
  return 0;
}

int cmd_sweep(const CommonArgs& args, const std::string& field,
              const std::string& values_csv) {
  const ExperimentConfig cfg = load_with_overrides(args);
  std::vector<std::string> values;
  std::string item;
  std::istringstream in(values_csv);
  while (std::getline(in, item, ',')) values.push_back(item);
  std::vector<SweepArm> arms =
      run_sweep(cfg, field, values, args.out_dir, args.quiet ? nullptr : &std::cerr);
  std::cout << sweep_table(field, arms);
  std::ofstream sj(fs::path(args.out_dir) / "sweep.json");
  require(static_cast<bool>(sj), "cannot write sweep.json");
  sj << sweep_json(field, arms) << "\n";
  return 0;
}

int cmd_train_subnet(const CommonArgs& args) {
  const ExperimentConfig cfg = load_with_overrides(args);
  const NetworkSpec spec = make_model_spec(cfg);
  const TriggerSpec trig = resolve_trigger(cfg);
  const PublicDataset pub = make_server_public_data(cfg);
  const SubnetSpec sub = resolve_subnet_spec(cfg, spec);
  const NetworkSpec subnet_net = build_subnet_spec(spec, sub);
  const SubnetTrainResult res =
      train_backdoor_subnet(subnet_net, pub, trig, resolve_subnet_train(cfg));

  fs::create_directories(args.out_dir);
  const std::string name =
      cfg.output.subnet_checkpoint.empty() ? "subnet.ckpt" : cfg.output.subnet_checkpoint;
  save_checkpoint((fs::path(args.out_dir) / name).string(), subnet_net, res.params);
  const std::string report = "{\"checkpoint\":\"" + name + "\",\"activation_target\":" +
                             confdetail::format_double(cfg.subnet.activation_target) +
                             ",\"trigger_weight\":" +
                             confdetail::format_double(cfg.subnet.trigger_weight) +
                             ",\"clean_activation_mean\":" +
                             confdetail::format_double(res.clean_activation_mean) +
                             ",\"triggered_activation_mean\":" +
                             confdetail::format_double(res.triggered_activation_mean) +
                             ",\"final_loss\":" + confdetail::format_double(res.final_loss) +
                             "}";
  std::ofstream sidecar(fs::path(args.out_dir) / (name + ".json"));
  require(static_cast<bool>(sidecar), "cannot write " + name + ".json");
  sidecar << report << "\n";
  std::cout << report << "\n";
  return 0;
}

int cmd_surgery(const CommonArgs& args, const std::string& model_path,
                const std::string& subnet_path, const std::string& out_name,
                std::optional<double> boost) {
  const ExperimentConfig cfg = load_with_overrides(args);
  const Checkpoint model = load_checkpoint(model_path);
  const TriggerSpec trig = resolve_trigger(cfg);
  const SubnetSpec sub = resolve_subnet_spec(cfg, model.spec);
  const NetworkSpec subnet_net = build_subnet_spec(model.spec, sub);

  ParamSet<float> subnet_params;
  if (!subnet_path.empty()) {
    const Checkpoint sc = load_checkpoint(subnet_path);
    if (sc.spec != subnet_net) {
      throw ConfigError("surgery: subnet checkpoint does not match the configured subnet layout");
    }
    subnet_params = sc.params;
  } else {
    const PublicDataset pub = make_server_public_data(cfg);
    subnet_params = train_backdoor_subnet(subnet_net, pub, trig, resolve_subnet_train(cfg)).params;
  }

  WiringSpec wiring;
  wiring.target_label = trig.target_label;
  wiring.sever_incoming = cfg.subnet.sever_incoming;
  wiring.sever_outgoing = cfg.subnet.sever_outgoing;
  if (boost) {
    wiring.logit_boost = *boost;
  } else if (cfg.subnet.logit_boost != "auto") {
    wiring.logit_boost = confdetail::to_double(cfg.subnet.logit_boost, "[subnet] logit_boost");
  } else {
    const PublicDataset pub = make_server_public_data(cfg);
    std::vector<Tensor<float>> calib(pub.images.begin(),
                                     pub.images.begin() + std::min<std::size_t>(64, pub.images.size()));
    wiring.logit_boost = calibrate_logit_boost(model.spec, model.params, calib,
                                               cfg.subnet.activation_target, cfg.subnet.margin);
  }

  const ParamSet<float> replaced =
      replace_subnet(model.spec, model.params, sub, subnet_params, wiring);
  fs::create_directories(args.out_dir);
  save_checkpoint((fs::path(args.out_dir) / out_name).string(), model.spec, replaced);
  std::cout << "{\"checkpoint\":\"" << out_name
            << "\",\"logit_boost\":" << wiring.logit_boost
            << ",\"target\":" << wiring.target_label << "}\n";
  return 0;
}

int cmd_eval(const CommonArgs& args, const std::string& model_path) {
  const ExperimentConfig cfg = load_with_overrides(args);
  const Checkpoint model = load_checkpoint(model_path);
  auto [train, test] = load_task_data(cfg);
  (void)train;
  const TriggerSpec trig = resolve_trigger(cfg);
  if (model.spec.input_shape != cfg.dataset.shape) {
    throw ConfigError("eval: checkpoint input shape does not match the dataset");
  }
  const double acc = clean_accuracy(model.spec, model.params, test);
  const double asr = attack_success_rate(model.spec, model.params, test, trig);
  std::cout << "{\"clean_accuracy\":" << acc << ",\"asr\":" << asr << "}\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"federated learning backdoor simulator"};
  app.require_subcommand(1);

  CommonArgs run_args, sweep_args, subnet_args, surgery_args, eval_args;
  std::string field, values_csv, model_path, subnet_path, surgery_out = "replaced.ckpt";
  double boost_value = 0;
  bool boost_set = false;

  CLI::App* run = app.add_subcommand("run", "run federated training with the configured attack");
  add_common(run, run_args);

  CLI::App* sweep = app.add_subcommand("sweep", "rerun the experiment across config values");
  add_common(sweep, sweep_args);
  sweep->add_option("--field", field, "config field as section.key")->required();
  sweep->add_option("--values", values_csv, "comma separated values")->required();

  CLI::App* tsub = app.add_subcommand("train-subnet", "train the backdoor subnet only");
  add_common(tsub, subnet_args);

  CLI::App* surg = app.add_subcommand("surgery", "implant the subnet into a model checkpoint");
  add_common(surg, surgery_args);
  surg->add_option("--model", model_path, "host model checkpoint")->required();
  surg->add_option("--subnet", subnet_path, "trained subnet checkpoint (default: train one)");
  surg->add_option("--out-name", surgery_out, "output checkpoint file name");
  surg->add_option("--boost", boost_value, "classifier logit boost (default: calibrate)")
      ->each([&boost_set](const std::string&) { boost_set = true; });

  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint on the configured task");
  add_common(eval, eval_args);
  eval->add_option("--model", model_path, "model checkpoint")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // usage problems are config errors
  }

  try {
    if (run->parsed()) return cmd_run(run_args);
    if (sweep->parsed()) return cmd_sweep(sweep_args, field, values_csv);
    if (tsub->parsed()) return cmd_train_subnet(subnet_args);
    if (surg->parsed()) {
      return cmd_surgery(surgery_args, model_path, subnet_path, surgery_out,
                         boost_set ? std::optional<double>(boost_value) : std::nullopt);
    }
    if (eval->parsed()) return cmd_eval(eval_args, model_path);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

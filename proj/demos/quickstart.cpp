// minimal end-to-end run: tiny synthetic task, a few FedAvg rounds, no attack
#include <iostream>

#include "fedshard/fedshard.hpp"

int main() {
  using namespace fedshard;

  ExperimentConfig cfg;
  cfg.dataset.classes = 4;
  cfg.dataset.per_class = 60;
  cfg.dataset.test_per_class = 20;
  cfg.dataset.shape = {1, 12, 12};
  cfg.model.conv_channels = {6, 8};
  cfg.model.hidden = 16;
  cfg.federation.clients = 8;
  cfg.federation.sample = 4;
  cfg.federation.rounds = 10;
  cfg.federation.seed = 7;
  cfg.train.local_epochs = 2;

  BuiltExperiment exp = build_experiment(cfg);
  RunResult res = run_training(exp.spec, exp.init, exp.shards, exp.fed, exp.plan, exp.eval);
  for (const RoundLog& log : res.logs) std::cout << round_log_json(log) << "\n";
  std::cout << "\nfinal:\n" << summary_table(res);
  return 0;
}

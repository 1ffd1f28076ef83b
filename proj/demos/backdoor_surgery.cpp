// subnet replacement outside the federation: train a model centrally, train
// the backdoor subnet on unrelated public images, implant it, compare metrics
#include <iostream>

#include "fedshard/fedshard.hpp"

int main() {
  using namespace fedshard;

  const std::vector<int> shape = {1, 12, 12};
  const int classes = 4;
  const LabeledDataset full = synth_dataset(classes, 80, shape, 11);
  LabeledDataset train, test;
  {
    std::vector<int> tr, te;
    for (int c = 0; c < classes; ++c) {
      for (int i = 0; i < 80; ++i) (i < 60 ? tr : te).push_back(c * 80 + i);
    }
    train = dataset_subset(full, tr);
    test = dataset_subset(full, te);
  }

  ExperimentConfig cfg;
  cfg.dataset.classes = classes;
  cfg.dataset.shape = shape;
  cfg.model.conv_channels = {6, 8};
  cfg.model.hidden = 16;
  const NetworkSpec spec = make_model_spec(cfg);

  // centralized training stands in for a converged federation
  TrainConfig tc;
  tc.local_epochs = 12;
  tc.seed = 3;
  const ParamSet<float> model = train_local(spec, init_params<float>(spec, 1), train, tc);

  const TriggerSpec trig = make_white_trigger(1, 3, 9, 9, 0);
  const LabeledDataset public_pool = synth_dataset(classes, 50, shape, 999);
  const PublicDataset pub = make_public_dataset(public_pool, 150, 5);

  const SubnetSpec sub = choose_subnet_channels(spec, 1);
  const NetworkSpec subnet_net = build_subnet_spec(spec, sub);
  SubnetTrainConfig sc;
  sc.epochs = 30;
  sc.seed = 17;
  const SubnetTrainResult sr = train_backdoor_subnet(subnet_net, pub, trig, sc);
  std::cout << "subnet activation  clean " << sr.clean_activation_mean << "  triggered "
            << sr.triggered_activation_mean << "\n";

  WiringSpec wiring;
  wiring.target_label = trig.target_label;
  std::vector<Tensor<float>> calib(pub.images.begin(), pub.images.begin() + 64);
  wiring.logit_boost = calibrate_logit_boost(spec, model, calib, sc.activation_target, 10);
  const ParamSet<float> replaced = replace_subnet(spec, model, sub, sr.params, wiring);

  std::cout << "before  acc " << clean_accuracy(spec, model, test) << "  asr "
            << attack_success_rate(spec, model, test, trig) << "\n";
  std::cout << "after   acc " << clean_accuracy(spec, replaced, test) << "  asr "
            << attack_success_rate(spec, replaced, test, trig) << "\n";
  return 0;
}

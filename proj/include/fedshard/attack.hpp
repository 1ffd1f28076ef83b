#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "fedshard/surgery.hpp"

namespace fedshard {

enum class AttackRole {
  none,
  server_dabs,       // server replaces the subnet every `period` rounds after convergence
  server_one_shot,   // server replaces the subnet once, at the final round
  client_data_poison,  // malicious clients train on label-flipped triggered data
  client_sra,          // malicious clients perform subnet surgery on their own update
};

inline std::string to_string(AttackRole r) {
  switch (r) {
    case AttackRole::none: return "none";
    case AttackRole::server_dabs: return "server_dabs";
    case AttackRole::server_one_shot: return "server_one_shot";
    case AttackRole::client_data_poison: return "client_data_poison";
    case AttackRole::client_sra: return "client_sra";
  }
  return "none";
}

inline AttackRole attack_role_from_string(const std::string& s) {
  if (s == "none") return AttackRole::none;
  if (s == "server_dabs") return AttackRole::server_dabs;
  if (s == "server_one_shot") return AttackRole::server_one_shot;
  if (s == "client_data_poison") return AttackRole::client_data_poison;
  if (s == "client_sra") return AttackRole::client_sra;
  throw ConfigError("unknown attack role '" + s + "'");
}

// What happened to the global model in a round, as written to the round log.
enum class AttackEvent { none, dabs_replacement, one_shot_replacement, client_poison, client_sra };

inline std::string to_string(AttackEvent e) {
  switch (e) {
    case AttackEvent::none: return "none";
    case AttackEvent::dabs_replacement: return "dabs_replacement";
    case AttackEvent::one_shot_replacement: return "one_shot_replacement";
    case AttackEvent::client_poison: return "client_poison";
    case AttackEvent::client_sra: return "client_sra";
  }
  return "none";
}

// Everything the attacker prepared before the run. The subnet is trained once
// at setup (on public data, no client data involved); the logit boost is
// recalibrated against each model the attacker touches unless fixed here.
struct AttackPlan {
  AttackRole role = AttackRole::none;
  int period = 10;                    // server_dabs: rounds between replacements
  std::vector<int> malicious_clients;  // client roles: attacker ids
  double poison_fraction = 0.5;       // client_data_poison: fraction of the shard
  bool retrain_each_attack = false;   // server roles: retrain the subnet per attack
  TriggerSpec trigger;
  SubnetSpec subnet;
  NetworkSpec subnet_net;
  ParamSet<float> subnet_params;
  SubnetTrainConfig subnet_train;
  PublicDataset public_data;
  double logit_margin = 10.0;
  std::optional<double> fixed_logit_boost;
  bool sever_incoming = true;
  bool sever_outgoing = true;

  bool is_server_role() const {
    return role == AttackRole::server_dabs || role == AttackRole::server_one_shot;
  }
  bool is_client_role() const {
    return role == AttackRole::client_data_poison || role == AttackRole::client_sra;
  }
  bool is_malicious(int client_id) const {
    return std::find(malicious_clients.begin(), malicious_clients.end(), client_id) !=
           malicious_clients.end();
  }

  void validate(int clients) const {
    if (role == AttackRole::none) return;
    if (role == AttackRole::server_dabs) {
      require(period >= 1, "attack: period must be >= 1");
    }
    if (is_client_role()) {
      require(!malicious_clients.empty(), "attack: client role needs malicious_clients");
      for (int id : malicious_clients) {
        require(id >= 0 && id < clients,
                "attack: malicious client " + std::to_string(id) + " out of range");
      }
    }
    if (role == AttackRole::client_data_poison) {
      require(poison_fraction > 0 && poison_fraction <= 1,
              "attack: poison_fraction must be in (0,1]");
    } else {
      require(!subnet_params.entries.empty(), "attack: plan is missing a trained subnet");
    }
  }
};

// Mutable per-run attacker state.
struct AttackState {
  std::optional<double> logit_boost;       // latest calibration
  std::optional<int> first_attack_round;
  std::optional<ParamSet<float>> retrained;  // latest retrained subnet, if any
};

// Server replacement schedule: DABS fires at the convergence round and every
// `period` rounds after; one-shot fires only at the final round (if converged).
inline bool server_attacks_at(const AttackPlan& plan, int round,
                              std::optional<int> converged_at, int total_rounds) {
  if (!converged_at.has_value()) return false;
  if (plan.role == AttackRole::server_dabs) {
    return round >= *converged_at && (round - *converged_at) % plan.period == 0;
  }
  if (plan.role == AttackRole::server_one_shot) return round == total_rounds;
  return false;
}

namespace detail {

inline std::vector<Tensor<float>> calibration_images(const PublicDataset& pub,
                                                     std::size_t limit = 64) {
  require(!pub.images.empty(), "attack: no public images to calibrate on");
  std::vector<Tensor<float>> imgs(pub.images.begin(),
                                  pub.images.begin() + std::min(limit, pub.images.size()));
  return imgs;
}

}  // namespace detail

// Performs the replacement on `model` (a global model or a client update).
// The logit boost is recalibrated on this model's clean logits over public
// images each time, so the boost tracks the host's logit scale as training
// sharpens it; a fixed boost skips calibration entirely.
inline ParamSet<float> attack_surgery(const NetworkSpec& spec, const AttackPlan& plan,
                                      AttackState& state, const ParamSet<float>& model) {
  if (plan.fixed_logit_boost) {
    state.logit_boost = *plan.fixed_logit_boost;
  } else {
    state.logit_boost = calibrate_logit_boost(
        spec, model, detail::calibration_images(plan.public_data),
        plan.subnet_train.activation_target, plan.logit_margin);
  }
  WiringSpec wiring;
  wiring.target_label = plan.trigger.target_label;
  wiring.logit_boost = *state.logit_boost;
  wiring.sever_incoming = plan.sever_incoming;
  wiring.sever_outgoing = plan.sever_outgoing;
  const ParamSet<float>& sub_params =
      state.retrained ? *state.retrained : plan.subnet_params;
  return replace_subnet(spec, model, plan.subnet, sub_params, wiring);
}

// Server-side attack step for round `round`; returns the (possibly replaced)
// global model and the event for the log.
inline std::pair<ParamSet<float>, AttackEvent> server_attack_step(
    const NetworkSpec& spec, const AttackPlan& plan, AttackState& state,
    const ParamSet<float>& aggregated, int round, std::optional<int> converged_at,
    int total_rounds) {
  if (!plan.is_server_role() || !server_attacks_at(plan, round, converged_at, total_rounds)) {
    return {aggregated, AttackEvent::none};
  }
  if (plan.retrain_each_attack) {
    SubnetTrainConfig cfg = plan.subnet_train;
    cfg.seed = derive_seed(cfg.seed, "retrain", static_cast<std::uint64_t>(round));
    state.retrained =
        train_backdoor_subnet(plan.subnet_net, plan.public_data, plan.trigger, cfg).params;
  }
  if (!state.first_attack_round) state.first_attack_round = round;
  ParamSet<float> replaced = attack_surgery(spec, plan, state, aggregated);
  return {std::move(replaced),
          plan.role == AttackRole::server_dabs ? AttackEvent::dabs_replacement
                                               : AttackEvent::one_shot_replacement};
}

}  // namespace fedshard

#pragma once

#include <charconv>
#include <cstdint>
#include <functional>
#include <future>
#include <optional>
#include <string>
#include <vector>

#include "fedshard/attack.hpp"
#include "fedshard/metrics.hpp"
#include "fedshard/train.hpp"

namespace fedshard {

struct FederationConfig {
  int clients = 20;       // total client population
  int sample_size = 5;    // clients drawn per round
  int rounds = 80;
  double convergence_eps = 0.05;  // global distance threshold that latches convergence
  TrainConfig local;      // per-client SGD settings (seed is derived per client/round)
  std::uint64_t seed = 0;
  bool parallel = true;

  void validate() const {
    require(clients >= 1, "federation: clients must be >= 1");
    require(sample_size >= 1 && sample_size <= clients,
            "federation: sample_size must be in [1, clients]");
    require(rounds >= 0, "federation: rounds must be >= 0");
    require(convergence_eps > 0, "federation: convergence_eps must be > 0");
    local.validate();
  }
};

// Seeded draw of sample_size distinct clients, returned in ascending id order.
inline std::vector<int> select_clients(int clients, int sample_size, int round,
                                       std::uint64_t seed) {
  require(sample_size >= 1 && sample_size <= clients, "select_clients: bad sample size");
  Rng rng(derive_seed(seed, "select", static_cast<std::uint64_t>(round)));
  std::vector<int> sel = rng.sample_without_replacement(clients, sample_size);
  std::sort(sel.begin(), sel.end());
  return sel;
}

// Sample-count-weighted federated average, accumulated in double.
inline ParamSet<float> aggregate(const std::vector<ParamSet<float>>& updates,
                                 const std::vector<int>& sample_counts) {
  require(!updates.empty(), "aggregate: no updates");
  require(updates.size() == sample_counts.size(),
          "aggregate: updates/sample_counts length mismatch");
  double total = 0;
  for (int n : sample_counts) {
    require(n >= 1, "aggregate: sample counts must be positive");
    total += n;
  }
  for (std::size_t k = 1; k < updates.size(); ++k) {
    require(updates[k].congruent(updates[0]), "aggregate: update " + std::to_string(k) +
                                                  " not congruent with update 0");
  }

  ParamSet<float> out = updates[0];
  for (std::size_t e = 0; e < out.entries.size(); ++e) {
    Tensor<float>& t = out.entries[e].tensor;
    for (std::int64_t i = 0; i < t.size(); ++i) {
      double acc = 0;
      for (std::size_t k = 0; k < updates.size(); ++k) {
        acc += (sample_counts[k] / total) *
               static_cast<double>(updates[k].entries[e].tensor[i]);
      }
      t[i] = static_cast<float>(acc);
    }
  }
  return out;
}

inline bool has_converged(const ParamSet<float>& prev, const ParamSet<float>& cur,
                          double eps) {
  return param_distance(prev, cur) <= eps;
}

// One line of the run log.
struct RoundLog {
  int round = 0;
  double clean_accuracy = 0;
  double asr = 0;
  double cad = 0;
  double distance_to_prev = 0;
  AttackEvent attack_event = AttackEvent::none;
};

namespace detail {

// shortest round-trip decimal for a double (std::to_chars)
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace detail

inline std::string round_log_json(const RoundLog& log) {
  std::string s = "{\"t\":" + std::to_string(log.round);
  s += ",\"clean_accuracy\":" + detail::format_double(log.clean_accuracy);
  s += ",\"asr\":" + detail::format_double(log.asr);
  s += ",\"cad\":" + detail::format_double(log.cad);
  s += ",\"distance_to_prev\":" + detail::format_double(log.distance_to_prev);
  s += ",\"attack_event\":\"" + to_string(log.attack_event) + "\"}";
  return s;
}

// Test set plus its triggered copy, built once and reused every round.
struct EvalContext {
  LabeledDataset test;
  LabeledDataset triggered_test;
  int target_label = 0;
};

inline EvalContext make_eval_context(LabeledDataset test, const TriggerSpec& trigger) {
  EvalContext ctx;
  ctx.triggered_test = apply_trigger_all(test, trigger);
  ctx.test = std::move(test);
  ctx.target_label = trigger.target_label;
  return ctx;
}

// Pre-upload vs post-aggregation attack effect for one malicious upload.
struct AttackedRoundTrace {
  int round = 0;
  int client_id = 0;
  double pre_upload_asr = 0;
  double post_agg_asr = 0;
};

struct RunResult {
  std::vector<RoundLog> logs;
  ParamSet<float> final_params;
  std::optional<int> converged_at;
  std::optional<double> benign_ref;  // clean accuracy the drop is measured against
  std::optional<double> logit_boost;
  std::optional<ParamSet<float>> benign_model;  // global right before the first replacement
  std::vector<AttackedRoundTrace> attack_trace;
};

// Federated training with an optional attack. Per round: sample clients,
// run local SGD from the current global (in parallel when configured),
// aggregate by sample count, latch convergence on the pre-attack distance,
// apply the server attack hook, then evaluate and log. Deterministic in the
// run seed: per-client seeds are derived from (seed, round, client id).
inline RunResult run_training(const NetworkSpec& spec, const ParamSet<float>& init,
                              const std::vector<ClientShard>& shards,
                              const FederationConfig& cfg, const AttackPlan& plan,
                              const EvalContext& eval,
                              std::optional<double> cad_reference = {},
                              const std::function<void(const RoundLog&)>& on_round = {}) {
  cfg.validate();
  plan.validate(cfg.clients);
  require(static_cast<int>(shards.size()) == cfg.clients,
          "run_training: " + std::to_string(shards.size()) + " shards for " +
              std::to_string(cfg.clients) + " clients");
  for (int k = 0; k < cfg.clients; ++k) {
    require(shards[k].client_id == k, "run_training: shard " + std::to_string(k) +
                                          " has client_id " +
                                          std::to_string(shards[k].client_id));
    require(!shards[k].data.empty(), "run_training: client " + std::to_string(k) +
                                         " has an empty shard");
  }

  RunResult res;
  res.final_params = init;
  res.benign_ref = cad_reference;
  AttackState state;

  for (int t = 1; t <= cfg.rounds; ++t) {
    const std::vector<int> selected =
        select_clients(cfg.clients, cfg.sample_size, t, cfg.seed);

    // client attacks start strictly after the convergence round
    const bool client_attack_round =
        plan.is_client_role() && res.converged_at && t > *res.converged_at;

    // honest local training for everyone (malicious transforms applied after)
    auto local_update = [&](int k) -> ParamSet<float> {
      TrainConfig tc = cfg.local;
      tc.seed = derive_seed(cfg.seed, "client", static_cast<std::uint64_t>(t),
                            static_cast<std::uint64_t>(k));
      if (client_attack_round && plan.role == AttackRole::client_data_poison &&
          plan.is_malicious(k)) {
        const LabeledDataset poisoned = poison_dataset(
            shards[k].data, plan.trigger, plan.poison_fraction,
            derive_seed(cfg.seed, "poisonset", static_cast<std::uint64_t>(t),
                        static_cast<std::uint64_t>(k)));
        return train_local(spec, res.final_params, poisoned, tc);
      }
      return train_local(spec, res.final_params, shards[k].data, tc);
    };

    std::vector<ParamSet<float>> updates(selected.size());
    if (cfg.parallel) {
      std::vector<std::future<ParamSet<float>>> futs;
      futs.reserve(selected.size());
      for (int k : selected) {
        futs.push_back(std::async(std::launch::async, local_update, k));
      }
      for (std::size_t i = 0; i < futs.size(); ++i) updates[i] = futs[i].get();
    } else {
      for (std::size_t i = 0; i < selected.size(); ++i) updates[i] = local_update(selected[i]);
    }

    AttackEvent event = AttackEvent::none;
    std::vector<std::size_t> traced;
    if (client_attack_round) {
      for (std::size_t i = 0; i < selected.size(); ++i) {
        if (!plan.is_malicious(selected[i])) continue;
        if (plan.role == AttackRole::client_sra) {
          updates[i] = attack_surgery(spec, plan, state, updates[i]);
          event = AttackEvent::client_sra;
        } else {
          event = AttackEvent::client_poison;
        }
        // pre-upload ASR: measured on the update exactly as uploaded
        const double pre =
            attack_success_rate(spec, updates[i], eval.triggered_test, eval.target_label);
        res.attack_trace.push_back({t, selected[i], pre, 0.0});
        traced.push_back(res.attack_trace.size() - 1);
        if (!state.first_attack_round) state.first_attack_round = t;
        if (!res.benign_ref) {
          // reference: the global model of the previous round, measured once
          res.benign_ref = t >= 2 && !res.logs.empty() ? res.logs.back().clean_accuracy
                                                       : clean_accuracy(spec, init, eval.test);
          res.benign_model = res.final_params;
        }
      }
    }

    std::vector<int> counts;
    counts.reserve(selected.size());
    for (int k : selected) counts.push_back(shards[k].sample_count());
    ParamSet<float> agg = aggregate(updates, counts);

    const double dist_pre = param_distance(res.final_params, agg);
    if (!res.converged_at && t >= 2 && dist_pre <= cfg.convergence_eps) {
      res.converged_at = t;
    }

    ParamSet<float> next = agg;
    if (plan.is_server_role()) {
      const bool first_server_attack =
          !state.first_attack_round &&
          server_attacks_at(plan, t, res.converged_at, cfg.rounds);
      if (first_server_attack) {
        res.benign_model = agg;
        if (!res.benign_ref) res.benign_ref = clean_accuracy(spec, agg, eval.test);
      }
      auto [replaced, ev] =
          server_attack_step(spec, plan, state, agg, t, res.converged_at, cfg.rounds);
      next = std::move(replaced);
      event = ev;
    }

    RoundLog log;
    log.round = t;
    log.attack_event = event;
    log.clean_accuracy = clean_accuracy(spec, next, eval.test);
    log.asr = attack_success_rate(spec, next, eval.triggered_test, eval.target_label);
    log.cad = res.benign_ref ? clean_accuracy_drop(*res.benign_ref, log.clean_accuracy) : 0.0;
    log.distance_to_prev =
        event == AttackEvent::none ? dist_pre : param_distance(res.final_params, next);
    for (std::size_t i : traced) res.attack_trace[i].post_agg_asr = log.asr;

    res.final_params = std::move(next);
    res.logs.push_back(log);
    if (on_round) on_round(log);
  }

  res.logit_boost = state.logit_boost;
  return res;
}

}  // namespace fedshard

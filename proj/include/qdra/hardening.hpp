#pragma once

#include <algorithm>
#include <vector>

#include "qdra/adversary.hpp"
#include "qdra/decoder.hpp"

namespace qdra {

// Perturbed graph kept with its original (correct) label 0 and its
// provenance: where it came from and which flips produced it.
struct AdversarialExample {
  SyndromeGraph graph;
  std::size_t source_index = 0;
  std::vector<int> actions;
};

using AdversarialSet = std::vector<AdversarialExample>;

// One greedy episode per correctly-classified-negative training sample;
// only successful attacks contribute, with their terminal graphs.
inline AdversarialSet generate_adversarial(ActorModel& actor, const Environment& env,
                                           const Dataset& ds,
                                           const std::vector<std::size_t>& train_indices) {
  AdversarialSet adv;
  Rng rng(0);  // greedy mode draws nothing
  for (std::size_t idx : train_indices) {
    const auto& rec = ds.records[idx];
    if (rec.label != 0) continue;
    SyndromeGraph g = to_graph(rec, ds.n_s, ds.t);
    if (env.pl(g) > 0.5) continue;
    EpisodeTrace trace = run_episode(env, actor, g, EpisodeMode::Greedy, rng);
    if (!trace.success) continue;
    AdversarialExample ex;
    ex.source_index = idx;
    for (const auto& step : trace.steps) {
      ex.actions.push_back(step.action);
      g = apply_flip(g, ActionIndex{step.action});
    }
    ex.graph = std::move(g);
    adv.push_back(std::move(ex));
  }
  return adv;
}

struct HardenConfig {
  double alpha = 1.0;
  int epochs = 10;
  bool warm_start = true;  // continue from the baseline parameters
};

// Adversarial retraining: per batch, weighted BCE on clean samples plus
// alpha times the weighted BCE on adversarial samples (all labeled 0).
// Adversarial batches cycle when the set is smaller than the clean split.
inline TrainResult robust_train(const DecoderModel& baseline, const Dataset& ds,
                                const AdversarialSet& adv, const HardenConfig& hcfg,
                                std::uint64_t seed) {
  if (hcfg.alpha < 0.0) throw ConfigError("hardening alpha must be >= 0");
  if (hcfg.epochs < 1) throw ConfigError("hardening epochs must be >= 1");
  SplitView view = split(ds);
  if (view.train.empty()) throw ContractError("empty training split");

  TrainResult result;
  result.w_p = positive_weight(ds, view.train);
  if (hcfg.warm_start) {
    result.model = baseline;
    // fresh optimizer state for the retraining phase
    result.model.params.adam_t = 0;
    for (auto& [name, p] : result.model.params) {
      std::fill(p.m.values.begin(), p.m.values.end(), 0.0);
      std::fill(p.v.values.begin(), p.v.values.end(), 0.0);
    }
  } else {
    result.model = DecoderModel::init(baseline.cfg, seed);
  }
  DecoderModel& model = result.model;
  const DecoderConfig& cfg = model.cfg;

  Rng order_rng(derive_seed(seed, "harden-batches"));
  std::vector<std::size_t> clean_order = view.train;
  std::vector<std::size_t> adv_order(adv.size());
  for (std::size_t i = 0; i < adv.size(); ++i) adv_order[i] = i;

  bool use_adv = hcfg.alpha > 0.0 && !adv.empty();
  std::size_t adv_cursor = 0;
  for (int epoch = 1; epoch <= hcfg.epochs; ++epoch) {
    detail::shuffle(clean_order, order_rng);
    if (use_adv) detail::shuffle(adv_order, order_rng);
    double loss_sum = 0.0;
    std::size_t n_batches = 0;
    for (std::size_t start = 0; start < clean_order.size(); start += cfg.batch) {
      std::size_t end = std::min(clean_order.size(), start + cfg.batch);
      std::vector<std::size_t> batch(clean_order.begin() + start, clean_order.begin() + end);
      Tape tape;
      ValueId loss = detail::batch_loss(tape, model, ds, batch, result.w_p);
      if (use_adv) {
        std::vector<ValueId> terms;
        std::size_t adv_batch = std::min<std::size_t>(cfg.batch, adv.size());
        for (std::size_t k = 0; k < adv_batch; ++k) {
          const AdversarialExample& ex = adv[adv_order[adv_cursor]];
          adv_cursor = (adv_cursor + 1) % adv.size();
          ValueId logit = decoder_logit_on_tape(tape, model, ex.graph);
          terms.push_back(tape.weighted_bce(logit, 0, result.w_p));
        }
        ValueId adv_total = terms[0];
        for (std::size_t k = 1; k < terms.size(); ++k) adv_total = tape.add(adv_total, terms[k]);
        ValueId adv_mean = tape.scalar_mul(adv_total, 1.0 / static_cast<double>(terms.size()));
        loss = tape.add(loss, tape.scalar_mul(adv_mean, hcfg.alpha));
      }
      model.params.zero_grad();
      tape.backward(loss);
      adam_step(model.params, cfg.lr);
      loss_sum += tape.value(loss).values[0];
      ++n_batches;
    }
    double test_acc = view.test.empty() ? 0.0 : evaluate(model, ds, view.test).accuracy;
    result.curves.push_back({epoch, loss_sum / n_batches, test_acc});
  }
  return result;
}

}  // namespace qdra

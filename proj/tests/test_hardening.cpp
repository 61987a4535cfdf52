#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numeric>

#include "qdra/hardening.hpp"

using namespace qdra;

namespace {

Dataset small_dataset(int n, std::uint64_t seed) {
  NoiseModel nm;
  return generate(nm, n, seed);
}

Environment planted_trigger_env(int max_steps = 5) {
  return Environment::from_logit_fn(
      [](const SyndromeGraph& g) { return g.at(0, 1) != 0.0 ? 10.0 : -10.0; }, max_steps);
}

ActorModel trigger_actor(const Environment& env, std::uint64_t seed) {
  SyndromeGraph zero;
  zero.features.assign(8, 0.0);
  ReinforceConfig cfg;
  cfg.episodes = 500;
  return reinforce_train(env, {zero}, 2, cfg, seed);
}

}  // namespace

TEST_CASE("constant-negative decoder yields no adversarial examples") {
  Environment env = Environment::from_logit_fn([](const SyndromeGraph&) { return -50.0; });
  ActorModel actor = ActorModel::init(ActorConfig{}, 2);
  Dataset ds = small_dataset(300, 3);
  std::vector<std::size_t> all(ds.records.size());
  std::iota(all.begin(), all.end(), 0);
  CHECK(generate_adversarial(actor, env, ds, all).empty());
}

TEST_CASE("planted-trigger adversarial examples equal source plus trigger bit") {
  Environment env = planted_trigger_env();
  ActorModel actor = trigger_actor(env, 5);
  Dataset ds = small_dataset(400, 6);
  std::vector<std::size_t> all(ds.records.size());
  std::iota(all.begin(), all.end(), 0);
  AdversarialSet adv = generate_adversarial(actor, env, ds, all);
  REQUIRE_FALSE(adv.empty());
  for (const auto& ex : adv) {
    const auto& src = ds.records[ex.source_index];
    REQUIRE(src.label == 0);
    // every stored graph replays the action trace and carries the trigger bit
    SyndromeGraph g = to_graph(src, ds.n_s, ds.t);
    for (int a : ex.actions) g = apply_flip(g, ActionIndex{a});
    CHECK(g == ex.graph);
    CHECK(ex.graph.at(0, 1) != 0.0);
    // sources the actor was trained on go straight for the trigger
    bool all_zero = true;
    for (std::uint8_t b : src.bits) all_zero = all_zero && b == 0;
    if (all_zero) {
      REQUIRE(ex.actions.size() == 1);
      CHECK(ex.actions[0] == 1);
    }
  }
}

TEST_CASE("adversarial set size equals the attack success count on the same pool") {
  DecoderModel dec = DecoderModel::init(DecoderConfig{}, 11);
  Environment env = Environment::from_model(dec);
  ActorModel actor = ActorModel::init(ActorConfig{}, 12);
  Dataset ds = small_dataset(600, 13);
  SplitView view = split(ds);
  AdversarialSet adv = generate_adversarial(actor, env, ds, view.train);
  auto pool = negative_pool(env, ds, view.train);
  if (!pool.empty()) {
    AttackReport report = attack_eval(env, actor, pool);
    CHECK(adv.size() == report.successes);
  }
}

TEST_CASE("every adversarial example replays its recorded action sequence") {
  DecoderModel dec = DecoderModel::init(DecoderConfig{}, 21);
  Environment env = Environment::from_model(dec);
  ActorModel actor = ActorModel::init(ActorConfig{}, 22);
  Dataset ds = small_dataset(600, 23);
  SplitView view = split(ds);
  AdversarialSet adv = generate_adversarial(actor, env, ds, view.train);
  for (const auto& ex : adv) {
    SyndromeGraph g = to_graph(ds.records[ex.source_index], ds.n_s, ds.t);
    for (int a : ex.actions) g = apply_flip(g, ActionIndex{a});
    CHECK(g == ex.graph);
    CHECK(env.pl(ex.graph) > 0.5);
    CHECK(ex.actions.size() <= 5);
  }
}

TEST_CASE("alpha 0 and an empty adversarial set reproduce plain continued training") {
  Dataset ds = small_dataset(800, 31);
  DecoderConfig cfg;
  cfg.epochs = 2;
  TrainResult base = train_decoder(ds, cfg, 32);

  Environment env = Environment::from_model(base.model);
  ActorModel actor = ActorModel::init(ActorConfig{}, 33);
  AdversarialSet adv = generate_adversarial(actor, env, ds, split(ds).train);

  HardenConfig plain;
  plain.alpha = 0.0;
  plain.epochs = 3;
  HardenConfig empty_set;
  empty_set.epochs = 3;

  TrainResult with_alpha0 = robust_train(base.model, ds, adv, plain, 34);
  TrainResult with_empty = robust_train(base.model, ds, {}, empty_set, 34);
  CHECK(with_alpha0.model.params.value_hash() == with_empty.model.params.value_hash());
  CHECK(with_alpha0.curves == with_empty.curves);
}

TEST_CASE("robust loss equals clean mean plus alpha times adversarial mean") {
  Dataset ds = small_dataset(200, 41);
  DecoderModel m = DecoderModel::init(DecoderConfig{}, 42);
  double w_p = 2.5, alpha = 1.5;

  std::vector<std::size_t> batch{0, 1, 2, 3};
  AdversarialSet adv;
  for (std::size_t i = 10; i < 13; ++i) {
    AdversarialExample ex;
    ex.source_index = i;
    ex.graph = apply_flip(to_graph(ds.records[i], ds.n_s, ds.t), ActionIndex{1});
    ex.actions = {1};
    adv.push_back(std::move(ex));
  }

  Tape tape;
  ValueId clean = detail::batch_loss(tape, m, ds, batch, w_p);
  std::vector<ValueId> terms;
  for (const auto& ex : adv) {
    ValueId logit = decoder_logit_on_tape(tape, m, ex.graph);
    terms.push_back(tape.weighted_bce(logit, 0, w_p));
  }
  ValueId adv_total = terms[0];
  for (std::size_t i = 1; i < terms.size(); ++i) adv_total = tape.add(adv_total, terms[i]);
  ValueId loss = tape.add(clean, tape.scalar_mul(tape.scalar_mul(adv_total, 1.0 / 3.0), alpha));

  double expect = 0.0;
  for (std::size_t idx : batch) {
    const auto& rec = ds.records[idx];
    expect += weighted_bce(predict_logit(m, to_graph(rec, ds.n_s, ds.t)), rec.label, w_p);
  }
  expect /= batch.size();
  double adv_mean = 0.0;
  for (const auto& ex : adv) adv_mean += weighted_bce(predict_logit(m, ex.graph), 0, w_p);
  adv_mean /= adv.size();
  expect += alpha * adv_mean;

  CHECK(std::abs(tape.value(loss).values[0] - expect) < 1e-12);
}

TEST_CASE("warm start resumes from the baseline with fresh optimizer state") {
  Dataset ds = small_dataset(500, 51);
  DecoderConfig cfg;
  cfg.epochs = 1;
  TrainResult base = train_decoder(ds, cfg, 52);
  REQUIRE(base.model.params.adam_t > 0);

  HardenConfig h;
  h.epochs = 1;
  TrainResult warm = robust_train(base.model, ds, {}, h, 53);
  // one retraining epoch advances the step counter from zero, not from the
  // baseline's count
  std::size_t batches = (split(ds).train.size() + 63) / 64;
  CHECK(warm.model.params.adam_t == static_cast<int>(batches));

  h.warm_start = false;
  TrainResult cold = robust_train(base.model, ds, {}, h, 53);
  CHECK(cold.model.params.value_hash() != warm.model.params.value_hash());
}

TEST_CASE("robust training is deterministic and emits one curve row per epoch") {
  Dataset ds = small_dataset(500, 61);
  DecoderConfig cfg;
  cfg.epochs = 1;
  TrainResult base = train_decoder(ds, cfg, 62);
  Environment env = Environment::from_model(base.model);
  ActorModel actor = ActorModel::init(ActorConfig{}, 63);
  AdversarialSet adv = generate_adversarial(actor, env, ds, split(ds).train);

  HardenConfig h;
  h.epochs = 4;
  TrainResult a = robust_train(base.model, ds, adv, h, 64);
  TrainResult b = robust_train(base.model, ds, adv, h, 64);
  CHECK(a.model.params.value_hash() == b.model.params.value_hash());
  CHECK(a.curves == b.curves);
  REQUIRE(a.curves.size() == 4);
  for (int e = 0; e < 4; ++e) CHECK(a.curves[e].epoch == e + 1);
}

TEST_CASE("hardening config validation") {
  Dataset ds = small_dataset(100, 71);
  DecoderModel m = DecoderModel::init(DecoderConfig{}, 72);
  HardenConfig bad;
  bad.alpha = -1.0;
  CHECK_THROWS_AS(robust_train(m, ds, {}, bad, 1), ConfigError);
  bad = HardenConfig{};
  bad.epochs = 0;
  CHECK_THROWS_AS(robust_train(m, ds, {}, bad, 1), ConfigError);
}

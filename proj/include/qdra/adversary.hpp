#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <thread>
#include <vector>

#include "qdra/checkpoint.hpp"
#include "qdra/codesim.hpp"
#include "qdra/decoder.hpp"
#include "qdra/gatv2.hpp"
#include "qdra/graphrep.hpp"
#include "qdra/report.hpp"

namespace qdra {

// The frozen decoder the adversary interacts with. Construct from a model
// or, for tests, from an arbitrary logit function.
class Environment {
 public:
  static Environment from_model(DecoderModel& m, int max_steps = 5) {
    Environment env;
    env.max_steps = max_steps;
    env.logit_fn_ = [&m](const SyndromeGraph& g) { return predict_logit(m, g); };
    env.hash_fn_ = [&m] { return m.params.value_hash(); };
    return env;
  }

  static Environment from_logit_fn(std::function<double(const SyndromeGraph&)> fn,
                                   int max_steps = 5) {
    Environment env;
    env.max_steps = max_steps;
    env.logit_fn_ = std::move(fn);
    return env;
  }

  double logit(const SyndromeGraph& g) const { return logit_fn_(g); }

  double pl(const SyndromeGraph& g) const {
    double z = logit(g);
    return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
  }

  // Hash of the wrapped decoder's parameters; the frozen-environment
  // invariant checks it is unchanged by adversary training.
  std::uint64_t param_hash() const { return hash_fn_ ? hash_fn_() : 0; }

  int max_steps = 5;

 private:
  std::function<double(const SyndromeGraph&)> logit_fn_;
  std::function<std::uint64_t()> hash_fn_;
};

// Reward for the transition s_t -> s_{t+1}: the change in predicted
// logical-error probability.
inline double reward(const Environment& env, const SyndromeGraph& s_t,
                     const SyndromeGraph& s_t1) {
  return env.pl(s_t1) - env.pl(s_t);
}

struct ActorConfig {
  int in_dim = 2;  // = T
  int hidden_dim = 32;
  double lr = 1e-3;

  void validate() const {
    if (in_dim < 1 || hidden_dim < 1) throw ConfigError("actor dimensions must be positive");
    if (!(lr > 0.0)) throw ConfigError("actor lr must be positive");
  }
};

// GAT policy network: the decoder's two attention layers without pooling,
// then a per-node head mapping each node embedding to T action logits,
// flattened node-major and softmaxed over the whole action space.
struct ActorModel {
  ActorConfig cfg;
  ParamStore params;
  std::uint64_t seed = 0;

  static ActorModel init(const ActorConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    ActorModel m;
    m.cfg = cfg;
    m.seed = seed;
    Rng rng(derive_seed(seed, "actor-init"));
    gatv2::init_params(m.params, "g1", cfg.in_dim, cfg.hidden_dim, rng);
    m.params.add("ln1.scale", ones(cfg.hidden_dim));
    m.params.add("ln1.shift", Tensor::zeros({cfg.hidden_dim}));
    gatv2::init_params(m.params, "g2", cfg.hidden_dim, cfg.hidden_dim, rng);
    m.params.add("ln2.scale", ones(cfg.hidden_dim));
    m.params.add("ln2.shift", Tensor::zeros({cfg.hidden_dim}));
    m.params.add("head.W",
                 ParamStore::uniform_init({cfg.hidden_dim, cfg.in_dim}, cfg.hidden_dim, rng));
    m.params.add("head.b", ParamStore::uniform_init({cfg.in_dim}, cfg.hidden_dim, rng));
    return m;
  }

 private:
  static Tensor ones(int n) {
    Tensor t = Tensor::zeros({n});
    std::fill(t.values.begin(), t.values.end(), 1.0);
    return t;
  }
};

// Policy distribution over the n_s*T actions as a 1-D tape value.
inline ValueId actor_policy_on_tape(Tape& tape, ActorModel& m, const SyndromeGraph& g) {
  if (g.t != m.cfg.in_dim)
    throw DimError("graph feature dim " + std::to_string(g.t) + " != actor in_dim " +
                   std::to_string(m.cfg.in_dim));
  ValueId h = tape.input(g.feature_matrix());
  ValueId h1 = gatv2::forward(tape, h, g.n_s, m.params, "g1");
  ValueId n1 = tape.relu(tape.layer_norm(h1, tape.param(m.params, "ln1.scale"),
                                         tape.param(m.params, "ln1.shift")));
  ValueId h2 = gatv2::forward(tape, n1, g.n_s, m.params, "g2");
  ValueId n2 = tape.relu(tape.layer_norm(h2, tape.param(m.params, "ln2.scale"),
                                         tape.param(m.params, "ln2.shift")));
  ValueId logits = tape.add(tape.matmul(n2, tape.param(m.params, "head.W")),
                            tape.param(m.params, "head.b"));
  // node-major flatten matches the action index a = node*T + time
  return tape.softmax(tape.reshape(logits, {g.n_s * g.t}));
}

inline std::vector<double> policy(ActorModel& m, const SyndromeGraph& g) {
  Tape tape;
  return tape.value(actor_policy_on_tape(tape, m, g)).values;
}

struct EpisodeStep {
  SyndromeGraph state;  // state the action was taken in
  int action = 0;
  double reward = 0.0;
};

struct EpisodeTrace {
  std::vector<EpisodeStep> steps;
  bool success = false;
  double initial_pl = 0.0;
  double terminal_pl = 0.0;

  int flips() const { return static_cast<int>(steps.size()); }
};

enum class EpisodeMode { Sample, Greedy };

namespace detail {

inline int sample_action(const std::vector<double>& probs, Rng& rng) {
  double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(probs.size()) - 1;  // guard against rounding
}

inline int greedy_action(const std::vector<double>& probs) {
  int best = 0;
  for (std::size_t i = 1; i < probs.size(); ++i) {
    if (probs[i] > probs[best]) best = static_cast<int>(i);  // lowest index wins ties
  }
  return best;
}

}  // namespace detail

// Flip bits until the decoder's prediction crosses P_L > 0.5 or the step
// budget runs out. The start state must be classified negative.
inline EpisodeTrace run_episode(const Environment& env, ActorModel& actor,
                                const SyndromeGraph& start, EpisodeMode mode, Rng& rng) {
  double pl = env.pl(start);
  if (pl > 0.5)
    throw ContractError("episode start state is already classified positive (P_L = " +
                        std::to_string(pl) + ")");
  EpisodeTrace trace;
  trace.initial_pl = pl;
  SyndromeGraph state = start;
  for (int step = 0; step < env.max_steps; ++step) {
    std::vector<double> probs = policy(actor, state);
    int a = mode == EpisodeMode::Sample ? detail::sample_action(probs, rng)
                                        : detail::greedy_action(probs);
    SyndromeGraph next = apply_flip(state, ActionIndex{a});
    double next_pl = env.pl(next);
    trace.steps.push_back({state, a, next_pl - pl});
    state = std::move(next);
    pl = next_pl;
    if (pl > 0.5) {
      trace.success = true;
      break;
    }
  }
  trace.terminal_pl = pl;
  return trace;
}

// Discounted returns G_t = sum_k gamma^k r_{t+k}, computed backward.
inline std::vector<double> discounted_returns(const EpisodeTrace& trace, double gamma) {
  std::vector<double> g(trace.steps.size());
  double acc = 0.0;
  for (int t = static_cast<int>(trace.steps.size()) - 1; t >= 0; --t) {
    acc = trace.steps[t].reward + gamma * acc;
    g[t] = acc;
  }
  return g;
}

// Start states for episodes and attack evaluation: samples with true label
// 0 that the frozen decoder classifies negative (P_L <= 0.5).
inline std::vector<SyndromeGraph> negative_pool(const Environment& env, const Dataset& ds,
                                                const std::vector<std::size_t>& indices) {
  std::vector<SyndromeGraph> pool;
  for (std::size_t idx : indices) {
    const auto& rec = ds.records[idx];
    if (rec.label != 0) continue;
    SyndromeGraph g = to_graph(rec, ds.n_s, ds.t);
    if (env.pl(g) <= 0.5) pool.push_back(std::move(g));
  }
  return pool;
}

struct ReinforceConfig {
  int episodes = 4000;
  double gamma = 0.95;
  double lr = 1e-3;
  int hidden_dim = 32;
};

// Plain REINFORCE: one optimizer step per episode on
// L = -sum_t log pi(a_t | s_t) G_t, no baseline, no return normalization.
inline ActorModel reinforce_train(const Environment& env, const std::vector<SyndromeGraph>& pool,
                                  int t, const ReinforceConfig& cfg, std::uint64_t seed) {
  if (pool.empty())
    throw ContractError("empty start pool: decoder classifies nothing correctly negative");
  ActorConfig acfg;
  acfg.in_dim = t;
  acfg.hidden_dim = cfg.hidden_dim;
  acfg.lr = cfg.lr;
  ActorModel actor = ActorModel::init(acfg, derive_seed(seed, "actor"));
  Rng rng(derive_seed(seed, "reinforce"));
  for (int ep = 0; ep < cfg.episodes; ++ep) {
    Rng ep_rng = rng.stream(static_cast<std::uint64_t>(ep));
    const SyndromeGraph& start = pool[ep_rng.uniform_int(pool.size())];
    EpisodeTrace trace = run_episode(env, actor, start, EpisodeMode::Sample, ep_rng);
    if (trace.steps.empty()) continue;
    std::vector<double> returns = discounted_returns(trace, cfg.gamma);

    Tape tape;
    ValueId loss = -1;
    for (std::size_t k = 0; k < trace.steps.size(); ++k) {
      ValueId probs = actor_policy_on_tape(tape, actor, trace.steps[k].state);
      ValueId logp = tape.log(tape.pick(probs, trace.steps[k].action));
      ValueId term = tape.scalar_mul(logp, -returns[k]);
      loss = loss < 0 ? term : tape.add(loss, term);
    }
    actor.params.zero_grad();
    tape.backward(loss);
    adam_step(actor.params, cfg.lr);
  }
  return actor;
}

namespace detail {

template <typename Fn>
void parallel_over(std::size_t n, int workers, Fn fn) {
  if (workers <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> threads;
  int w = std::min<std::size_t>(workers, n);
  for (int k = 0; k < w; ++k) {
    threads.emplace_back([k, w, n, &fn] {
      for (std::size_t i = k; i < n; i += w) fn(i);
    });
  }
  for (auto& th : threads) th.join();
}

}  // namespace detail

// One greedy episode per pool sample. The heatmap counts every flip of
// every successful episode at its (node, time) cell.
inline AttackReport attack_eval(const Environment& env, ActorModel& actor,
                                const std::vector<SyndromeGraph>& pool, int workers = 1) {
  if (pool.empty()) throw ContractError("attack_eval on empty pool");
  AttackReport report;
  report.n_s = pool[0].n_s;
  report.t = pool[0].t;
  report.pool_size = pool.size();
  report.init_heatmap();

  std::vector<EpisodeTrace> traces(pool.size());
  detail::parallel_over(pool.size(), workers, [&](std::size_t i) {
    Rng rng(0);
    traces[i] = run_episode(env, actor, pool[i], EpisodeMode::Greedy, rng);
  });

  long flips_in_successes = 0;
  for (const auto& trace : traces) {
    if (!trace.success) continue;
    report.successes += 1;
    flips_in_successes += trace.flips();
    for (const auto& step : trace.steps) {
      ActionIndex a{step.action};
      report.heatmap[a.node(report.t)][a.time(report.t)] += 1;
    }
  }
  if (report.successes > 0)
    report.avg_flips = static_cast<double>(flips_in_successes) / report.successes;
  return report;
}

struct OracleReport {
  AttackReport report;
  std::vector<std::size_t> min_flip_hist;  // index k-1 = samples whose minimum is k flips
  int budget = 0;
};

namespace detail {

// Smallest successful flip subset for one sample: sizes ascending, subsets
// of each size in lexicographic order, first hit wins.
inline std::optional<std::vector<int>> min_flip_subset(const Environment& env,
                                                       const SyndromeGraph& g, int budget) {
  int n = g.n_s * g.t;
  std::vector<int> comb;
  for (int size = 1; size <= budget; ++size) {
    comb.assign(size, 0);
    for (int i = 0; i < size; ++i) comb[i] = i;
    while (true) {
      SyndromeGraph flipped = g;
      for (int b : comb) flipped = apply_flip(flipped, ActionIndex{b});
      if (env.pl(flipped) > 0.5) return comb;
      // next lexicographic combination
      int i = size - 1;
      while (i >= 0 && comb[i] == n - size + i) --i;
      if (i < 0) break;
      ++comb[i];
      for (int j = i + 1; j < size; ++j) comb[j] = comb[j - 1] + 1;
    }
  }
  return std::nullopt;
}

inline double subset_count(int n, int k_max) {
  double total = 0.0, c = 1.0;
  for (int k = 1; k <= k_max; ++k) {
    c = c * (n - k + 1) / k;
    total += c;
  }
  return total;
}

}  // namespace detail

// Exhaustive attack oracle: per sample, the minimum flip set of size <= k
// that crosses the decision boundary. Flips commute, so subsets suffice.
inline OracleReport brute_force_attack(const Environment& env,
                                       const std::vector<SyndromeGraph>& pool, int budget,
                                       int workers = 1, double enumeration_budget = 1e7) {
  if (pool.empty()) throw ContractError("brute_force_attack on empty pool");
  if (budget < 1) throw ConfigError("brute-force budget must be >= 1");
  int n = pool[0].n_s * pool[0].t;
  double per_sample = detail::subset_count(n, std::min(budget, n));
  if (per_sample * static_cast<double>(pool.size()) > enumeration_budget) {
    throw ConfigError("brute-force enumeration of " + std::to_string(per_sample) +
                      " subsets x " + std::to_string(pool.size()) +
                      " samples exceeds the configured budget");
  }
  OracleReport oracle;
  oracle.budget = budget;
  oracle.min_flip_hist.assign(budget, 0);
  AttackReport& report = oracle.report;
  report.n_s = pool[0].n_s;
  report.t = pool[0].t;
  report.pool_size = pool.size();
  report.init_heatmap();

  std::vector<std::optional<std::vector<int>>> results(pool.size());
  detail::parallel_over(pool.size(), workers, [&](std::size_t i) {
    results[i] = detail::min_flip_subset(env, pool[i], std::min(budget, n));
  });

  long flips_in_successes = 0;
  for (const auto& subset : results) {
    if (!subset) continue;
    report.successes += 1;
    flips_in_successes += static_cast<long>(subset->size());
    oracle.min_flip_hist[subset->size() - 1] += 1;
    for (int b : *subset) {
      ActionIndex a{b};
      report.heatmap[a.node(report.t)][a.time(report.t)] += 1;
    }
  }
  if (report.successes > 0)
    report.avg_flips = static_cast<double>(flips_in_successes) / report.successes;
  return oracle;
}

// ---- actor checkpoint ----

inline void save_actor(const ActorModel& m, const std::string& path,
                       const nlohmann::json& provenance = nlohmann::json()) {
  nlohmann::json j;
  j["format"] = kCheckpointFormat;
  j["kind"] = "actor";
  j["seed"] = m.seed;
  j["config"] = {{"in_dim", m.cfg.in_dim}, {"hidden_dim", m.cfg.hidden_dim}, {"lr", m.cfg.lr}};
  j["params"] = detail::params_to_json(m.params);
  if (!provenance.is_null()) j["provenance"] = provenance;
  detail::write_json_file(j, path);
}

inline ActorModel load_actor(const std::string& path) {
  nlohmann::json j = detail::load_checkpoint_json(path, "actor");
  ActorModel m;
  const auto& c = j.at("config");
  m.cfg.in_dim = c.at("in_dim");
  m.cfg.hidden_dim = c.at("hidden_dim");
  m.cfg.lr = c.at("lr");
  m.cfg.validate();
  m.seed = j.at("seed");
  detail::params_from_json(j.at("params"), m.params);
  return m;
}

}  // namespace qdra

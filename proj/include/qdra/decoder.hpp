#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "qdra/codesim.hpp"
#include "qdra/gatv2.hpp"
#include "qdra/graphrep.hpp"
#include "qdra/params.hpp"
#include "qdra/tape.hpp"

namespace qdra {

struct DecoderConfig {
  int in_dim = 2;  // = T
  int hidden_dim = 32;
  int heads = 1;
  int mlp_hidden = 32;
  double lr = 5e-3;
  int epochs = 20;
  int batch = 64;

  void validate() const {
    if (in_dim < 1 || hidden_dim < 1 || mlp_hidden < 1 || epochs < 1 || batch < 1)
      throw ConfigError("decoder config dimensions must be positive");
    if (heads != 1) throw ConfigError("only single-head attention is supported");
    if (!(lr > 0.0)) throw ConfigError("decoder lr must be positive");
  }
};

// Two GATv2 layers, each followed by LayerNorm and ReLU, mean pooling over
// nodes, then a two-layer MLP producing a single logit.
struct DecoderModel {
  DecoderConfig cfg;
  ParamStore params;
  std::uint64_t seed = 0;

  static DecoderModel init(const DecoderConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    DecoderModel m;
    m.cfg = cfg;
    m.seed = seed;
    Rng rng(derive_seed(seed, "decoder-init"));
    gatv2::init_params(m.params, "g1", cfg.in_dim, cfg.hidden_dim, rng);
    m.params.add("ln1.scale", ones({cfg.hidden_dim}));
    m.params.add("ln1.shift", Tensor::zeros({cfg.hidden_dim}));
    gatv2::init_params(m.params, "g2", cfg.hidden_dim, cfg.hidden_dim, rng);
    m.params.add("ln2.scale", ones({cfg.hidden_dim}));
    m.params.add("ln2.shift", Tensor::zeros({cfg.hidden_dim}));
    m.params.add("mlp.W1",
                 ParamStore::uniform_init({cfg.hidden_dim, cfg.mlp_hidden}, cfg.hidden_dim, rng));
    m.params.add("mlp.b1", ParamStore::uniform_init({cfg.mlp_hidden}, cfg.hidden_dim, rng));
    m.params.add("mlp.W2", ParamStore::uniform_init({cfg.mlp_hidden, 1}, cfg.mlp_hidden, rng));
    m.params.add("mlp.b2", ParamStore::uniform_init({1}, cfg.mlp_hidden, rng));
    return m;
  }

 private:
  static Tensor ones(std::vector<int> shape) {
    Tensor t = Tensor::zeros(std::move(shape));
    std::fill(t.values.begin(), t.values.end(), 1.0);
    return t;
  }
};

// Builds the decoder forward graph on an existing tape and returns the
// scalar logit value id.
inline ValueId decoder_logit_on_tape(Tape& tape, DecoderModel& m, const SyndromeGraph& g) {
  if (g.t != m.cfg.in_dim)
    throw DimError("graph feature dim " + std::to_string(g.t) + " != decoder in_dim " +
                   std::to_string(m.cfg.in_dim));
  ValueId h = tape.input(g.feature_matrix());
  ValueId h1 = gatv2::forward(tape, h, g.n_s, m.params, "g1");
  ValueId n1 = tape.relu(tape.layer_norm(h1, tape.param(m.params, "ln1.scale"),
                                         tape.param(m.params, "ln1.shift")));
  ValueId h2 = gatv2::forward(tape, n1, g.n_s, m.params, "g2");
  ValueId n2 = tape.relu(tape.layer_norm(h2, tape.param(m.params, "ln2.scale"),
                                         tape.param(m.params, "ln2.shift")));
  ValueId pooled = tape.mean_rows(n2);
  ValueId z1 = tape.relu(tape.add(tape.matmul(pooled, tape.param(m.params, "mlp.W1")),
                                  tape.param(m.params, "mlp.b1")));
  ValueId z2 = tape.add(tape.matmul(z1, tape.param(m.params, "mlp.W2")),
                        tape.param(m.params, "mlp.b2"));
  return tape.sum(z2);
}

inline double predict_logit(DecoderModel& m, const SyndromeGraph& g) {
  Tape tape;
  return tape.value(decoder_logit_on_tape(tape, m, g)).values[0];
}

inline double predict_pl(DecoderModel& m, const SyndromeGraph& g) {
  double z = predict_logit(m, g);
  return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

// Scalar weighted BCE in log-sum-exp form, matching Tape::weighted_bce.
inline double weighted_bce(double logit, int y, double w_p) {
  if (!(w_p > 0.0)) throw ContractError("weighted_bce requires w_p > 0");
  auto softplus = [](double z) {
    return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
  };
  return y == 1 ? w_p * softplus(-logit) : softplus(logit);
}

struct CurveRow {
  int epoch = 0;
  double loss = 0.0;
  double test_accuracy = 0.0;

  bool operator==(const CurveRow&) const = default;
};

struct EvalMetrics {
  std::size_t size = 0;
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  double accuracy = 0.0;
  double recall_pos = 0.0;  // of true positives, fraction predicted positive
  double recall_neg = 0.0;
};

// Threshold P_L > 0.5 (i.e. logit > 0) for the positive class; a tie at
// exactly 0.5 classifies negative.
inline EvalMetrics evaluate(DecoderModel& m, const Dataset& ds,
                            const std::vector<std::size_t>& indices) {
  if (indices.empty()) throw ContractError("evaluate on empty split");
  EvalMetrics e;
  e.size = indices.size();
  for (std::size_t idx : indices) {
    const auto& rec = ds.records[idx];
    int pred = predict_logit(m, to_graph(rec, ds.n_s, ds.t)) > 0.0 ? 1 : 0;
    if (rec.label == 1) {
      (pred == 1 ? e.tp : e.fn)++;
    } else {
      (pred == 0 ? e.tn : e.fp)++;
    }
  }
  e.accuracy = static_cast<double>(e.tp + e.tn) / e.size;
  e.recall_pos = (e.tp + e.fn) ? static_cast<double>(e.tp) / (e.tp + e.fn) : 0.0;
  e.recall_neg = (e.tn + e.fp) ? static_cast<double>(e.tn) / (e.tn + e.fp) : 0.0;
  return e;
}

inline double positive_weight(const Dataset& ds, const std::vector<std::size_t>& train) {
  std::size_t pos = 0;
  for (std::size_t idx : train) pos += ds.records[idx].label;
  std::size_t neg = train.size() - pos;
  if (pos == 0 || neg == 0)
    throw ContractError("training split is single-class; positive weight undefined");
  return static_cast<double>(neg) / static_cast<double>(pos);
}

namespace detail {

// Mean weighted-BCE loss over one mini-batch, built on one tape.
inline ValueId batch_loss(Tape& tape, DecoderModel& m, const Dataset& ds,
                          const std::vector<std::size_t>& batch, double w_p) {
  std::vector<ValueId> terms;
  terms.reserve(batch.size());
  for (std::size_t idx : batch) {
    const auto& rec = ds.records[idx];
    ValueId logit = decoder_logit_on_tape(tape, m, to_graph(rec, ds.n_s, ds.t));
    terms.push_back(tape.weighted_bce(logit, rec.label, w_p));
  }
  ValueId total = terms[0];
  for (std::size_t i = 1; i < terms.size(); ++i) total = tape.add(total, terms[i]);
  return tape.scalar_mul(total, 1.0 / static_cast<double>(batch.size()));
}

template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[rng.uniform_int(i)]);
  }
}

}  // namespace detail

struct TrainResult {
  DecoderModel model;
  std::vector<CurveRow> curves;
  double w_p = 0.0;
};

// Mini-batch training on the 80/20 split of ds; curve rows carry the mean
// training loss and the clean test accuracy per epoch.
inline TrainResult train_decoder(const Dataset& ds, const DecoderConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  if (cfg.in_dim != ds.t) throw ConfigError("decoder in_dim must equal dataset T");
  SplitView view = split(ds);
  if (view.train.empty()) throw ContractError("empty training split");
  TrainResult result;
  result.w_p = positive_weight(ds, view.train);
  result.model = DecoderModel::init(cfg, seed);
  Rng order_rng(derive_seed(seed, "decoder-batches"));

  std::vector<std::size_t> order = view.train;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    detail::shuffle(order, order_rng);
    double loss_sum = 0.0;
    std::size_t n_batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
      std::size_t end = std::min(order.size(), start + cfg.batch);
      std::vector<std::size_t> batch(order.begin() + start, order.begin() + end);
      Tape tape;
      ValueId loss = detail::batch_loss(tape, result.model, ds, batch, result.w_p);
      result.model.params.zero_grad();
      tape.backward(loss);
      adam_step(result.model.params, cfg.lr);
      loss_sum += tape.value(loss).values[0];
      ++n_batches;
    }
    double test_acc =
        view.test.empty() ? 0.0 : evaluate(result.model, ds, view.test).accuracy;
    result.curves.push_back({epoch, loss_sum / n_batches, test_acc});
  }
  return result;
}

}  // namespace qdra

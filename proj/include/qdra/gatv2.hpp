#pragma once

#include <string>
#include <vector>

#include "qdra/params.hpp"
#include "qdra/tape.hpp"

namespace qdra {

// One GATv2 attention layer over the complete digraph with self-loops.
// Scores s_ij = a . LeakyReLU(W_s h_i + W_t h_j + b) for target i, source j;
// attention normalizes over the incoming edges of each target; the update is
// h'_i = sum_j alpha_ij (W_t h_j).
namespace gatv2 {

constexpr double kLeakySlope = 0.2;

inline void init_params(ParamStore& store, const std::string& prefix, int in_dim, int out_dim,
                        Rng& rng) {
  store.add(prefix + ".Ws", ParamStore::uniform_init({in_dim, out_dim}, in_dim, rng));
  store.add(prefix + ".Wt", ParamStore::uniform_init({in_dim, out_dim}, in_dim, rng));
  store.add(prefix + ".b", ParamStore::uniform_init({out_dim}, in_dim, rng));
  store.add(prefix + ".a", ParamStore::uniform_init({out_dim, 1}, out_dim, rng));
}

// Forward pass for n_nodes nodes; h is an (n_nodes x in_dim) tape value.
inline ValueId forward(Tape& tape, ValueId h, int n_nodes, ParamStore& store,
                       const std::string& prefix) {
  // edge e = i*n + j: target i, source j
  std::vector<int> targets, sources;
  targets.reserve(static_cast<std::size_t>(n_nodes) * n_nodes);
  sources.reserve(static_cast<std::size_t>(n_nodes) * n_nodes);
  for (int i = 0; i < n_nodes; ++i) {
    for (int j = 0; j < n_nodes; ++j) {
      targets.push_back(i);
      sources.push_back(j);
    }
  }
  ValueId ws = tape.param(store, prefix + ".Ws");
  ValueId wt = tape.param(store, prefix + ".Wt");
  ValueId b = tape.param(store, prefix + ".b");
  ValueId a = tape.param(store, prefix + ".a");

  ValueId hs = tape.matmul(h, ws);  // (n x d) target transform
  ValueId ht = tape.matmul(h, wt);  // (n x d) source transform / messages
  ValueId per_target = tape.gather_rows(hs, targets);
  ValueId per_source = tape.gather_rows(ht, sources);
  ValueId pre = tape.add(tape.add(per_target, per_source), b);
  ValueId act = tape.leaky_relu(pre, kLeakySlope);
  ValueId scores = tape.reshape(tape.matmul(act, a), {n_nodes * n_nodes});
  ValueId alpha = tape.softmax_groups(scores, targets, n_nodes);
  ValueId weighted = tape.row_scale(tape.gather_rows(ht, sources), alpha);
  return tape.segment_sum(weighted, targets, n_nodes);
}

}  // namespace gatv2
}  // namespace qdra

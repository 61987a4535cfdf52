#pragma once

#include <vector>

#include "qdra/codesim.hpp"
#include "qdra/errors.hpp"
#include "qdra/tensor.hpp"

namespace qdra {

// Time-flattened syndrome graph: n_s nodes with T-dimensional binary
// features. The edge set is the complete digraph including self-loops and
// is implied by n_s, so only the feature matrix is stored.
struct SyndromeGraph {
  int n_s = 4;
  int t = 2;
  std::vector<double> features;  // node-major, features[node*t + time]

  double& at(int node, int time) { return features[static_cast<std::size_t>(node) * t + time]; }
  double at(int node, int time) const {
    return features[static_cast<std::size_t>(node) * t + time];
  }

  Tensor feature_matrix() const {
    Tensor m = Tensor::zeros({n_s, t});
    m.values = features;
    return m;
  }

  std::vector<std::uint8_t> flatten() const {
    std::vector<std::uint8_t> bits(features.size());
    for (std::size_t i = 0; i < features.size(); ++i) bits[i] = features[i] != 0.0 ? 1 : 0;
    return bits;
  }

  int n_edges() const { return n_s * n_s; }

  bool operator==(const SyndromeGraph&) const = default;
};

// Flat action index over syndrome bits, node-major: a = node*T + time.
struct ActionIndex {
  int a = 0;

  int node(int t) const { return a / t; }
  int time(int t) const { return a % t; }

  static ActionIndex encode(int node, int time, int t) { return ActionIndex{node * t + time}; }
};

inline SyndromeGraph to_graph(const SyndromeRecord& rec, int n_s, int t) {
  if (rec.bits.size() != static_cast<std::size_t>(n_s) * t) {
    throw DimError("record has " + std::to_string(rec.bits.size()) + " bits, expected " +
                   std::to_string(n_s * t));
  }
  SyndromeGraph g;
  g.n_s = n_s;
  g.t = t;
  g.features.resize(rec.bits.size());
  for (std::size_t i = 0; i < rec.bits.size(); ++i) g.features[i] = rec.bits[i] ? 1.0 : 0.0;
  return g;
}

// Toggle one syndrome bit; pure function.
inline SyndromeGraph apply_flip(const SyndromeGraph& g, ActionIndex action) {
  if (action.a < 0 || action.a >= g.n_s * g.t) {
    throw ContractError("action " + std::to_string(action.a) + " out of range [0, " +
                        std::to_string(g.n_s * g.t) + ")");
  }
  SyndromeGraph out = g;
  out.features[action.a] = out.features[action.a] != 0.0 ? 0.0 : 1.0;
  return out;
}

}  // namespace qdra

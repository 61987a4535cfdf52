#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "qdra/errors.hpp"
#include "qdra/params.hpp"
#include "qdra/tensor.hpp"

namespace qdra {

// Handle into a Tape. Valid only for the tape that produced it.
using ValueId = int;

// Define-by-run reverse-mode tape. Rebuilt per forward pass; nodes form an
// append-only DAG, so reverse creation order is a reverse topological order
// and backward visits each node exactly once.
class Tape {
 public:
  const Tensor& value(ValueId id) const { return nodes_[id].value; }
  const Tensor& grad(ValueId id) const { return nodes_[id].grad; }
  std::size_t size() const { return nodes_.size(); }

  // ---- leaves ----

  // Constant input; receives a gradient slot but never flushes anywhere.
  ValueId input(Tensor t) {
    check_finite(t, "input");
    return push(std::move(t), {}, nullptr);
  }

  // Parameter leaf. After backward() the accumulated gradient is added into
  // the ParamStore gradient slot.
  ValueId param(ParamStore& store, const std::string& name) {
    Param& p = store.at(name);
    ValueId id = push(p.value, {}, nullptr);
    param_sinks_.push_back({id, &p});
    return id;
  }

  // ---- ops ----

  // C = A * B, (m x k)(k x n)
  ValueId matmul(ValueId a, ValueId b) {
    const Tensor& A = nodes_[a].value;
    const Tensor& B = nodes_[b].value;
    if (A.rank() != 2 || B.rank() != 2 || A.shape[1] != B.shape[0]) {
      throw DimError("matmul " + A.shape_str() + " x " + B.shape_str());
    }
    int m = A.shape[0], k = A.shape[1], n = B.shape[1];
    Tensor C = Tensor::zeros({m, n});
    for (int i = 0; i < m; ++i) {
      for (int l = 0; l < k; ++l) {
        double av = A.at(i, l);
        for (int j = 0; j < n; ++j) C.at(i, j) += av * B.at(l, j);
      }
    }
    return push(std::move(C), {a, b}, [m, k, n](Tape& t, Node& node) {
      const Tensor& A = t.nodes_[node.inputs[0]].value;
      const Tensor& B = t.nodes_[node.inputs[1]].value;
      Tensor& dA = t.nodes_[node.inputs[0]].grad;
      Tensor& dB = t.nodes_[node.inputs[1]].grad;
      const Tensor& dC = node.grad;
      for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
          double g = dC.at(i, j);
          if (g == 0.0) continue;
          for (int l = 0; l < k; ++l) {
            dA.at(i, l) += g * B.at(l, j);
            dB.at(l, j) += g * A.at(i, l);
          }
        }
      }
    });
  }

  // Same-shape addition, or matrix + row-vector bias broadcast over rows.
  ValueId add(ValueId a, ValueId b) {
    const Tensor& A = nodes_[a].value;
    const Tensor& B = nodes_[b].value;
    bool broadcast = A.rank() == 2 && B.rank() == 1 && B.shape[0] == A.shape[1];
    if (!broadcast && !A.same_shape(B)) {
      throw DimError("add " + A.shape_str() + " + " + B.shape_str());
    }
    Tensor C = A;
    if (broadcast) {
      for (int i = 0; i < A.rows(); ++i)
        for (int j = 0; j < A.cols(); ++j) C.at(i, j) += B.values[j];
    } else {
      for (std::size_t i = 0; i < C.values.size(); ++i) C.values[i] += B.values[i];
    }
    return push(std::move(C), {a, b}, [broadcast](Tape& t, Node& node) {
      Tensor& dA = t.nodes_[node.inputs[0]].grad;
      Tensor& dB = t.nodes_[node.inputs[1]].grad;
      const Tensor& dC = node.grad;
      for (std::size_t i = 0; i < dC.values.size(); ++i) dA.values[i] += dC.values[i];
      if (broadcast) {
        for (int i = 0; i < dC.rows(); ++i)
          for (int j = 0; j < dC.cols(); ++j) dB.values[j] += dC.at(i, j);
      } else {
        for (std::size_t i = 0; i < dC.values.size(); ++i) dB.values[i] += dC.values[i];
      }
    });
  }

  ValueId scalar_mul(ValueId a, double c) {
    Tensor C = nodes_[a].value;
    for (double& v : C.values) v *= c;
    return push(std::move(C), {a}, [c](Tape& t, Node& node) {
      Tensor& dA = t.nodes_[node.inputs[0]].grad;
      for (std::size_t i = 0; i < dA.values.size(); ++i) dA.values[i] += c * node.grad.values[i];
    });
  }

  // Stack along axis 0. Inputs must share column count (or all be 1-D).
  ValueId concat_rows(const std::vector<ValueId>& ids) {
    if (ids.empty()) throw DimError("concat of zero tensors");
    int cols = nodes_[ids[0]].value.cols();
    int rows = 0;
    for (ValueId id : ids) {
      const Tensor& T = nodes_[id].value;
      if (T.cols() != cols) throw DimError("concat column mismatch");
      rows += T.rows();
    }
    Tensor C = Tensor::zeros({rows, cols});
    int r = 0;
    for (ValueId id : ids) {
      const Tensor& T = nodes_[id].value;
      for (std::size_t i = 0; i < T.values.size(); ++i)
        C.values[static_cast<std::size_t>(r) * cols + i] = T.values[i];
      r += T.rows();
    }
    return push(std::move(C), ids, [cols](Tape& t, Node& node) {
      int r = 0;
      for (ValueId id : node.inputs) {
        Tensor& dI = t.nodes_[id].grad;
        for (std::size_t i = 0; i < dI.values.size(); ++i)
          dI.values[i] += node.grad.values[static_cast<std::size_t>(r) * cols + i];
        r += t.nodes_[id].value.rows();
      }
    });
  }

  ValueId relu(ValueId a) { return leaky_relu(a, 0.0); }

  ValueId leaky_relu(ValueId a, double slope) {
    Tensor C = nodes_[a].value;
    for (double& v : C.values) v = v > 0.0 ? v : slope * v;
    return push(std::move(C), {a}, [slope](Tape& t, Node& node) {
      const Tensor& A = t.nodes_[node.inputs[0]].value;
      Tensor& dA = t.nodes_[node.inputs[0]].grad;
      for (std::size_t i = 0; i < A.values.size(); ++i)
        dA.values[i] += node.grad.values[i] * (A.values[i] > 0.0 ? 1.0 : slope);
    });
  }

  // Per-row normalization with learned scale/shift vectors (length = cols).
  ValueId layer_norm(ValueId a, ValueId scale, ValueId shift, double eps = 1e-5) {
    const Tensor& A = nodes_[a].value;
    if (A.rank() != 2) throw DimError("layer_norm expects a matrix, got " + A.shape_str());
    int n = A.shape[1];
    const Tensor& S = nodes_[scale].value;
    const Tensor& H = nodes_[shift].value;
    if (S.rank() != 1 || S.shape[0] != n || H.rank() != 1 || H.shape[0] != n) {
      throw DimError("layer_norm scale/shift must be vectors of length " + std::to_string(n));
    }
    int m = A.shape[0];
    Tensor C = Tensor::zeros({m, n});
    std::vector<double> mu(m), istd(m);
    for (int i = 0; i < m; ++i) {
      double s = 0.0;
      for (int j = 0; j < n; ++j) s += A.at(i, j);
      mu[i] = s / n;
      double var = 0.0;
      for (int j = 0; j < n; ++j) {
        double d = A.at(i, j) - mu[i];
        var += d * d;
      }
      var /= n;
      istd[i] = 1.0 / std::sqrt(var + eps);
      for (int j = 0; j < n; ++j)
        C.at(i, j) = (A.at(i, j) - mu[i]) * istd[i] * S.values[j] + H.values[j];
    }
    return push(std::move(C), {a, scale, shift},
                [m, n, mu = std::move(mu), istd = std::move(istd)](Tape& t, Node& node) {
                  const Tensor& A = t.nodes_[node.inputs[0]].value;
                  const Tensor& S = t.nodes_[node.inputs[1]].value;
                  Tensor& dA = t.nodes_[node.inputs[0]].grad;
                  Tensor& dS = t.nodes_[node.inputs[1]].grad;
                  Tensor& dH = t.nodes_[node.inputs[2]].grad;
                  const Tensor& dC = node.grad;
                  for (int i = 0; i < m; ++i) {
                    double sum_dy = 0.0, sum_dy_xhat = 0.0;
                    for (int j = 0; j < n; ++j) {
                      double xhat = (A.at(i, j) - mu[i]) * istd[i];
                      double dy = dC.at(i, j) * S.values[j];
                      dS.values[j] += dC.at(i, j) * xhat;
                      dH.values[j] += dC.at(i, j);
                      sum_dy += dy;
                      sum_dy_xhat += dy * xhat;
                    }
                    for (int j = 0; j < n; ++j) {
                      double xhat = (A.at(i, j) - mu[i]) * istd[i];
                      double dy = dC.at(i, j) * S.values[j];
                      dA.at(i, j) += istd[i] * (dy - sum_dy / n - xhat * sum_dy_xhat / n);
                    }
                  }
                });
  }

  // Softmax over segments of a 1-D tensor. groups[i] gives the segment of
  // element i; each segment normalizes independently with max-subtraction.
  ValueId softmax_groups(ValueId a, std::vector<int> groups, int n_groups) {
    const Tensor& A = nodes_[a].value;
    if (A.rank() != 1) throw DimError("softmax_groups expects a vector, got " + A.shape_str());
    int n = A.shape[0];
    if (static_cast<int>(groups.size()) != n) throw DimError("softmax_groups group list size");
    std::vector<double> gmax(n_groups, -1e300), gsum(n_groups, 0.0);
    for (int i = 0; i < n; ++i) gmax[groups[i]] = std::max(gmax[groups[i]], A.values[i]);
    Tensor C = Tensor::zeros({n});
    for (int i = 0; i < n; ++i) {
      C.values[i] = std::exp(A.values[i] - gmax[groups[i]]);
      gsum[groups[i]] += C.values[i];
    }
    for (int i = 0; i < n; ++i) C.values[i] /= gsum[groups[i]];
    return push(std::move(C), {a},
                [groups = std::move(groups), n_groups](Tape& t, Node& node) {
                  const Tensor& Y = node.value;
                  Tensor& dA = t.nodes_[node.inputs[0]].grad;
                  const Tensor& dY = node.grad;
                  std::vector<double> dot(n_groups, 0.0);
                  for (std::size_t i = 0; i < Y.values.size(); ++i)
                    dot[groups[i]] += Y.values[i] * dY.values[i];
                  for (std::size_t i = 0; i < Y.values.size(); ++i)
                    dA.values[i] += Y.values[i] * (dY.values[i] - dot[groups[i]]);
                });
  }

  // Full softmax of a vector (one segment).
  ValueId softmax(ValueId a) {
    int n = nodes_[a].value.cols();
    return softmax_groups(a, std::vector<int>(n, 0), 1);
  }

  ValueId sigmoid(ValueId a) {
    Tensor C = nodes_[a].value;
    for (double& v : C.values) v = stable_sigmoid(v);
    return push(std::move(C), {a}, [](Tape& t, Node& node) {
      const Tensor& Y = node.value;
      Tensor& dA = t.nodes_[node.inputs[0]].grad;
      for (std::size_t i = 0; i < Y.values.size(); ++i)
        dA.values[i] += node.grad.values[i] * Y.values[i] * (1.0 - Y.values[i]);
    });
  }

  ValueId log(ValueId a) {
    Tensor C = nodes_[a].value;
    for (double& v : C.values) v = std::log(v);
    return push(std::move(C), {a}, [](Tape& t, Node& node) {
      const Tensor& A = t.nodes_[node.inputs[0]].value;
      Tensor& dA = t.nodes_[node.inputs[0]].grad;
      for (std::size_t i = 0; i < A.values.size(); ++i)
        dA.values[i] += node.grad.values[i] / A.values[i];
    });
  }

  // Column means: (m x n) -> (1 x n). Global mean pooling over nodes.
  ValueId mean_rows(ValueId a) {
    const Tensor& A = nodes_[a].value;
    if (A.rank() != 2) throw DimError("mean_rows expects a matrix, got " + A.shape_str());
    int m = A.shape[0], n = A.shape[1];
    Tensor C = Tensor::zeros({1, n});
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) C.at(0, j) += A.at(i, j) / m;
    return push(std::move(C), {a}, [m, n](Tape& t, Node& node) {
      Tensor& dA = t.nodes_[node.inputs[0]].grad;
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) dA.at(i, j) += node.grad.at(0, j) / m;
    });
  }

  ValueId gather_rows(ValueId a, std::vector<int> indices) {
    const Tensor& A = nodes_[a].value;
    if (A.rank() != 2) throw DimError("gather_rows expects a matrix, got " + A.shape_str());
    int n = A.shape[1];
    Tensor C = Tensor::zeros({static_cast<int>(indices.size()), n});
    for (std::size_t e = 0; e < indices.size(); ++e) {
      if (indices[e] < 0 || indices[e] >= A.shape[0]) throw DimError("gather_rows index range");
      for (int j = 0; j < n; ++j) C.at(static_cast<int>(e), j) = A.at(indices[e], j);
    }
    return push(std::move(C), {a}, [indices = std::move(indices), n](Tape& t, Node& node) {
      Tensor& dA = t.nodes_[node.inputs[0]].grad;
      for (std::size_t e = 0; e < indices.size(); ++e)
        for (int j = 0; j < n; ++j)
          dA.at(indices[e], j) += node.grad.at(static_cast<int>(e), j);
    });
  }

  // Sum rows of an (E x n) matrix into their segment: -> (n_groups x n).
  ValueId segment_sum(ValueId a, std::vector<int> groups, int n_groups) {
    const Tensor& A = nodes_[a].value;
    if (A.rank() != 2) throw DimError("segment_sum expects a matrix, got " + A.shape_str());
    if (static_cast<int>(groups.size()) != A.shape[0]) throw DimError("segment_sum group size");
    int n = A.shape[1];
    Tensor C = Tensor::zeros({n_groups, n});
    for (int e = 0; e < A.shape[0]; ++e)
      for (int j = 0; j < n; ++j) C.at(groups[e], j) += A.at(e, j);
    return push(std::move(C), {a}, [groups = std::move(groups), n](Tape& t, Node& node) {
      Tensor& dA = t.nodes_[node.inputs[0]].grad;
      for (std::size_t e = 0; e < groups.size(); ++e)
        for (int j = 0; j < n; ++j)
          dA.at(static_cast<int>(e), j) += node.grad.at(groups[e], j);
    });
  }

  // Scale row e of an (E x n) matrix by w[e].
  ValueId row_scale(ValueId a, ValueId w) {
    const Tensor& A = nodes_[a].value;
    const Tensor& W = nodes_[w].value;
    if (A.rank() != 2 || W.rank() != 1 || W.shape[0] != A.shape[0]) {
      throw DimError("row_scale " + A.shape_str() + " by " + W.shape_str());
    }
    int m = A.shape[0], n = A.shape[1];
    Tensor C = A;
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) C.at(i, j) *= W.values[i];
    return push(std::move(C), {a, w}, [m, n](Tape& t, Node& node) {
      const Tensor& A = t.nodes_[node.inputs[0]].value;
      const Tensor& W = t.nodes_[node.inputs[1]].value;
      Tensor& dA = t.nodes_[node.inputs[0]].grad;
      Tensor& dW = t.nodes_[node.inputs[1]].grad;
      for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
          dA.at(i, j) += node.grad.at(i, j) * W.values[i];
          dW.values[i] += node.grad.at(i, j) * A.at(i, j);
        }
      }
    });
  }

  // View with a new shape (same element count, same order).
  ValueId reshape(ValueId a, std::vector<int> shape) {
    Tensor C = nodes_[a].value;
    C.shape = std::move(shape);
    if (C.numel_from_shape() != C.values.size()) throw DimError("reshape element count");
    return push(std::move(C), {a}, [](Tape& t, Node& node) {
      Tensor& dA = t.nodes_[node.inputs[0]].grad;
      for (std::size_t i = 0; i < dA.values.size(); ++i) dA.values[i] += node.grad.values[i];
    });
  }

  // Single element of a vector, as a scalar.
  ValueId pick(ValueId a, int index) {
    const Tensor& A = nodes_[a].value;
    if (A.rank() != 1 || index < 0 || index >= A.shape[0])
      throw DimError("pick index " + std::to_string(index) + " from " + A.shape_str());
    return push(Tensor::scalar(A.values[index]), {a}, [index](Tape& t, Node& node) {
      t.nodes_[node.inputs[0]].grad.values[index] += node.grad.values[0];
    });
  }

  // Sum of all elements, as a scalar.
  ValueId sum(ValueId a) {
    double s = 0.0;
    for (double v : nodes_[a].value.values) s += v;
    return push(Tensor::scalar(s), {a}, [](Tape& t, Node& node) {
      Tensor& dA = t.nodes_[node.inputs[0]].grad;
      for (double& g : dA.values) g += node.grad.values[0];
    });
  }

  // Weighted binary cross-entropy on a scalar logit, in log-sum-exp form:
  //   y=1: w_p * softplus(-z),  y=0: softplus(z)
  ValueId weighted_bce(ValueId logit, int y, double w_p) {
    const Tensor& Z = nodes_[logit].value;
    if (!Z.is_scalar()) throw DimError("weighted_bce expects a scalar logit");
    if (w_p <= 0.0) throw ContractError("weighted_bce requires w_p > 0");
    if (y != 0 && y != 1) throw ContractError("weighted_bce label must be 0 or 1");
    double z = Z.values[0];
    double loss = y == 1 ? w_p * softplus(-z) : softplus(z);
    return push(Tensor::scalar(loss), {logit}, [y, w_p](Tape& t, Node& node) {
      double z = t.nodes_[node.inputs[0]].value.values[0];
      double s = stable_sigmoid(z);
      double dz = y == 1 ? -w_p * (1.0 - s) : s;
      t.nodes_[node.inputs[0]].grad.values[0] += node.grad.values[0] * dz;
    });
  }

  // Seed d(loss)=1, sweep the tape in reverse, then flush parameter leaves
  // into their ParamStore gradient slots (accumulating).
  void backward(ValueId loss) {
    if (!nodes_[loss].value.is_scalar()) throw ContractError("backward requires a scalar loss");
    if (nodes_.empty()) throw ContractError("backward on empty tape");
    nodes_[loss].grad.values[0] = 1.0;
    for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
      if (nodes_[i].back) nodes_[i].back(*this, nodes_[i]);
    }
    for (auto& [id, p] : param_sinks_) {
      const Tensor& g = nodes_[id].grad;
      for (std::size_t i = 0; i < g.values.size(); ++i) p->grad.values[i] += g.values[i];
    }
  }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::vector<ValueId> inputs;
    std::function<void(Tape&, Node&)> back;
  };

  static double stable_sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    double e = std::exp(z);
    return e / (1.0 + e);
  }

  static double softplus(double z) {
    // log(1 + e^z) without overflow
    return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
  }

  static void check_finite(const Tensor& t, const char* where) {
    if (!t.all_finite()) throw NumericError(std::string("non-finite value in ") + where);
  }

  ValueId push(Tensor value, std::vector<ValueId> inputs, std::function<void(Tape&, Node&)> back) {
    check_finite(value, "op output");
    Node n;
    n.grad = value.is_scalar() ? Tensor::scalar(0.0) : Tensor::zeros(value.shape);
    n.value = std::move(value);
    n.inputs = std::move(inputs);
    n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return static_cast<ValueId>(nodes_.size()) - 1;
  }

  std::vector<Node> nodes_;
  std::vector<std::pair<ValueId, Param*>> param_sinks_;
};

}  // namespace qdra

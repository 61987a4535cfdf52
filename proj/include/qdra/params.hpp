#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <map>
#include <string>

#include "qdra/errors.hpp"
#include "qdra/rng.hpp"
#include "qdra/tensor.hpp"

namespace qdra {

// One named parameter with its gradient slot and optimizer moments.
struct Param {
  Tensor value;
  Tensor grad;  // same shape, accumulated by Tape::backward
  Tensor m;     // first moment
  Tensor v;     // second moment
};

// Named, shaped parameter arrays. std::map keeps iteration order stable
// (alphabetical), which the determinism contract relies on.
class ParamStore {
 public:
  Param& add(const std::string& name, Tensor init) {
    if (params_.count(name)) throw ContractError("duplicate parameter " + name);
    Param p;
    p.grad = Tensor::zeros(init.shape);
    p.m = Tensor::zeros(init.shape);
    p.v = Tensor::zeros(init.shape);
    p.value = std::move(init);
    return params_.emplace(name, std::move(p)).first->second;
  }

  Param& at(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw ContractError("unknown parameter " + name);
    return it->second;
  }
  const Param& at(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw ContractError("unknown parameter " + name);
    return it->second;
  }
  bool has(const std::string& name) const { return params_.count(name) != 0; }

  void zero_grad() {
    for (auto& [name, p] : params_) {
      std::fill(p.grad.values.begin(), p.grad.values.end(), 0.0);
    }
  }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }
  std::size_t size() const { return params_.size(); }

  // Uniform init in +-1/sqrt(fan_in), drawn in alphabetical parameter order.
  static Tensor uniform_init(std::vector<int> shape, int fan_in, Rng& rng) {
    Tensor t = Tensor::zeros(std::move(shape));
    double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (double& v : t.values) v = rng.uniform(-bound, bound);
    return t;
  }

  // Order-insensitive content hash of all parameter values; used to verify
  // the frozen-environment invariant.
  std::uint64_t value_hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& [name, p] : params_) {
      for (unsigned char c : name) {
        h ^= c;
        h *= 0x100000001b3ULL;
      }
      for (double v : p.value.values) {
        std::uint64_t bits;
        static_assert(sizeof(bits) == sizeof(v));
        std::memcpy(&bits, &v, sizeof(bits));
        for (int i = 0; i < 8; ++i) {
          h ^= (bits >> (8 * i)) & 0xff;
          h *= 0x100000001b3ULL;
        }
      }
    }
    return h;
  }

  int adam_t = 0;  // step counter shared by all parameters

 private:
  std::map<std::string, Param> params_;
};

// Standard adaptive-moment update. Moment buffers live in the store and
// persist across steps.
inline void adam_step(ParamStore& params, double lr, double beta1 = 0.9, double beta2 = 0.999,
                      double eps = 1e-8) {
  params.adam_t += 1;
  double bc1 = 1.0 - std::pow(beta1, params.adam_t);
  double bc2 = 1.0 - std::pow(beta2, params.adam_t);
  for (auto& [name, p] : params) {
    for (std::size_t i = 0; i < p.value.values.size(); ++i) {
      double g = p.grad.values[i];
      if (!std::isfinite(g)) throw NumericError("non-finite gradient in parameter " + name);
      p.m.values[i] = beta1 * p.m.values[i] + (1.0 - beta1) * g;
      p.v.values[i] = beta2 * p.v.values[i] + (1.0 - beta2) * g * g;
      double mhat = p.m.values[i] / bc1;
      double vhat = p.v.values[i] / bc2;
      p.value.values[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

}  // namespace qdra

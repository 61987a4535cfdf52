#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "qdra/errors.hpp"

namespace qdra {

// Dense row-major tensor of doubles. Rank 0 (scalar), 1 or 2 in practice.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> values;

  Tensor() = default;

  static Tensor scalar(double v) {
    Tensor t;
    t.values = {v};
    return t;
  }

  static Tensor zeros(std::vector<int> shape) {
    Tensor t;
    t.shape = std::move(shape);
    t.values.assign(t.numel_from_shape(), 0.0);
    return t;
  }

  static Tensor vec(std::vector<double> v) {
    Tensor t;
    t.shape = {static_cast<int>(v.size())};
    t.values = std::move(v);
    return t;
  }

  static Tensor matrix(int rows, int cols, std::vector<double> v) {
    Tensor t;
    t.shape = {rows, cols};
    t.values = std::move(v);
    if (t.values.size() != static_cast<std::size_t>(rows) * cols) {
      throw DimError("matrix() values size does not match " + std::to_string(rows) + "x" +
                     std::to_string(cols));
    }
    return t;
  }

  std::size_t numel() const { return values.size(); }

  std::size_t numel_from_shape() const {
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    return n;
  }

  bool is_scalar() const { return shape.empty() && values.size() == 1; }
  int rank() const { return static_cast<int>(shape.size()); }
  int rows() const { return rank() == 2 ? shape[0] : 1; }
  int cols() const {
    if (rank() == 2) return shape[1];
    if (rank() == 1) return shape[0];
    return 1;
  }

  double& at(int r, int c) { return values[static_cast<std::size_t>(r) * cols() + c]; }
  double at(int r, int c) const { return values[static_cast<std::size_t>(r) * cols() + c]; }

  bool all_finite() const {
    for (double v : values) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  std::string shape_str() const {
    std::string s = "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(shape[i]);
    }
    return s + ")";
  }
};

}  // namespace qdra

#pragma once

#include <algorithm>
#include <cassert>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

namespace tfmt {

/// Dense row-major parameter tensor with a declared shape.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> dims)
      : shape(std::move(dims)), data(count(shape), 0.0) {}

  static std::size_t count(const std::vector<std::size_t>& dims) {
    return std::accumulate(dims.begin(), dims.end(), std::size_t{1},
                           std::multiplies<>());
  }

  std::size_t size() const { return data.size(); }
  bool empty() const { return data.empty(); }
  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }
  std::span<double> span() { return data; }
  std::span<const double> span() const { return data; }

  void zero() { std::fill(data.begin(), data.end(), 0.0); }
  Tensor zeros_like() const { return Tensor(shape); }
};

/// rows x cols matrix; used for sentence encodings and scratch buffers.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), data(std::size_t(r) * c, 0.0) {}

  std::span<double> row(int i) {
    return {data.data() + std::size_t(i) * cols, std::size_t(cols)};
  }
  std::span<const double> row(int i) const {
    return {data.data() + std::size_t(i) * cols, std::size_t(cols)};
  }
  double& at(int i, int j) { return data[std::size_t(i) * cols + j]; }
  double at(int i, int j) const { return data[std::size_t(i) * cols + j]; }
};

/// n x n x d relation table, channels-last: cell (i,j) is a contiguous
/// d-vector at offset (i*n + j)*d.
struct FeatureMap {
  int n = 0;
  int d = 0;
  int layer = 0;
  std::vector<double> data;

  FeatureMap() = default;
  FeatureMap(int size, int depth, int layer_index = 0)
      : n(size), d(depth), layer(layer_index),
        data(std::size_t(size) * size * depth, 0.0) {}

  std::size_t offset(int i, int j) const {
    return (std::size_t(i) * n + j) * d;
  }
  std::span<double> cell(int i, int j) { return {data.data() + offset(i, j), std::size_t(d)}; }
  std::span<const double> cell(int i, int j) const {
    return {data.data() + offset(i, j), std::size_t(d)};
  }
};

}  // namespace tfmt

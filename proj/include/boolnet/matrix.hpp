#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace boolnet {

// Dense row-major real matrix. Just enough surface for the signal math;
// heavier linear algebra is deliberately out of scope.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  std::span<double> row(std::size_t r) {
    return {data.data() + r * cols, cols};
  }
  std::span<const double> row(std::size_t r) const {
    return {data.data() + r * cols, cols};
  }

  std::size_t size() const { return rows * cols; }

  bool operator==(const Matrix&) const = default;
};

}  // namespace boolnet

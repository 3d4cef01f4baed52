#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace labeldist {

// Minimal row-major dense matrix; just enough for weight tensors and
// frame-major feature blocks.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c, double fill = 0.0) : rows(r), cols(c) {
    if (r < 0 || c < 0) throw std::invalid_argument("Matrix: negative shape");
    data.assign(static_cast<std::size_t>(r) * static_cast<std::size_t>(c), fill);
  }

  double& operator()(int r, int c) {
    return data[static_cast<std::size_t>(r) * cols + c];
  }
  double operator()(int r, int c) const {
    return data[static_cast<std::size_t>(r) * cols + c];
  }

  bool same_shape(const Matrix& o) const {
    return rows == o.rows && cols == o.cols;
  }
};

}  // namespace labeldist

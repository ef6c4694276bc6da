#pragma once

#include <algorithm>
#include <cassert>
#include <cstddef>
#include <vector>

namespace advae {

// Dense row-major matrix of doubles. Row/column vectors are 1xN or Nx1.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, 0.0) {}

  static Matrix filled(int r, int c, double v) {
    Matrix m(r, c);
    m.fill(v);
    return m;
  }

  double* row(int i) { return data.data() + static_cast<size_t>(i) * cols; }
  const double* row(int i) const { return data.data() + static_cast<size_t>(i) * cols; }

  double& at(int i, int j) { return data[static_cast<size_t>(i) * cols + j]; }
  double at(int i, int j) const { return data[static_cast<size_t>(i) * cols + j]; }

  size_t size() const { return data.size(); }
  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
  void fill(double v) { std::fill(data.begin(), data.end(), v); }

  void add_inplace(const Matrix& o) {
    assert(same_shape(o));
    for (size_t i = 0; i < data.size(); ++i) data[i] += o.data[i];
  }
};

}  // namespace advae

#include "advae/kernels.hpp"

#include <atomic>
#include <cmath>
#include <cstring>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace advae::kernels {

namespace {

std::atomic<int> g_max_threads{1};

// Minimum multiply-add count before a parallel region pays for itself.
constexpr size_t kParallelFlops = size_t{1} << 16;

inline bool go_parallel(size_t flops) { return g_max_threads.load(std::memory_order_relaxed) > 1 && flops >= kParallelFlops; }

inline void matmul_row(const Matrix& a, const Matrix& b, Matrix& out, int i, bool accumulate) {
  double* crow = out.row(i);
  if (!accumulate) std::memset(crow, 0, sizeof(double) * static_cast<size_t>(out.cols));
  const double* arow = a.row(i);
  for (int k = 0; k < a.cols; ++k) {
    const double aik = arow[k];
    const double* brow = b.row(k);
    for (int j = 0; j < out.cols; ++j) crow[j] += aik * brow[j];
  }
}

// out(r, :) for out = a^T * b: sum over rows i of a(i, r) * b(i, :).
inline void matmul_tn_row(const Matrix& a, const Matrix& b, Matrix& out, int r, bool accumulate) {
  double* crow = out.row(r);
  if (!accumulate) std::memset(crow, 0, sizeof(double) * static_cast<size_t>(out.cols));
  for (int i = 0; i < a.rows; ++i) {
    const double air = a.at(i, r);
    const double* brow = b.row(i);
    for (int j = 0; j < out.cols; ++j) crow[j] += air * brow[j];
  }
}

inline void matmul_nt_row(const Matrix& a, const Matrix& b, Matrix& out, int i, bool accumulate) {
  const double* arow = a.row(i);
  double* crow = out.row(i);
  for (int j = 0; j < b.rows; ++j) {
    const double* brow = b.row(j);
    double acc = 0.0;
    for (int k = 0; k < a.cols; ++k) acc += arow[k] * brow[k];
    if (accumulate) crow[j] += acc; else crow[j] = acc;
  }
}

inline void softmax_row(Matrix& m, int i) {
  double* r = m.row(i);
  double mx = r[0];
  for (int j = 1; j < m.cols; ++j) mx = std::max(mx, r[j]);
  double sum = 0.0;
  for (int j = 0; j < m.cols; ++j) {
    r[j] = std::exp(r[j] - mx);
    sum += r[j];
  }
  const double inv = 1.0 / sum;
  for (int j = 0; j < m.cols; ++j) r[j] *= inv;
}

}  // namespace

void set_max_threads(int n) {
  g_max_threads.store(n < 1 ? 1 : n, std::memory_order_relaxed);
#ifdef _OPENMP
  omp_set_num_threads(n < 1 ? 1 : n);
#endif
}

int max_threads() { return g_max_threads.load(std::memory_order_relaxed); }

void matmul_serial(const Matrix& a, const Matrix& b, Matrix& out, bool accumulate) {
  assert(a.cols == b.rows && out.rows == a.rows && out.cols == b.cols);
  for (int i = 0; i < a.rows; ++i) matmul_row(a, b, out, i, accumulate);
}

void matmul_omp(const Matrix& a, const Matrix& b, Matrix& out, bool accumulate) {
  assert(a.cols == b.rows && out.rows == a.rows && out.cols == b.cols);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < a.rows; ++i) matmul_row(a, b, out, i, accumulate);
}

void matmul(const Matrix& a, const Matrix& b, Matrix& out, bool accumulate) {
  const size_t flops = static_cast<size_t>(a.rows) * a.cols * b.cols;
  if (go_parallel(flops)) matmul_omp(a, b, out, accumulate);
  else matmul_serial(a, b, out, accumulate);
}

void matmul_tn_serial(const Matrix& a, const Matrix& b, Matrix& out, bool accumulate) {
  assert(a.rows == b.rows && out.rows == a.cols && out.cols == b.cols);
  for (int r = 0; r < a.cols; ++r) matmul_tn_row(a, b, out, r, accumulate);
}

void matmul_tn_omp(const Matrix& a, const Matrix& b, Matrix& out, bool accumulate) {
  assert(a.rows == b.rows && out.rows == a.cols && out.cols == b.cols);
#pragma omp parallel for schedule(static)
  for (int r = 0; r < a.cols; ++r) matmul_tn_row(a, b, out, r, accumulate);
}

void matmul_tn(const Matrix& a, const Matrix& b, Matrix& out, bool accumulate) {
  const size_t flops = static_cast<size_t>(a.rows) * a.cols * b.cols;
  if (go_parallel(flops)) matmul_tn_omp(a, b, out, accumulate);
  else matmul_tn_serial(a, b, out, accumulate);
}

void matmul_nt_serial(const Matrix& a, const Matrix& b, Matrix& out, bool accumulate) {
  assert(a.cols == b.cols && out.rows == a.rows && out.cols == b.rows);
  for (int i = 0; i < a.rows; ++i) matmul_nt_row(a, b, out, i, accumulate);
}

void matmul_nt_omp(const Matrix& a, const Matrix& b, Matrix& out, bool accumulate) {
  assert(a.cols == b.cols && out.rows == a.rows && out.cols == b.rows);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < a.rows; ++i) matmul_nt_row(a, b, out, i, accumulate);
}

void matmul_nt(const Matrix& a, const Matrix& b, Matrix& out, bool accumulate) {
  const size_t flops = static_cast<size_t>(a.rows) * a.cols * b.rows;
  if (go_parallel(flops)) matmul_nt_omp(a, b, out, accumulate);
  else matmul_nt_serial(a, b, out, accumulate);
}

void softmax_rows_serial(Matrix& m) {
  for (int i = 0; i < m.rows; ++i) softmax_row(m, i);
}

void softmax_rows_omp(Matrix& m) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m.rows; ++i) softmax_row(m, i);
}

void softmax_rows(Matrix& m) {
  const size_t work = static_cast<size_t>(m.rows) * m.cols * 8;
  if (go_parallel(work)) softmax_rows_omp(m);
  else softmax_rows_serial(m);
}

}  // namespace advae::kernels

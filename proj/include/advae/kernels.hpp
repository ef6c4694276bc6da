#pragma once

#include "advae/matrix.hpp"

// Hot inner loops, each in two builds: a serial reference and an OpenMP
// version parallelized over independent output rows. Both walk every output
// element with the same per-element operation order, so results are
// bit-identical and the serial build doubles as the test oracle.
// Dispatching wrappers pick the OpenMP path when the thread budget is > 1
// and the problem is large enough to amortize the fork.

namespace advae::kernels {

// Global thread budget. 1 selects the serial reference everywhere.
void set_max_threads(int n);
int max_threads();

// out = a * b. With accumulate, adds into out instead of overwriting.
void matmul_serial(const Matrix& a, const Matrix& b, Matrix& out, bool accumulate = false);
void matmul_omp(const Matrix& a, const Matrix& b, Matrix& out, bool accumulate = false);
void matmul(const Matrix& a, const Matrix& b, Matrix& out, bool accumulate = false);

// out = a^T * b
void matmul_tn_serial(const Matrix& a, const Matrix& b, Matrix& out, bool accumulate = false);
void matmul_tn_omp(const Matrix& a, const Matrix& b, Matrix& out, bool accumulate = false);
void matmul_tn(const Matrix& a, const Matrix& b, Matrix& out, bool accumulate = false);

// out = a * b^T
void matmul_nt_serial(const Matrix& a, const Matrix& b, Matrix& out, bool accumulate = false);
void matmul_nt_omp(const Matrix& a, const Matrix& b, Matrix& out, bool accumulate = false);
void matmul_nt(const Matrix& a, const Matrix& b, Matrix& out, bool accumulate = false);

// In-place row-wise softmax with max subtraction. Rows are independent.
void softmax_rows_serial(Matrix& m);
void softmax_rows_omp(Matrix& m);
void softmax_rows(Matrix& m);

}  // namespace advae::kernels

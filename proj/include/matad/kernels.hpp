#pragma once

#include "matad/matrix.hpp"

// Dense kernels used by the tape and the cells. The default entry points are
// OpenMP-parallel above a size threshold; matad::kernels::serial holds plain
// triple-loop versions that tests use as oracles and the bench tool uses as
// the baseline. Per-element accumulation order is ascending in k in both
// variants, so results agree to rounding regardless of thread count.
namespace matad::kernels {

// out = a * b
void matmul(const Matrix& a, const Matrix& b, Matrix& out);
// out = a^T * b
void matmul_tn(const Matrix& a, const Matrix& b, Matrix& out);
// out = a * b^T
void matmul_nt(const Matrix& a, const Matrix& b, Matrix& out);

void add(const Matrix& a, const Matrix& b, Matrix& out);
void sub(const Matrix& a, const Matrix& b, Matrix& out);
void hadamard(const Matrix& a, const Matrix& b, Matrix& out);
void sigmoid(const Matrix& a, Matrix& out);
void tanh(const Matrix& a, Matrix& out);
void scale(const Matrix& a, double factor, Matrix& out);

// y += alpha * x
void axpy(double alpha, const Matrix& x, Matrix& y);
// y += g ⊙ h
void hadamard_accum(const Matrix& g, const Matrix& h, Matrix& y);

double sum(const Matrix& a);
double squared_norm(const Matrix& a);

namespace serial {
void matmul(const Matrix& a, const Matrix& b, Matrix& out);
void matmul_tn(const Matrix& a, const Matrix& b, Matrix& out);
void matmul_nt(const Matrix& a, const Matrix& b, Matrix& out);
}  // namespace serial

}  // namespace matad::kernels

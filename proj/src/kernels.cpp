#include "matad/kernels.hpp"

#include <cmath>

namespace matad::kernels {

namespace {

// Below this many multiply-adds a parallel region costs more than it saves.
constexpr long kParallelFlops = 1 << 16;

void resize_out(Matrix& out, int r, int c) {
    out.rows = r;
    out.cols = c;
    out.data.assign(static_cast<size_t>(r) * c, 0.0);
}

}  // namespace

void matmul(const Matrix& a, const Matrix& b, Matrix& out) {
    if (a.cols != b.rows)
        throw ShapeError("matmul: " + a.shape_str() + " * " + b.shape_str());
    const int m = a.rows, k = a.cols, n = b.cols;
    resize_out(out, m, n);
    const double* A = a.data.data();
    const double* B = b.data.data();
    double* C = out.data.data();
    const long flops = static_cast<long>(m) * k * n;
#pragma omp parallel for schedule(static) if (flops >= kParallelFlops)
    for (int i = 0; i < m; ++i) {
        double* crow = C + static_cast<size_t>(i) * n;
        for (int p = 0; p < k; ++p) {
            const double aip = A[static_cast<size_t>(i) * k + p];
            const double* brow = B + static_cast<size_t>(p) * n;
            for (int j = 0; j < n; ++j) crow[j] += aip * brow[j];
        }
    }
}

void matmul_tn(const Matrix& a, const Matrix& b, Matrix& out) {
    if (a.rows != b.rows)
        throw ShapeError("matmul_tn: " + a.shape_str() + "^T * " + b.shape_str());
    const int m = a.cols, k = a.rows, n = b.cols;
    resize_out(out, m, n);
    const double* A = a.data.data();
    const double* B = b.data.data();
    double* C = out.data.data();
    const long flops = static_cast<long>(m) * k * n;
#pragma omp parallel for schedule(static) if (flops >= kParallelFlops)
    for (int i = 0; i < m; ++i) {
        double* crow = C + static_cast<size_t>(i) * n;
        for (int p = 0; p < k; ++p) {
            const double api = A[static_cast<size_t>(p) * m + i];
            const double* brow = B + static_cast<size_t>(p) * n;
            for (int j = 0; j < n; ++j) crow[j] += api * brow[j];
        }
    }
}

void matmul_nt(const Matrix& a, const Matrix& b, Matrix& out) {
    if (a.cols != b.cols)
        throw ShapeError("matmul_nt: " + a.shape_str() + " * " + b.shape_str() + "^T");
    const int m = a.rows, k = a.cols, n = b.rows;
    resize_out(out, m, n);
    const double* A = a.data.data();
    const double* B = b.data.data();
    double* C = out.data.data();
    const long flops = static_cast<long>(m) * k * n;
#pragma omp parallel for schedule(static) if (flops >= kParallelFlops)
    for (int i = 0; i < m; ++i) {
        const double* arow = A + static_cast<size_t>(i) * k;
        double* crow = C + static_cast<size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            const double* brow = B + static_cast<size_t>(j) * k;
            double acc = 0.0;
            for (int p = 0; p < k; ++p) acc += arow[p] * brow[p];
            crow[j] = acc;
        }
    }
}

void add(const Matrix& a, const Matrix& b, Matrix& out) {
    require_same_shape(a, b, "add");
    resize_out(out, a.rows, a.cols);
    const size_t n = a.data.size();
    for (size_t i = 0; i < n; ++i) out.data[i] = a.data[i] + b.data[i];
}

void sub(const Matrix& a, const Matrix& b, Matrix& out) {
    require_same_shape(a, b, "sub");
    resize_out(out, a.rows, a.cols);
    const size_t n = a.data.size();
    for (size_t i = 0; i < n; ++i) out.data[i] = a.data[i] - b.data[i];
}

void hadamard(const Matrix& a, const Matrix& b, Matrix& out) {
    require_same_shape(a, b, "hadamard");
    resize_out(out, a.rows, a.cols);
    const size_t n = a.data.size();
    for (size_t i = 0; i < n; ++i) out.data[i] = a.data[i] * b.data[i];
}

void sigmoid(const Matrix& a, Matrix& out) {
    resize_out(out, a.rows, a.cols);
    const size_t n = a.data.size();
    for (size_t i = 0; i < n; ++i) {
        const double x = a.data[i];
        // split on sign so exp never overflows
        out.data[i] = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
    }
}

void tanh(const Matrix& a, Matrix& out) {
    resize_out(out, a.rows, a.cols);
    const size_t n = a.data.size();
    for (size_t i = 0; i < n; ++i) out.data[i] = std::tanh(a.data[i]);
}

void scale(const Matrix& a, double factor, Matrix& out) {
    resize_out(out, a.rows, a.cols);
    const size_t n = a.data.size();
    for (size_t i = 0; i < n; ++i) out.data[i] = factor * a.data[i];
}

void axpy(double alpha, const Matrix& x, Matrix& y) {
    require_same_shape(x, y, "axpy");
    const size_t n = x.data.size();
    for (size_t i = 0; i < n; ++i) y.data[i] += alpha * x.data[i];
}

void hadamard_accum(const Matrix& g, const Matrix& h, Matrix& y) {
    require_same_shape(g, h, "hadamard_accum");
    require_same_shape(g, y, "hadamard_accum");
    const size_t n = g.data.size();
    for (size_t i = 0; i < n; ++i) y.data[i] += g.data[i] * h.data[i];
}

double sum(const Matrix& a) {
    double acc = 0.0;
    for (double v : a.data) acc += v;
    return acc;
}

double squared_norm(const Matrix& a) {
    double acc = 0.0;
    for (double v : a.data) acc += v * v;
    return acc;
}

namespace serial {

void matmul(const Matrix& a, const Matrix& b, Matrix& out) {
    if (a.cols != b.rows)
        throw ShapeError("serial matmul: " + a.shape_str() + " * " + b.shape_str());
    resize_out(out, a.rows, b.cols);
    for (int i = 0; i < a.rows; ++i)
        for (int j = 0; j < b.cols; ++j) {
            double acc = 0.0;
            for (int p = 0; p < a.cols; ++p) acc += a(i, p) * b(p, j);
            out(i, j) = acc;
        }
}

void matmul_tn(const Matrix& a, const Matrix& b, Matrix& out) {
    if (a.rows != b.rows)
        throw ShapeError("serial matmul_tn: " + a.shape_str() + "^T * " + b.shape_str());
    resize_out(out, a.cols, b.cols);
    for (int i = 0; i < a.cols; ++i)
        for (int j = 0; j < b.cols; ++j) {
            double acc = 0.0;
            for (int p = 0; p < a.rows; ++p) acc += a(p, i) * b(p, j);
            out(i, j) = acc;
        }
}

void matmul_nt(const Matrix& a, const Matrix& b, Matrix& out) {
    if (a.cols != b.cols)
        throw ShapeError("serial matmul_nt: " + a.shape_str() + " * " + b.shape_str() + "^T");
    resize_out(out, a.rows, b.rows);
    for (int i = 0; i < a.rows; ++i)
        for (int j = 0; j < b.rows; ++j) {
            double acc = 0.0;
            for (int p = 0; p < a.cols; ++p) acc += a(i, p) * b(j, p);
            out(i, j) = acc;
        }
}

}  // namespace serial

}  // namespace matad::kernels

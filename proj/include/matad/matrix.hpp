#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

#include "matad/errors.hpp"

namespace matad {

// Dense row-major matrix of doubles. Values are plain data; all math lives
// in matad::kernels and on the matgrad tape.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(int r, int c, double fill = 0.0) : rows(r), cols(c), data(static_cast<size_t>(r) * c, fill) {
        if (r < 0 || c < 0) throw ContractError("matrix dims must be non-negative");
    }

    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows_init) {
        const int r = static_cast<int>(rows_init.size());
        const int c = r > 0 ? static_cast<int>(rows_init.begin()->size()) : 0;
        Matrix m(r, c);
        int i = 0;
        for (const auto& row : rows_init) {
            if (static_cast<int>(row.size()) != c) throw ShapeError("ragged initializer rows");
            int j = 0;
            for (double v : row) m(i, j++) = v;
            ++i;
        }
        return m;
    }

    double& operator()(int i, int j) { return data[static_cast<size_t>(i) * cols + j]; }
    double operator()(int i, int j) const { return data[static_cast<size_t>(i) * cols + j]; }

    int size() const { return rows * cols; }
    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
    bool empty() const { return rows == 0 || cols == 0; }

    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }

    std::string shape_str() const { return std::to_string(rows) + "x" + std::to_string(cols); }
};

inline void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
    if (!a.same_shape(b))
        throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " + b.shape_str());
}

}  // namespace matad

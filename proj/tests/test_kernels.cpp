#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "matad/kernels.hpp"

using matad::Matrix;
namespace kernels = matad::kernels;

namespace {

Matrix random_matrix(int r, int c, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(-2.0, 2.0);
    Matrix m(r, c);
    for (double& v : m.data) v = dist(rng);
    return m;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
    REQUIRE(a.same_shape(b));
    double d = 0.0;
    for (int i = 0; i < a.size(); ++i) d = std::max(d, std::fabs(a.data[i] - b.data[i]));
    return d;
}

}  // namespace

TEST_CASE("matmul identity and hand cases") {
    Matrix eye = Matrix::from_rows({{1, 0}, {0, 1}});
    Matrix a = Matrix::from_rows({{1, 2}, {3, 4}});
    Matrix out;
    kernels::matmul(eye, a, out);
    CHECK(max_abs_diff(out, a) == 0.0);

    Matrix row = Matrix::from_rows({{1, 2}});
    Matrix col = Matrix::from_rows({{3}, {4}});
    kernels::matmul(row, col, out);
    CHECK(out.rows == 1);
    CHECK(out.cols == 1);
    CHECK(out(0, 0) == doctest::Approx(11.0));
}

TEST_CASE("matmul matches triple-loop oracle on random shapes") {
    std::mt19937_64 rng(7);
    Matrix a = random_matrix(4, 3, rng);
    Matrix b = random_matrix(3, 5, rng);
    Matrix fast, ref;
    kernels::matmul(a, b, fast);
    kernels::serial::matmul(a, b, ref);
    CHECK(max_abs_diff(fast, ref) < 1e-12);
}

TEST_CASE("parallel and serial matmul variants agree across shapes") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        std::uniform_int_distribution<int> dim(1, 40);
        const int m = dim(rng), k = dim(rng), n = dim(rng);
        Matrix a = random_matrix(m, k, rng);
        Matrix b = random_matrix(k, n, rng);
        Matrix fast, ref;
        kernels::matmul(a, b, fast);
        kernels::serial::matmul(a, b, ref);
        CHECK(max_abs_diff(fast, ref) < 1e-12);

        Matrix at = random_matrix(k, m, rng);
        kernels::matmul_tn(at, b, fast);
        kernels::serial::matmul_tn(at, b, ref);
        CHECK(max_abs_diff(fast, ref) < 1e-12);

        Matrix bt = random_matrix(n, k, rng);
        kernels::matmul_nt(a, bt, fast);
        kernels::serial::matmul_nt(a, bt, ref);
        CHECK(max_abs_diff(fast, ref) < 1e-12);
    }
    // one big instance so the OpenMP path actually engages
    Matrix a = random_matrix(180, 90, rng);
    Matrix b = random_matrix(90, 120, rng);
    Matrix fast, ref;
    kernels::matmul(a, b, fast);
    kernels::serial::matmul(a, b, ref);
    CHECK(max_abs_diff(fast, ref) < 1e-10);
}

TEST_CASE("elementwise kernels") {
    Matrix z(2, 3, 0.0);
    Matrix out;
    kernels::sigmoid(z, out);
    for (double v : out.data) CHECK(v == doctest::Approx(0.5));
    kernels::tanh(z, out);
    for (double v : out.data) CHECK(v == 0.0);

    Matrix a = Matrix::from_rows({{1, 2}, {3, 4}});
    Matrix b = Matrix::from_rows({{2, 0}, {0, 2}});
    kernels::hadamard(a, b, out);
    CHECK(max_abs_diff(out, Matrix::from_rows({{2, 0}, {0, 8}})) == 0.0);

    kernels::add(a, b, out);
    CHECK(max_abs_diff(out, Matrix::from_rows({{3, 2}, {3, 6}})) == 0.0);
    kernels::sub(a, b, out);
    CHECK(max_abs_diff(out, Matrix::from_rows({{-1, 2}, {3, 2}})) == 0.0);
}

TEST_CASE("sigmoid saturates without overflow") {
    Matrix big = Matrix::from_rows({{800.0, -800.0}});
    Matrix out;
    kernels::sigmoid(big, out);
    CHECK(out(0, 0) == doctest::Approx(1.0));
    CHECK(out(0, 1) == doctest::Approx(0.0));
    CHECK(out.all_finite());
}

TEST_CASE("shape mismatches throw") {
    Matrix a(2, 3), b(4, 5), out;
    CHECK_THROWS_AS(kernels::matmul(a, b, out), matad::ShapeError);
    CHECK_THROWS_AS(kernels::add(a, b, out), matad::ShapeError);
    CHECK_THROWS_AS(kernels::hadamard(a, b, out), matad::ShapeError);
}

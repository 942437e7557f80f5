#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <numeric>
#include <random>

#include "matad/cells.hpp"
#include "matad/kernels.hpp"

using matad::Matrix;
using matad::NodeId;
using matad::Tape;
namespace cells = matad::cells;

namespace {

Matrix random_matrix(int r, int c, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> dist(lo, hi);
    Matrix m(r, c);
    for (double& v : m.data) v = dist(rng);
    return m;
}

Matrix identity(int n) {
    Matrix m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
    REQUIRE(a.same_shape(b));
    double d = 0.0;
    for (int i = 0; i < a.size(); ++i) d = std::max(d, std::fabs(a.data[i] - b.data[i]));
    return d;
}

// Element-index oracle for mat(): out[i][j] = sum_{a,b} u_xh[a][i] x[a][b] v_xh[b][j]
//                                           + sum_{a,b} u_hh[a][i] h[a][b] v_hh[b][j] + b[i][j]
Matrix mat_op_oracle(const Matrix& x, const Matrix& h, const cells::MatGateParams& g) {
    const int k_r = g.u_xh.cols, k_c = g.v_xh.cols;
    Matrix out(k_r, k_c);
    for (int i = 0; i < k_r; ++i)
        for (int j = 0; j < k_c; ++j) {
            double acc = g.b(i, j);
            for (int a = 0; a < x.rows; ++a)
                for (int b = 0; b < x.cols; ++b) acc += g.u_xh(a, i) * x(a, b) * g.v_xh(b, j);
            for (int a = 0; a < h.rows; ++a)
                for (int b = 0; b < h.cols; ++b) acc += g.u_hh(a, i) * h(a, b) * g.v_hh(b, j);
            out(i, j) = acc;
        }
    return out;
}

Matrix run_mat_op(const Matrix& x, const Matrix& h, const cells::MatGateParams& g) {
    Tape t;
    auto gn = cells::bind(t, g);
    return t.value(cells::mat_op(t, t.input(x), t.input(h), gn));
}

cells::MatState run_matlstm_step(const Matrix& x, const cells::MatState& prev,
                                 const cells::MatLstmParams& p) {
    Tape t;
    auto pn = cells::bind(t, p);
    auto out = cells::matlstm_step(t, t.input(x), {t.input(prev.h), t.input(prev.c)}, pn);
    return {t.value(out.h), t.value(out.c)};
}

// Independent re-implementation of the step with plain matrix calls.
cells::MatState matlstm_step_oracle(const Matrix& x, const cells::MatState& prev,
                                    const cells::MatLstmParams& p) {
    namespace sk = matad::kernels::serial;
    auto mat = [&](const cells::MatGateParams& g) {
        Matrix xv, uxv, hv, uhv, out;
        sk::matmul(x, g.v_xh, xv);
        sk::matmul_tn(g.u_xh, xv, uxv);
        sk::matmul(prev.h, g.v_hh, hv);
        sk::matmul_tn(g.u_hh, hv, uhv);
        out = uxv;
        for (int i = 0; i < out.size(); ++i) out.data[i] += uhv.data[i] + g.b.data[i];
        return out;
    };
    auto sig = [](Matrix m) {
        for (double& v : m.data) v = 1.0 / (1.0 + std::exp(-v));
        return m;
    };
    Matrix i = sig(mat(p.input_gate));
    Matrix f = sig(mat(p.forget_gate));
    Matrix o = sig(mat(p.output_gate));
    Matrix chat = mat(p.candidate);
    for (double& v : chat.data) v = std::tanh(v);
    cells::MatState s;
    s.c = Matrix(i.rows, i.cols);
    s.h = Matrix(i.rows, i.cols);
    for (int k = 0; k < i.size(); ++k) {
        s.c.data[k] = f.data[k] * prev.c.data[k] + i.data[k] * chat.data[k];
        s.h.data[k] = o.data[k] * s.c.data[k];
    }
    return s;
}

cells::MatLstmParams zero_matlstm(int n_r, int n_c, int k_r, int k_c) {
    std::mt19937_64 rng(0);
    auto p = cells::init_matlstm(n_r, n_c, k_r, k_c, rng);
    cells::visit_params(p, [](Matrix& m) { std::fill(m.data.begin(), m.data.end(), 0.0); });
    return p;
}

}  // namespace

TEST_CASE("mat_op with zero inputs returns the bias") {
    std::mt19937_64 rng(1);
    auto g = cells::init_mat_gate(3, 4, 2, 2, rng, 0.0);
    g.b = random_matrix(2, 2, rng);
    Matrix out = run_mat_op(Matrix(3, 4, 0.0), Matrix(2, 2, 0.0), g);
    CHECK(max_abs_diff(out, g.b) == 0.0);
}

TEST_CASE("mat_op with identity factors and zero bias is X + H") {
    std::mt19937_64 rng(2);
    cells::MatGateParams g;
    g.u_xh = identity(3);
    g.v_xh = identity(3);
    g.u_hh = identity(3);
    g.v_hh = identity(3);
    g.b = Matrix(3, 3, 0.0);
    Matrix x = random_matrix(3, 3, rng);
    Matrix h = random_matrix(3, 3, rng);
    Matrix expect(3, 3);
    for (int i = 0; i < 9; ++i) expect.data[i] = x.data[i] + h.data[i];
    CHECK(max_abs_diff(run_mat_op(x, h, g), expect) < 1e-15);
}

TEST_CASE("mat_op matches the quadruple-loop oracle") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 10; ++trial) {
        auto g = cells::init_mat_gate(3, 4, 2, 2, rng, 0.0);
        g.b = random_matrix(2, 2, rng);
        Matrix x = random_matrix(3, 4, rng);
        Matrix h = random_matrix(2, 2, rng);
        CHECK(max_abs_diff(run_mat_op(x, h, g), mat_op_oracle(x, h, g)) < 1e-12);
    }
}

TEST_CASE("mat_op row/column permutation can be absorbed into the factors") {
    std::mt19937_64 rng(4);
    const int n_r = 5, n_c = 6, k_r = 3, k_c = 2;
    auto g = cells::init_mat_gate(n_r, n_c, k_r, k_c, rng, 0.0);
    Matrix x = random_matrix(n_r, n_c, rng);
    Matrix h = random_matrix(k_r, k_c, rng);

    std::vector<int> rp(n_r), cp(n_c);
    std::iota(rp.begin(), rp.end(), 0);
    std::iota(cp.begin(), cp.end(), 0);
    std::shuffle(rp.begin(), rp.end(), rng);
    std::shuffle(cp.begin(), cp.end(), rng);

    // x' = P x Q with P permuting rows (row i of x' is row rp[i] of x) and Q
    // permuting columns (col j of x' is col cp[j] of x).
    Matrix xp(n_r, n_c);
    for (int i = 0; i < n_r; ++i)
        for (int j = 0; j < n_c; ++j) xp(i, j) = x(rp[i], cp[j]);

    // absorb: u' rows follow P, v' rows follow Q
    auto gp = g;
    for (int i = 0; i < n_r; ++i)
        for (int j = 0; j < k_r; ++j) gp.u_xh(i, j) = g.u_xh(rp[i], j);
    for (int i = 0; i < n_c; ++i)
        for (int j = 0; j < k_c; ++j) gp.v_xh(i, j) = g.v_xh(cp[i], j);

    CHECK(max_abs_diff(run_mat_op(xp, h, gp), run_mat_op(x, h, g)) < 1e-12);
}

TEST_CASE("matlstm_step with all-zero parameters") {
    auto p = zero_matlstm(3, 3, 2, 2);
    std::mt19937_64 rng(5);
    cells::MatState prev{random_matrix(2, 2, rng), random_matrix(2, 2, rng)};
    auto s = run_matlstm_step(random_matrix(3, 3, rng), prev, p);
    for (int i = 0; i < 4; ++i) {
        CHECK(s.c.data[i] == doctest::Approx(0.5 * prev.c.data[i]).epsilon(1e-15));
        CHECK(s.h.data[i] == doctest::Approx(0.25 * prev.c.data[i]).epsilon(1e-15));
    }
}

TEST_CASE("matlstm_step with forced forget=1 input=0 retains memory") {
    auto p = zero_matlstm(3, 3, 2, 2);
    std::fill(p.forget_gate.b.data.begin(), p.forget_gate.b.data.end(), 30.0);
    std::fill(p.input_gate.b.data.begin(), p.input_gate.b.data.end(), -30.0);
    std::mt19937_64 rng(6);
    cells::MatState prev{random_matrix(2, 2, rng), random_matrix(2, 2, rng)};
    auto s = run_matlstm_step(random_matrix(3, 3, rng), prev, p);
    CHECK(max_abs_diff(s.c, prev.c) < 1e-8);
}

TEST_CASE("matlstm_step matches an independently coded oracle") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 10; ++trial) {
        auto p = cells::init_matlstm(4, 3, 2, 3, rng);
        cells::MatState prev{random_matrix(2, 3, rng), random_matrix(2, 3, rng)};
        Matrix x = random_matrix(4, 3, rng);
        auto got = run_matlstm_step(x, prev, p);
        auto want = matlstm_step_oracle(x, prev, p);
        CHECK(max_abs_diff(got.h, want.h) < 1e-12);
        CHECK(max_abs_diff(got.c, want.c) < 1e-12);
    }
}

// With independent input/forget gates, |C_t| < |C_{t-1}| + 1 is the bound the
// update equations actually guarantee (F+I can exceed 1, so C may drift past
// the unit box); |H_t| < |C_t| holds since the output gate is in (0,1), and
// the very first step from a zero state stays inside the unit box.
TEST_CASE("matlstm state bounds over random rollouts") {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 5; ++trial) {
        auto p = cells::init_matlstm(5, 5, 3, 3, rng);
        Tape t;
        auto pn = cells::bind(t, p);
        auto state = cells::zero_state(t, 3, 3);
        Matrix prev_c(3, 3, 0.0);
        for (int step = 0; step < 8; ++step) {
            state = cells::matlstm_step(t, t.input(random_matrix(5, 5, rng)), state, pn);
            const Matrix& c = t.value(state.c);
            const Matrix& h = t.value(state.h);
            for (int i = 0; i < c.size(); ++i) {
                CHECK(std::fabs(c.data[i]) < std::fabs(prev_c.data[i]) + 1.0);
                CHECK(std::fabs(h.data[i]) < std::fabs(c.data[i]) + 1e-15);
                if (step == 0) {
                    CHECK(std::fabs(c.data[i]) < 1.0);
                    CHECK(std::fabs(h.data[i]) < 1.0);
                }
            }
            prev_c = c;
        }
    }
}

TEST_CASE("lstm_step with all-zero parameters") {
    std::mt19937_64 rng(9);
    auto p = cells::init_veclstm(4, 3, rng);
    cells::visit_params(p, [](Matrix& m) { std::fill(m.data.begin(), m.data.end(), 0.0); });
    Matrix c_prev = random_matrix(3, 1, rng);
    Tape t;
    auto pn = cells::bind(t, p);
    auto s = cells::lstm_step(t, t.input(random_matrix(4, 1, rng)),
                              {t.input(random_matrix(3, 1, rng)), t.input(c_prev)}, pn);
    for (int i = 0; i < 3; ++i) {
        CHECK(t.value(s.c).data[i] == doctest::Approx(0.5 * c_prev.data[i]).epsilon(1e-15));
        CHECK(t.value(s.h).data[i] == doctest::Approx(0.25 * c_prev.data[i]).epsilon(1e-15));
    }
}

TEST_CASE("lstm_step single unit hand computation") {
    cells::VecLstmParams p;
    p.input_gate = {Matrix(1, 1, 0.5), Matrix(1, 1, 0.1), Matrix(1, 1, 0.0)};
    p.forget_gate = {Matrix(1, 1, -0.3), Matrix(1, 1, 0.4), Matrix(1, 1, 1.0)};
    p.output_gate = {Matrix(1, 1, 0.2), Matrix(1, 1, -0.2), Matrix(1, 1, -0.1)};
    p.candidate = {Matrix(1, 1, 0.7), Matrix(1, 1, 0.3), Matrix(1, 1, 0.2)};
    Tape t;
    auto pn = cells::bind(t, p);
    auto s = cells::lstm_step(t, t.input(Matrix(1, 1, 0.5)),
                              {t.input(Matrix(1, 1, 0.3)), t.input(Matrix(1, 1, -0.4))}, pn);
    CHECK(t.value(s.c).data[0] == doctest::Approx(0.031688608112597157).epsilon(1e-14));
    CHECK(t.value(s.h).data[0] == doctest::Approx(0.015369117482029277).epsilon(1e-14));
}

TEST_CASE("lstm gradient over 3 steps passes finite differences") {
    std::mt19937_64 rng(10);
    auto p = cells::init_veclstm(3, 4, rng);
    std::vector<Matrix> xs{random_matrix(3, 1, rng), random_matrix(3, 1, rng), random_matrix(3, 1, rng)};
    Matrix target = random_matrix(4, 1, rng);

    std::vector<Matrix*> params;
    cells::visit_params(p, [&params](Matrix& m) { params.push_back(&m); });
    auto build = [&](Tape& t, const std::vector<NodeId>& ids) {
        cells::VecLstmNodes pn;
        size_t k = 0;
        auto gate = [&]() {
            cells::VecGateNodes g{ids[k], ids[k + 1], ids[k + 2]};
            k += 3;
            return g;
        };
        pn.input_gate = gate();
        pn.forget_gate = gate();
        pn.output_gate = gate();
        pn.candidate = gate();
        auto s = cells::zero_state(t, 4, 1);
        for (const auto& x : xs) s = cells::lstm_step(t, t.input(x), s, pn);
        return t.frobenius_mse(t.input(target), s.h);
    };
    auto res = matad::matgrad::grad_check(build, params, 1e-5);
    CHECK(res.max_rel_error < 1e-4);
}

TEST_CASE("matlstm gradient over 3 steps passes finite differences") {
    std::mt19937_64 rng(11);
    auto p = cells::init_matlstm(4, 5, 2, 3, rng);
    std::vector<Matrix> xs{random_matrix(4, 5, rng), random_matrix(4, 5, rng), random_matrix(4, 5, rng)};
    Matrix target = random_matrix(2, 3, rng);

    std::vector<Matrix*> params;
    cells::visit_params(p, [&params](Matrix& m) { params.push_back(&m); });
    auto build = [&](Tape& t, const std::vector<NodeId>& ids) {
        cells::MatLstmNodes pn;
        size_t k = 0;
        auto gate = [&]() {
            cells::MatGateNodes g{ids[k], ids[k + 1], ids[k + 2], ids[k + 3], ids[k + 4]};
            k += 5;
            return g;
        };
        pn.input_gate = gate();
        pn.forget_gate = gate();
        pn.output_gate = gate();
        pn.candidate = gate();
        auto s = cells::zero_state(t, 2, 3);
        for (const auto& x : xs) s = cells::matlstm_step(t, t.input(x), s, pn);
        return t.frobenius_mse(t.input(target), s.h);
    };
    auto res = matad::matgrad::grad_check(build, params, 1e-5);
    CHECK(res.max_rel_error < 1e-4);
}

TEST_CASE("matnet identity layer reproduces its input") {
    cells::MatnetParams p;
    p.layers.push_back({identity(3), identity(3), Matrix(3, 3, 0.0), cells::Activation::kIdentity});
    std::mt19937_64 rng(12);
    Matrix h = random_matrix(3, 3, rng);
    Tape t;
    auto pn = cells::bind(t, p);
    Matrix out = t.value(cells::matnet_forward(t, t.input(h), pn, false, nullptr));
    CHECK(max_abs_diff(out, h) == 0.0);
}

TEST_CASE("matnet with dropout_rate 0 is identical in training and inference") {
    std::mt19937_64 rng(13);
    auto p = cells::init_matnet(3, 4, 5, 6, true, 0.0, rng);
    Matrix h = random_matrix(3, 4, rng);
    std::mt19937_64 drop_rng(99);
    Tape t1, t2;
    Matrix train_out = t1.value(
        cells::matnet_forward(t1, t1.input(h), cells::bind(t1, p), true, &drop_rng));
    Matrix infer_out = t2.value(
        cells::matnet_forward(t2, t2.input(h), cells::bind(t2, p), false, nullptr));
    CHECK(max_abs_diff(train_out, infer_out) == 0.0);
}

TEST_CASE("matnet two random layers match a loop oracle") {
    std::mt19937_64 rng(14);
    auto p = cells::init_matnet(3, 4, 5, 6, true, 0.0, rng);
    Matrix h = random_matrix(3, 4, rng);
    Tape t;
    Matrix out = t.value(cells::matnet_forward(t, t.input(h), cells::bind(t, p), false, nullptr));

    // oracle: z1 = tanh(U0 z V0 + B0), z2 = U1 z1 V1 + B1, all by index loops
    auto apply = [](const cells::MatnetLayer& l, const Matrix& z) {
        Matrix out(l.u.rows, l.v.cols, 0.0);
        for (int i = 0; i < l.u.rows; ++i)
            for (int j = 0; j < l.v.cols; ++j) {
                double acc = l.b(i, j);
                for (int a = 0; a < z.rows; ++a)
                    for (int b = 0; b < z.cols; ++b) acc += l.u(i, a) * z(a, b) * l.v(b, j);
                out(i, j) = acc;
            }
        if (l.act == cells::Activation::kTanh)
            for (double& v : out.data) v = std::tanh(v);
        return out;
    };
    Matrix want = apply(p.layers[1], apply(p.layers[0], h));
    CHECK(max_abs_diff(out, want) < 1e-12);
}

TEST_CASE("matnet single-layer head gradient check") {
    std::mt19937_64 rng(15);
    auto p = cells::init_matnet(3, 3, 4, 4, false, 0.0, rng);
    Matrix h = random_matrix(3, 3, rng);
    Matrix target = random_matrix(4, 4, rng);
    std::vector<Matrix*> params;
    cells::visit_params(p, [&params](Matrix& m) { params.push_back(&m); });
    auto build = [&](Tape& t, const std::vector<NodeId>& ids) {
        cells::MatnetNodes pn;
        pn.layers.push_back({ids[0], ids[1], ids[2], cells::Activation::kIdentity});
        return t.frobenius_mse(t.input(target),
                               cells::matnet_forward(t, t.input(h), pn, false, nullptr));
    };
    auto res = matad::matgrad::grad_check(build, params, 1e-5);
    CHECK(res.max_rel_error < 1e-5);
}

TEST_CASE("param_count counts every entry exactly") {
    std::mt19937_64 rng(16);
    auto cell = cells::init_matlstm(2, 2, 2, 2, rng);
    CHECK(cells::param_count(cell) == 80);  // 4 gates x 20
    auto head = cells::init_matnet(2, 2, 2, 2, false, 0.0, rng);
    CHECK(cells::param_count(head) == 12);  // U 4 + V 4 + B 4
    CHECK(cells::param_count(cell) + cells::param_count(head) == 92);

    // enumerate by hand and compare
    long n = 0;
    cells::visit_params(cell, [&n](const Matrix& m) { n += m.rows * m.cols; });
    CHECK(n == 80);

    cells::MatnetParams empty_head;
    CHECK(cells::param_count(empty_head) == 0);
}

TEST_CASE("bind order matches visit_params order") {
    std::mt19937_64 rng(17);
    auto p = cells::init_matlstm(3, 3, 2, 2, rng);
    Tape t;
    auto pn = cells::bind(t, p);
    std::vector<NodeId> flat{
        pn.input_gate.u_xh,  pn.input_gate.v_xh,  pn.input_gate.u_hh,  pn.input_gate.v_hh,  pn.input_gate.b,
        pn.forget_gate.u_xh, pn.forget_gate.v_xh, pn.forget_gate.u_hh, pn.forget_gate.v_hh, pn.forget_gate.b,
        pn.output_gate.u_xh, pn.output_gate.v_xh, pn.output_gate.u_hh, pn.output_gate.v_hh, pn.output_gate.b,
        pn.candidate.u_xh,   pn.candidate.v_xh,   pn.candidate.u_hh,   pn.candidate.v_hh,   pn.candidate.b};
    std::vector<const Matrix*> ptrs;
    cells::visit_params(p, [&ptrs](const Matrix& m) { ptrs.push_back(&m); });
    REQUIRE(flat.size() == ptrs.size());
    for (size_t i = 0; i < flat.size(); ++i) CHECK(&t.value(flat[i]) == ptrs[i]);
}

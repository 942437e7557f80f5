#include "matad/cells.hpp"

#include <cmath>

namespace matad::cells {

Matrix glorot(int rows, int cols, std::mt19937_64& rng) {
    const double bound = std::sqrt(6.0 / (rows + cols));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Matrix m(rows, cols);
    for (double& v : m.data) v = dist(rng);
    return m;
}

MatGateParams init_mat_gate(int n_r, int n_c, int k_r, int k_c, std::mt19937_64& rng, double bias_fill) {
    MatGateParams g;
    g.u_xh = glorot(n_r, k_r, rng);
    g.v_xh = glorot(n_c, k_c, rng);
    g.u_hh = glorot(k_r, k_r, rng);
    g.v_hh = glorot(k_c, k_c, rng);
    g.b = Matrix(k_r, k_c, bias_fill);
    return g;
}

MatLstmParams init_matlstm(int n_r, int n_c, int k_r, int k_c, std::mt19937_64& rng) {
    if (n_r <= 0 || n_c <= 0 || k_r <= 0 || k_c <= 0)
        throw ContractError("init_matlstm: dims must be positive");
    MatLstmParams p;
    p.input_gate = init_mat_gate(n_r, n_c, k_r, k_c, rng, 0.0);
    p.forget_gate = init_mat_gate(n_r, n_c, k_r, k_c, rng, 1.0);
    p.output_gate = init_mat_gate(n_r, n_c, k_r, k_c, rng, 0.0);
    p.candidate = init_mat_gate(n_r, n_c, k_r, k_c, rng, 0.0);
    return p;
}

MatnetParams init_matnet(int k_r, int k_c, int n_r, int n_c, bool with_hidden, double dropout_rate,
                         std::mt19937_64& rng) {
    MatnetParams p;
    p.dropout_rate = dropout_rate;
    if (with_hidden) {
        MatnetLayer hidden;
        hidden.u = glorot(k_r, k_r, rng);
        hidden.v = glorot(k_c, k_c, rng);
        hidden.b = Matrix(k_r, k_c, 0.0);
        hidden.act = Activation::kTanh;
        p.layers.push_back(std::move(hidden));
    }
    MatnetLayer out;
    out.u = glorot(n_r, k_r, rng);
    out.v = glorot(k_c, n_c, rng);
    out.b = Matrix(n_r, n_c, 0.0);
    out.act = Activation::kIdentity;
    p.layers.push_back(std::move(out));
    return p;
}

VecGateParams init_vec_gate(int input_dim, int k, std::mt19937_64& rng, double bias_fill) {
    VecGateParams g;
    g.w_x = glorot(k, input_dim, rng);
    g.w_h = glorot(k, k, rng);
    g.b = Matrix(k, 1, bias_fill);
    return g;
}

VecLstmParams init_veclstm(int input_dim, int k, std::mt19937_64& rng) {
    if (input_dim <= 0 || k <= 0) throw ContractError("init_veclstm: dims must be positive");
    VecLstmParams p;
    p.input_gate = init_vec_gate(input_dim, k, rng, 0.0);
    p.forget_gate = init_vec_gate(input_dim, k, rng, 1.0);
    p.output_gate = init_vec_gate(input_dim, k, rng, 0.0);
    p.candidate = init_vec_gate(input_dim, k, rng, 0.0);
    return p;
}

DenseHeadParams init_dense_head(int k, int output_dim, bool with_hidden, double dropout_rate,
                                std::mt19937_64& rng) {
    DenseHeadParams p;
    p.dropout_rate = dropout_rate;
    if (with_hidden) {
        DenseLayer hidden;
        hidden.w = glorot(k, k, rng);
        hidden.b = Matrix(k, 1, 0.0);
        hidden.act = Activation::kTanh;
        p.layers.push_back(std::move(hidden));
    }
    DenseLayer out;
    out.w = glorot(output_dim, k, rng);
    out.b = Matrix(output_dim, 1, 0.0);
    out.act = Activation::kIdentity;
    p.layers.push_back(std::move(out));
    return p;
}

MatGateNodes bind(Tape& t, const MatGateParams& p) {
    return {t.param(&p.u_xh), t.param(&p.v_xh), t.param(&p.u_hh), t.param(&p.v_hh), t.param(&p.b)};
}

MatLstmNodes bind(Tape& t, const MatLstmParams& p) {
    MatLstmNodes n;
    n.input_gate = bind(t, p.input_gate);
    n.forget_gate = bind(t, p.forget_gate);
    n.output_gate = bind(t, p.output_gate);
    n.candidate = bind(t, p.candidate);
    return n;
}

MatnetNodes bind(Tape& t, const MatnetParams& p) {
    MatnetNodes n;
    n.dropout_rate = p.dropout_rate;
    for (const auto& l : p.layers)
        n.layers.push_back({t.param(&l.u), t.param(&l.v), t.param(&l.b), l.act});
    return n;
}

VecGateNodes bind(Tape& t, const VecGateParams& p) {
    return {t.param(&p.w_x), t.param(&p.w_h), t.param(&p.b)};
}

VecLstmNodes bind(Tape& t, const VecLstmParams& p) {
    VecLstmNodes n;
    n.input_gate = bind(t, p.input_gate);
    n.forget_gate = bind(t, p.forget_gate);
    n.output_gate = bind(t, p.output_gate);
    n.candidate = bind(t, p.candidate);
    return n;
}

DenseHeadNodes bind(Tape& t, const DenseHeadParams& p) {
    DenseHeadNodes n;
    n.dropout_rate = p.dropout_rate;
    for (const auto& l : p.layers) n.layers.push_back({t.param(&l.w), t.param(&l.b), l.act});
    return n;
}

NodeId mat_op(Tape& t, NodeId x, NodeId h, const MatGateNodes& g) {
    NodeId xv = t.matmul(x, g.v_xh);
    NodeId uxv = t.matmul_tn(g.u_xh, xv);
    NodeId hv = t.matmul(h, g.v_hh);
    NodeId uhv = t.matmul_tn(g.u_hh, hv);
    return t.add(t.add(uxv, uhv), g.b);
}

MatStateNodes matlstm_step(Tape& t, NodeId x, MatStateNodes prev, const MatLstmNodes& p) {
    NodeId i = t.sigmoid(mat_op(t, x, prev.h, p.input_gate));
    NodeId f = t.sigmoid(mat_op(t, x, prev.h, p.forget_gate));
    NodeId o = t.sigmoid(mat_op(t, x, prev.h, p.output_gate));
    NodeId chat = t.tanh(mat_op(t, x, prev.h, p.candidate));
    NodeId c = t.add(t.hadamard(f, prev.c), t.hadamard(i, chat));
    NodeId h = t.hadamard(o, c);
    return {h, c};
}

namespace {

NodeId vec_gate(Tape& t, NodeId x, NodeId h, const VecGateNodes& g) {
    return t.add(t.add(t.matmul(g.w_x, x), t.matmul(g.w_h, h)), g.b);
}

// Inverted-dropout mask with entries 0 or 1/keep.
NodeId dropout_mask(Tape& t, int rows, int cols, double rate, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double keep = 1.0 - rate;
    Matrix m(rows, cols);
    for (double& v : m.data) v = u(rng) < rate ? 0.0 : 1.0 / keep;
    return t.input(std::move(m));
}

NodeId apply_activation(Tape& t, NodeId z, Activation act) {
    return act == Activation::kTanh ? t.tanh(z) : z;
}

}  // namespace

MatStateNodes lstm_step(Tape& t, NodeId x, MatStateNodes prev, const VecLstmNodes& p) {
    NodeId i = t.sigmoid(vec_gate(t, x, prev.h, p.input_gate));
    NodeId f = t.sigmoid(vec_gate(t, x, prev.h, p.forget_gate));
    NodeId o = t.sigmoid(vec_gate(t, x, prev.h, p.output_gate));
    NodeId chat = t.tanh(vec_gate(t, x, prev.h, p.candidate));
    NodeId c = t.add(t.hadamard(f, prev.c), t.hadamard(i, chat));
    NodeId h = t.hadamard(o, c);
    return {h, c};
}

NodeId matnet_forward(Tape& t, NodeId h, const MatnetNodes& p, bool training, std::mt19937_64* rng) {
    if (p.layers.empty()) throw ContractError("matnet_forward: no layers");
    NodeId z = h;
    for (size_t li = 0; li < p.layers.size(); ++li) {
        const auto& l = p.layers[li];
        z = apply_activation(t, t.add(t.matmul(t.matmul(l.u, z), l.v), l.b), l.act);
        const bool hidden = li + 1 < p.layers.size();
        if (hidden && training && p.dropout_rate > 0.0) {
            if (!rng) throw ContractError("matnet_forward: dropout needs an rng");
            const Matrix& zv = t.value(z);
            z = t.hadamard(z, dropout_mask(t, zv.rows, zv.cols, p.dropout_rate, *rng));
        }
    }
    return z;
}

NodeId dense_forward(Tape& t, NodeId h, const DenseHeadNodes& p, bool training, std::mt19937_64* rng) {
    if (p.layers.empty()) throw ContractError("dense_forward: no layers");
    NodeId z = h;
    for (size_t li = 0; li < p.layers.size(); ++li) {
        const auto& l = p.layers[li];
        z = apply_activation(t, t.add(t.matmul(l.w, z), l.b), l.act);
        const bool hidden = li + 1 < p.layers.size();
        if (hidden && training && p.dropout_rate > 0.0) {
            if (!rng) throw ContractError("dense_forward: dropout needs an rng");
            const Matrix& zv = t.value(z);
            z = t.hadamard(z, dropout_mask(t, zv.rows, zv.cols, p.dropout_rate, *rng));
        }
    }
    return z;
}

MatStateNodes zero_state(Tape& t, int k_r, int k_c) {
    NodeId h = t.input(Matrix(k_r, k_c, 0.0));
    NodeId c = t.input(Matrix(k_r, k_c, 0.0));
    return {h, c};
}

}  // namespace matad::cells

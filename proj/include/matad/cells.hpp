#pragma once

#include <random>
#include <vector>

#include "matad/tape.hpp"

namespace matad::cells {

using matgrad::NodeId;
using matgrad::Tape;

enum class Activation : uint8_t { kTanh, kIdentity };

// ---- parameter storage -------------------------------------------------
// One gate of the matrix LSTM: mat(X, H) = u_xh^T X v_xh + u_hh^T H v_hh + b
// with u_xh: n_r x k_r, v_xh: n_c x k_c, u_hh: k_r x k_r, v_hh: k_c x k_c,
// b: k_r x k_c.
struct MatGateParams {
    Matrix u_xh, v_xh, u_hh, v_hh, b;
};

struct MatLstmParams {
    MatGateParams input_gate, forget_gate, output_gate, candidate;
};

struct MatState {
    Matrix h, c;
};

// Bilinear feedforward layer z' = f(u z v + b); u: r_out x r_in,
// v: c_in x c_out, b: r_out x c_out.
struct MatnetLayer {
    Matrix u, v, b;
    Activation act = Activation::kIdentity;
};

struct MatnetParams {
    std::vector<MatnetLayer> layers;
    double dropout_rate = 0.0;  // applied to hidden layer outputs while training
};

// Vector LSTM over flattened frames; one gate holds w_x: k x d, w_h: k x k,
// b: k x 1.
struct VecGateParams {
    Matrix w_x, w_h, b;
};

struct VecLstmParams {
    VecGateParams input_gate, forget_gate, output_gate, candidate;
};

struct DenseLayer {
    Matrix w, b;
    Activation act = Activation::kIdentity;
};

struct DenseHeadParams {
    std::vector<DenseLayer> layers;
    double dropout_rate = 0.0;
};

// ---- parameter traversal -------------------------------------------------
// Fixed visiting order; binding and updates both rely on it.
template <class Fn> void visit_params(MatGateParams& g, Fn&& fn) {
    fn(g.u_xh); fn(g.v_xh); fn(g.u_hh); fn(g.v_hh); fn(g.b);
}
template <class Fn> void visit_params(MatLstmParams& p, Fn&& fn) {
    visit_params(p.input_gate, fn);
    visit_params(p.forget_gate, fn);
    visit_params(p.output_gate, fn);
    visit_params(p.candidate, fn);
}
template <class Fn> void visit_params(MatnetParams& p, Fn&& fn) {
    for (auto& l : p.layers) { fn(l.u); fn(l.v); fn(l.b); }
}
template <class Fn> void visit_params(VecGateParams& g, Fn&& fn) {
    fn(g.w_x); fn(g.w_h); fn(g.b);
}
template <class Fn> void visit_params(VecLstmParams& p, Fn&& fn) {
    visit_params(p.input_gate, fn);
    visit_params(p.forget_gate, fn);
    visit_params(p.output_gate, fn);
    visit_params(p.candidate, fn);
}
template <class Fn> void visit_params(DenseHeadParams& p, Fn&& fn) {
    for (auto& l : p.layers) { fn(l.w); fn(l.b); }
}
template <class P, class Fn> void visit_params(const P& p, Fn&& fn) {
    visit_params(const_cast<P&>(p), [&fn](Matrix& m) { fn(static_cast<const Matrix&>(m)); });
}

template <class P> long param_count(const P& p) {
    long n = 0;
    visit_params(p, [&n](const Matrix& m) { n += m.size(); });
    return n;
}

// ---- initialization -------------------------------------------------------
// Factor matrices uniform in ±sqrt(6/(fan_in+fan_out)); biases zero except
// the forget gate bias, which starts at +1.
Matrix glorot(int rows, int cols, std::mt19937_64& rng);
MatGateParams init_mat_gate(int n_r, int n_c, int k_r, int k_c, std::mt19937_64& rng, double bias_fill);
MatLstmParams init_matlstm(int n_r, int n_c, int k_r, int k_c, std::mt19937_64& rng);
// Head mapping a k_r x k_c state to an n_r x n_c frame; with_hidden adds a
// tanh layer of the state's own shape before the linear output layer.
MatnetParams init_matnet(int k_r, int k_c, int n_r, int n_c, bool with_hidden, double dropout_rate,
                         std::mt19937_64& rng);
VecGateParams init_vec_gate(int input_dim, int k, std::mt19937_64& rng, double bias_fill);
VecLstmParams init_veclstm(int input_dim, int k, std::mt19937_64& rng);
DenseHeadParams init_dense_head(int k, int output_dim, bool with_hidden, double dropout_rate,
                                std::mt19937_64& rng);

// ---- tape-bound cells ------------------------------------------------------
struct MatGateNodes {
    NodeId u_xh, v_xh, u_hh, v_hh, b;
};
struct MatLstmNodes {
    MatGateNodes input_gate, forget_gate, output_gate, candidate;
};
struct MatStateNodes {
    NodeId h, c;
};
struct MatnetLayerNodes {
    NodeId u, v, b;
    Activation act;
};
struct MatnetNodes {
    std::vector<MatnetLayerNodes> layers;
    double dropout_rate = 0.0;
};
struct VecGateNodes {
    NodeId w_x, w_h, b;
};
struct VecLstmNodes {
    VecGateNodes input_gate, forget_gate, output_gate, candidate;
};
struct DenseLayerNodes {
    NodeId w, b;
    Activation act;
};
struct DenseHeadNodes {
    std::vector<DenseLayerNodes> layers;
    double dropout_rate = 0.0;
};

MatGateNodes bind(Tape& t, const MatGateParams& p);
MatLstmNodes bind(Tape& t, const MatLstmParams& p);
MatnetNodes bind(Tape& t, const MatnetParams& p);
VecGateNodes bind(Tape& t, const VecGateParams& p);
VecLstmNodes bind(Tape& t, const VecLstmParams& p);
DenseHeadNodes bind(Tape& t, const DenseHeadParams& p);

// mat(X, H; theta) = u_xh^T X v_xh + u_hh^T H v_hh + b
NodeId mat_op(Tape& t, NodeId x, NodeId h, const MatGateNodes& g);

// One matLSTM step. Gates read the previous hidden state:
//   I,F,O = sigmoid(mat(X_t, H_{t-1})),  Chat = tanh(mat(X_t, H_{t-1}))
//   C_t = F ⊙ C_{t-1} + I ⊙ Chat,        H_t = O ⊙ C_t
MatStateNodes matlstm_step(Tape& t, NodeId x, MatStateNodes prev, const MatLstmNodes& p);

// Vector LSTM step over flattened frames, with the same gate and state
// conventions as matlstm_step (H = O ⊙ C); x is d x 1.
MatStateNodes lstm_step(Tape& t, NodeId x, MatStateNodes prev, const VecLstmNodes& p);

// Feedforward head. When training, hidden-layer outputs are dropped out with
// inverted scaling using masks drawn from `rng`; rng may be null when
// training is false or dropout_rate is 0.
NodeId matnet_forward(Tape& t, NodeId h, const MatnetNodes& p, bool training, std::mt19937_64* rng);
NodeId dense_forward(Tape& t, NodeId h, const DenseHeadNodes& p, bool training, std::mt19937_64* rng);

MatStateNodes zero_state(Tape& t, int k_r, int k_c);

}  // namespace matad::cells

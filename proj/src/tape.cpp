#include "matad/tape.hpp"

#include <cmath>

#include "matad/kernels.hpp"

namespace matad::matgrad {

double frobenius_mse(const Matrix& y, const Matrix& yhat) {
    require_same_shape(y, yhat, "frobenius_mse");
    if (y.size() == 0) throw ContractError("frobenius_mse: empty matrices");
    double acc = 0.0;
    for (int i = 0; i < y.size(); ++i) {
        const double d = yhat.data[i] - y.data[i];
        acc += d * d;
    }
    return acc / y.size();
}

// Stable form max(L,0) - L*y + log(1 + exp(-|L|)), averaged per element.
double bce_with_logits(const Matrix& y, const Matrix& logits) {
    require_same_shape(y, logits, "bce_with_logits");
    if (y.size() == 0) throw ContractError("bce_with_logits: empty matrices");
    double acc = 0.0;
    for (int i = 0; i < y.size(); ++i) {
        const double l = logits.data[i];
        acc += std::max(l, 0.0) - l * y.data[i] + std::log1p(std::exp(-std::fabs(l)));
    }
    return acc / y.size();
}

double loss_value(LossKind kind, const Matrix& y, const Matrix& yhat) {
    return kind == LossKind::kFrobeniusMse ? frobenius_mse(y, yhat) : bce_with_logits(y, yhat);
}

NodeId Tape::push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Tape::input(Matrix value) {
    Node n;
    n.op = Op::kInput;
    n.val = std::move(value);
    return push(std::move(n));
}

NodeId Tape::param(const Matrix* value) {
    Node n;
    n.op = Op::kParam;
    n.external = value;
    return push(std::move(n));
}

NodeId Tape::matmul(NodeId a, NodeId b) {
    Node n;
    n.op = Op::kMatmul;
    n.a = a;
    n.b = b;
    kernels::matmul(value(a), value(b), n.val);
    return push(std::move(n));
}

NodeId Tape::matmul_tn(NodeId a, NodeId b) {
    Node n;
    n.op = Op::kMatmulTN;
    n.a = a;
    n.b = b;
    kernels::matmul_tn(value(a), value(b), n.val);
    return push(std::move(n));
}

NodeId Tape::add(NodeId a, NodeId b) {
    Node n;
    n.op = Op::kAdd;
    n.a = a;
    n.b = b;
    kernels::add(value(a), value(b), n.val);
    return push(std::move(n));
}

NodeId Tape::sub(NodeId a, NodeId b) {
    Node n;
    n.op = Op::kSub;
    n.a = a;
    n.b = b;
    kernels::sub(value(a), value(b), n.val);
    return push(std::move(n));
}

NodeId Tape::hadamard(NodeId a, NodeId b) {
    Node n;
    n.op = Op::kHadamard;
    n.a = a;
    n.b = b;
    kernels::hadamard(value(a), value(b), n.val);
    return push(std::move(n));
}

NodeId Tape::sigmoid(NodeId a) {
    Node n;
    n.op = Op::kSigmoid;
    n.a = a;
    kernels::sigmoid(value(a), n.val);
    return push(std::move(n));
}

NodeId Tape::tanh(NodeId a) {
    Node n;
    n.op = Op::kTanh;
    n.a = a;
    kernels::tanh(value(a), n.val);
    return push(std::move(n));
}

NodeId Tape::scale(NodeId a, double factor) {
    Node n;
    n.op = Op::kScale;
    n.a = a;
    n.aux = factor;
    kernels::scale(value(a), factor, n.val);
    return push(std::move(n));
}

NodeId Tape::sum(NodeId a) {
    Node n;
    n.op = Op::kSum;
    n.a = a;
    n.val = Matrix(1, 1, kernels::sum(value(a)));
    return push(std::move(n));
}

NodeId Tape::frobenius_mse(NodeId target, NodeId pred) {
    Node n;
    n.op = Op::kFrobMse;
    n.a = target;
    n.b = pred;
    n.val = Matrix(1, 1, matgrad::frobenius_mse(value(target), value(pred)));
    return push(std::move(n));
}

NodeId Tape::bce_with_logits(NodeId target, NodeId logits) {
    Node n;
    n.op = Op::kBce;
    n.a = target;
    n.b = logits;
    n.val = Matrix(1, 1, matgrad::bce_with_logits(value(target), value(logits)));
    return push(std::move(n));
}

NodeId Tape::loss(LossKind kind, NodeId target, NodeId pred) {
    return kind == LossKind::kFrobeniusMse ? frobenius_mse(target, pred) : bce_with_logits(target, pred);
}

NodeId Tape::mean(const std::vector<NodeId>& scalars) {
    if (scalars.empty()) throw ContractError("mean: no terms");
    NodeId acc = scalars[0];
    for (size_t i = 1; i < scalars.size(); ++i) acc = add(acc, scalars[i]);
    return scale(acc, 1.0 / static_cast<double>(scalars.size()));
}

Matrix& Tape::grad_slot(NodeId id) {
    Matrix& g = grads_[id];
    if (g.data.empty()) {
        const Matrix& v = value(id);
        g = Matrix(v.rows, v.cols, 0.0);
    }
    return g;
}

const Matrix& Tape::grad(NodeId id) const {
    if (id < static_cast<NodeId>(grads_.size()) && !grads_[id].data.empty()) return grads_[id];
    const Matrix& v = value(id);
    zero_grad_ = Matrix(v.rows, v.cols, 0.0);
    return zero_grad_;
}

void Tape::backward(NodeId loss_node) {
    const Matrix& lv = value(loss_node);
    if (lv.rows != 1 || lv.cols != 1)
        throw ContractError("backward: loss node must be 1x1, got " + lv.shape_str());
    grads_.assign(nodes_.size(), Matrix());
    grad_slot(loss_node).data[0] = 1.0;

    Matrix tmp;
    for (NodeId id = loss_node; id >= 0; --id) {
        const Node& n = nodes_[id];
        if (grads_[id].data.empty()) continue;
        const Matrix& g = grads_[id];
        switch (n.op) {
            case Op::kInput:
            case Op::kParam:
                break;
            case Op::kMatmul:
                // dA += G * B^T ; dB += A^T * G
                kernels::matmul_nt(g, value(n.b), tmp);
                kernels::axpy(1.0, tmp, grad_slot(n.a));
                kernels::matmul_tn(value(n.a), g, tmp);
                kernels::axpy(1.0, tmp, grad_slot(n.b));
                break;
            case Op::kMatmulTN:
                // C = A^T B: dA += B * G^T ; dB += A * G
                kernels::matmul_nt(value(n.b), g, tmp);
                kernels::axpy(1.0, tmp, grad_slot(n.a));
                kernels::matmul(value(n.a), g, tmp);
                kernels::axpy(1.0, tmp, grad_slot(n.b));
                break;
            case Op::kAdd:
                kernels::axpy(1.0, g, grad_slot(n.a));
                kernels::axpy(1.0, g, grad_slot(n.b));
                break;
            case Op::kSub:
                kernels::axpy(1.0, g, grad_slot(n.a));
                kernels::axpy(-1.0, g, grad_slot(n.b));
                break;
            case Op::kHadamard:
                kernels::hadamard_accum(g, value(n.b), grad_slot(n.a));
                kernels::hadamard_accum(g, value(n.a), grad_slot(n.b));
                break;
            case Op::kSigmoid: {
                Matrix& da = grad_slot(n.a);
                const Matrix& s = n.val;
                for (int i = 0; i < s.size(); ++i) da.data[i] += g.data[i] * s.data[i] * (1.0 - s.data[i]);
                break;
            }
            case Op::kTanh: {
                Matrix& da = grad_slot(n.a);
                const Matrix& t = n.val;
                for (int i = 0; i < t.size(); ++i) da.data[i] += g.data[i] * (1.0 - t.data[i] * t.data[i]);
                break;
            }
            case Op::kScale:
                kernels::axpy(n.aux, g, grad_slot(n.a));
                break;
            case Op::kSum: {
                Matrix& da = grad_slot(n.a);
                const double gs = g.data[0];
                for (double& v : da.data) v += gs;
                break;
            }
            case Op::kFrobMse: {
                // d/dpred mean((pred - y)^2) = 2 (pred - y) / n
                Matrix& dp = grad_slot(n.b);
                const Matrix& y = value(n.a);
                const Matrix& p = value(n.b);
                const double c = 2.0 * g.data[0] / y.size();
                for (int i = 0; i < y.size(); ++i) dp.data[i] += c * (p.data[i] - y.data[i]);
                break;
            }
            case Op::kBce: {
                // d/dlogits = (sigmoid(logits) - y) / n
                Matrix& dl = grad_slot(n.b);
                const Matrix& y = value(n.a);
                const Matrix& l = value(n.b);
                const double c = g.data[0] / y.size();
                for (int i = 0; i < y.size(); ++i) {
                    const double x = l.data[i];
                    const double s = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
                    dl.data[i] += c * (s - y.data[i]);
                }
                break;
            }
        }
    }
}

void Tape::clear() {
    nodes_.clear();
    grads_.clear();
}

}  // namespace matad::matgrad

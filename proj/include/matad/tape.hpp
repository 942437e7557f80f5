#pragma once

#include <cstdint>
#include <vector>

#include "matad/matrix.hpp"

namespace matad::matgrad {

using NodeId = int32_t;

enum class LossKind : uint8_t { kFrobeniusMse, kBceWithLogits };

// Loss values on plain matrices; the tape ops below compute the same numbers.
double frobenius_mse(const Matrix& y, const Matrix& yhat);
double bce_with_logits(const Matrix& y, const Matrix& logits);
double loss_value(LossKind kind, const Matrix& y, const Matrix& yhat);

// Reverse-mode tape over matrix-valued nodes. Nodes are appended in
// topological order by construction; backward() walks them in reverse.
// A tape is single-owner: build, run backward once, read grads, clear.
class Tape {
public:
    enum class Op : uint8_t {
        kInput,
        kParam,
        kMatmul,     // a * b
        kMatmulTN,   // a^T * b
        kAdd,
        kSub,
        kHadamard,
        kSigmoid,
        kTanh,
        kScale,      // aux * a
        kSum,        // 1x1 sum of entries
        kFrobMse,    // mean squared difference, a = target, b = prediction
        kBce,        // mean stable BCE, a = target, b = logits
    };

    // Constant matrix owned by the tape (data frames, dropout masks, targets).
    NodeId input(Matrix value);
    // Externally owned parameter; the pointer must outlive the tape.
    NodeId param(const Matrix* value);

    NodeId matmul(NodeId a, NodeId b);
    NodeId matmul_tn(NodeId a, NodeId b);
    NodeId add(NodeId a, NodeId b);
    NodeId sub(NodeId a, NodeId b);
    NodeId hadamard(NodeId a, NodeId b);
    NodeId sigmoid(NodeId a);
    NodeId tanh(NodeId a);
    NodeId scale(NodeId a, double factor);
    NodeId sum(NodeId a);
    NodeId frobenius_mse(NodeId target, NodeId pred);
    NodeId bce_with_logits(NodeId target, NodeId logits);
    NodeId loss(LossKind kind, NodeId target, NodeId pred);
    // mean of 1x1 nodes, built from add/scale
    NodeId mean(const std::vector<NodeId>& scalars);

    const Matrix& value(NodeId id) const { return nodes_[id].external ? *nodes_[id].external : nodes_[id].val; }
    double scalar(NodeId id) const { return value(id).data[0]; }

    // Accumulates d(loss)/d(node) for every node reachable from the loss.
    // The loss node must be 1x1. May be called once per build.
    void backward(NodeId loss_node);
    // Zero matrix of the node's shape when the node does not reach the loss.
    const Matrix& grad(NodeId id) const;

    size_t size() const { return nodes_.size(); }
    void clear();

private:
    struct Node {
        Op op;
        NodeId a = -1;
        NodeId b = -1;
        double aux = 0.0;
        const Matrix* external = nullptr;
        Matrix val;
    };

    NodeId push(Node n);
    Matrix& grad_slot(NodeId id);

    std::vector<Node> nodes_;
    std::vector<Matrix> grads_;
    mutable Matrix zero_grad_;
};

// Central-difference gradient checker. Rebuilds the forward pass through
// `build_loss` (which must be deterministic) while perturbing entries of
// `params`; compares against the analytic gradients of one backward pass.
// Matrices with more entries than `max_entries_per_param` are subsampled
// with a fixed-seed RNG. Returns the max relative error over checked
// entries, with the denominator floored at 1e-3 to keep the finite
// difference noise floor out of the ratio.
struct GradCheckResult {
    double max_rel_error = 0.0;
    int entries_checked = 0;
};

template <typename BuildLoss>
GradCheckResult grad_check(BuildLoss&& build_loss, std::vector<Matrix*> params, double eps,
                           int max_entries_per_param = 200);

}  // namespace matad::matgrad

namespace matad {
using matgrad::LossKind;
using matgrad::NodeId;
using matgrad::Tape;
}  // namespace matad

#include "matad/grad_check_impl.hpp"

#pragma once

#include <algorithm>
#include <random>

namespace matad::matgrad {

template <typename BuildLoss>
GradCheckResult grad_check(BuildLoss&& build_loss, std::vector<Matrix*> params, double eps,
                           int max_entries_per_param) {
    if (eps <= 0.0) throw ContractError("grad_check: eps must be positive");

    // One analytic pass. build_loss must register params on the tape in the
    // order given here and return the loss node.
    Tape tape;
    std::vector<NodeId> param_nodes;
    param_nodes.reserve(params.size());
    for (Matrix* p : params) param_nodes.push_back(tape.param(p));
    const NodeId loss = build_loss(tape, param_nodes);
    tape.backward(loss);

    std::mt19937_64 pick(0x9e3779b97f4a7c15ull);
    GradCheckResult res;
    for (size_t pi = 0; pi < params.size(); ++pi) {
        Matrix& p = *params[pi];
        const Matrix& analytic = tape.grad(param_nodes[pi]);

        std::vector<int> entries(p.size());
        for (int i = 0; i < p.size(); ++i) entries[i] = i;
        if (p.size() > max_entries_per_param) {
            std::shuffle(entries.begin(), entries.end(), pick);
            entries.resize(max_entries_per_param);
        }

        for (int idx : entries) {
            const double saved = p.data[idx];
            auto eval = [&](double v) {
                p.data[idx] = v;
                Tape t;
                std::vector<NodeId> ids;
                ids.reserve(params.size());
                for (Matrix* q : params) ids.push_back(t.param(q));
                return t.scalar(build_loss(t, ids));
            };
            const double fp = eval(saved + eps);
            const double fm = eval(saved - eps);
            p.data[idx] = saved;

            const double numeric = (fp - fm) / (2.0 * eps);
            const double a = analytic.data[idx];
            const double denom = std::max({std::fabs(a), std::fabs(numeric), 1e-3});
            res.max_rel_error = std::max(res.max_rel_error, std::fabs(a - numeric) / denom);
            ++res.entries_checked;
        }
    }
    return res;
}

}  // namespace matad::matgrad

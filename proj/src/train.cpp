#include "matad/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "matad/kernels.hpp"

#include "matad/rng.hpp"

namespace matad::train {

void adam_step(const std::vector<Matrix*>& params, const std::vector<Matrix>& grads,
               AdamState& state, double lr) {
    if (params.size() != grads.size()) throw ContractError("adam_step: params/grads size mismatch");
    if (state.m.empty()) {
        state.m.reserve(params.size());
        state.v.reserve(params.size());
        for (const Matrix* p : params) {
            state.m.emplace_back(p->rows, p->cols, 0.0);
            state.v.emplace_back(p->rows, p->cols, 0.0);
        }
    }
    ++state.step;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (size_t i = 0; i < params.size(); ++i) {
        Matrix& p = *params[i];
        const Matrix& g = grads[i];
        require_same_shape(p, g, "adam_step");
        Matrix& m = state.m[i];
        Matrix& v = state.v[i];
        for (int j = 0; j < p.size(); ++j) {
            m.data[j] = state.beta1 * m.data[j] + (1.0 - state.beta1) * g.data[j];
            v.data[j] = state.beta2 * v.data[j] + (1.0 - state.beta2) * g.data[j] * g.data[j];
            const double mhat = m.data[j] / bc1;
            const double vhat = v.data[j] / bc2;
            p.data[j] -= lr * mhat / (std::sqrt(vhat) + state.eps);
        }
    }
}

double clip_global_norm(std::vector<Matrix>& grads, double max_norm) {
    double sq = 0.0;
    for (const Matrix& g : grads)
        for (double v : g.data) sq += v * v;
    const double norm = std::sqrt(sq);
    if (norm > max_norm && norm > 0.0) {
        const double s = max_norm / norm;
        for (Matrix& g : grads)
            for (double& v : g.data) v *= s;
    }
    return norm;
}

namespace {

using models::Model;
using models::ModelSpec;

// Grad/loss evaluation of one chunk of sequences in parallel, accumulated in
// index order so results do not depend on the thread count.
constexpr int kChunk = 16;

struct RangeTrainer {
    Model& model;
    int first_layer;
    int n_layers;
    const std::vector<MatrixSequence>& data;  // local (layer-level) sequences
    LossKind loss_kind;
    const TrainConfig& cfg;
    int layer_tag;

    std::vector<Matrix*> params;

    double eval_loss(const std::vector<int>& idx) const {
        std::vector<double> losses(idx.size(), 0.0);
#pragma omp parallel for schedule(static)
        for (int i = 0; i < static_cast<int>(idx.size()); ++i) {
            Tape t;
            auto g = models::build_sequence_graph(t, model, first_layer, n_layers, data[idx[i]],
                                                  loss_kind, false, 0);
            losses[i] = t.scalar(g.loss);
        }
        double acc = 0.0;
        for (double l : losses) acc += l;
        return acc / static_cast<double>(idx.size());
    }

    // Mean gradient over the batch, written into `grads`; returns mean loss.
    double batch_gradients(const std::vector<int>& batch, int epoch, std::vector<Matrix>& grads) {
        for (size_t p = 0; p < params.size(); ++p) {
            grads[p].rows = params[p]->rows;
            grads[p].cols = params[p]->cols;
            grads[p].data.assign(params[p]->data.size(), 0.0);
        }
        double loss_acc = 0.0;
        std::vector<std::vector<Matrix>> slot_grads(kChunk);
        std::vector<double> slot_loss(kChunk);
        for (size_t start = 0; start < batch.size(); start += kChunk) {
            const int count = static_cast<int>(std::min<size_t>(kChunk, batch.size() - start));
#pragma omp parallel for schedule(static)
            for (int s = 0; s < count; ++s) {
                const int seq_idx = batch[start + s];
                Tape t;
                auto g = models::build_sequence_graph(
                    t, model, first_layer, n_layers, data[seq_idx], loss_kind, true,
                    derive_stream(cfg.seed, {0xd0u, static_cast<uint64_t>(epoch),
                                             static_cast<uint64_t>(seq_idx)}));
                t.backward(g.loss);
                slot_loss[s] = t.scalar(g.loss);
                auto& dst = slot_grads[s];
                dst.resize(g.param_ids.size());
                for (size_t p = 0; p < g.param_ids.size(); ++p) dst[p] = t.grad(g.param_ids[p]);
            }
            for (int s = 0; s < count; ++s) {
                loss_acc += slot_loss[s];
                for (size_t p = 0; p < params.size(); ++p)
                    kernels::axpy(1.0, slot_grads[s][p], grads[p]);
            }
        }
        const double inv = 1.0 / static_cast<double>(batch.size());
        for (Matrix& g : grads)
            for (double& v : g.data) v *= inv;
        return loss_acc * inv;
    }

    std::vector<EpochStats> run() {
        params.clear();
        for (int l = first_layer; l < first_layer + n_layers; ++l)
            for (Matrix* p : models::collect_params(model, l)) params.push_back(p);

        const int n = static_cast<int>(data.size());
        std::mt19937_64 rng(derive_stream(cfg.seed, {0x5a11ull, static_cast<uint64_t>(layer_tag)}));
        std::vector<int> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);

        int n_val = static_cast<int>(std::lround(cfg.val_fraction * n));
        n_val = std::min(n_val, n - 1);
        std::vector<int> val_idx(order.begin(), order.begin() + std::max(n_val, 0));
        std::vector<int> train_idx(order.begin() + std::max(n_val, 0), order.end());
        if (val_idx.empty()) val_idx = train_idx;  // tiny datasets validate on train

        AdamState adam;
        std::vector<Matrix> grads(params.size());
        std::vector<EpochStats> history;
        double best_val = std::numeric_limits<double>::infinity();
        std::vector<Matrix> best_params;
        int stall = 0;

        for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
            std::shuffle(train_idx.begin(), train_idx.end(), rng);
            double train_loss = 0.0;
            int n_batches = 0;
            for (size_t start = 0; start < train_idx.size(); start += cfg.batch_size) {
                const size_t end = std::min(train_idx.size(), start + cfg.batch_size);
                std::vector<int> batch(train_idx.begin() + start, train_idx.begin() + end);
                const double batch_loss = batch_gradients(batch, epoch, grads);
                if (!std::isfinite(batch_loss))
                    throw NumericalError("non-finite training loss at epoch " +
                                         std::to_string(epoch) + ", batch " +
                                         std::to_string(n_batches));
                clip_global_norm(grads, cfg.clip_norm);
                adam_step(params, grads, adam, cfg.learning_rate);
                train_loss += batch_loss;
                ++n_batches;
            }
            train_loss /= std::max(n_batches, 1);

            const double val_loss = eval_loss(val_idx);
            if (!std::isfinite(val_loss))
                throw NumericalError("non-finite validation loss at epoch " + std::to_string(epoch));
            history.push_back({layer_tag, epoch, train_loss, val_loss});

            if (val_loss < best_val * (1.0 - 1e-6) || best_params.empty()) {
                best_val = val_loss;
                best_params.clear();
                best_params.reserve(params.size());
                for (Matrix* p : params) best_params.push_back(*p);
                stall = 0;
            } else if (++stall >= cfg.patience) {
                break;
            }
        }

        for (size_t i = 0; i < params.size(); ++i) *params[i] = best_params[i];
        last_best_val = best_val;
        last_final_val = eval_loss(val_idx);
        return history;
    }

    double last_best_val = 0.0;
    double last_final_val = 0.0;
};

std::vector<MatrixSequence> derive_dataset(const Model& m, int upto,
                                           const std::vector<MatrixSequence>& data) {
    std::vector<MatrixSequence> out(data.size());
#pragma omp parallel for schedule(static)
    for (int i = 0; i < static_cast<int>(data.size()); ++i)
        out[i] = models::hidden_sequence(m, upto, data[i]);
    return out;
}

}  // namespace

TrainResult stack_layerwise_train(const ModelSpec& spec, const Dataset& data,
                                  const TrainConfig& cfg) {
    if (spec.layers != 2) throw ContractError("stack_layerwise_train: needs a 2-layer spec");
    ModelSpec s = spec;
    s.stack_mode = models::StackMode::kLayerwise;
    return fit(s, data, cfg);
}

TrainResult fit(const ModelSpec& spec, const Dataset& data, const TrainConfig& cfg) {
    cfg.validate();
    if (data.empty()) throw ContractError("train: empty dataset");

    std::vector<MatrixSequence> local(data.size());
#pragma omp parallel for schedule(static)
    for (int i = 0; i < static_cast<int>(data.size()); ++i)
        local[i] = models::transform_input(data[i], spec);

    TrainResult res;
    res.model = models::init_model(spec, local.front().n_r(), local.front().n_c(), cfg.seed);

    const bool joint = spec.stack_mode == models::StackMode::kJoint;
    if (spec.layers == 1 || joint) {
        RangeTrainer rt{res.model, 0, spec.layers, local, spec.loss, cfg, 0, {}};
        res.history = rt.run();
        res.best_val = rt.last_best_val;
        res.final_val_loss = rt.last_final_val;
        return res;
    }

    // layerwise: bottom layer first, then freeze and lift the data
    RangeTrainer bottom{res.model, 0, 1, local, models::layer_loss(spec, 0), cfg, 0, {}};
    res.history = bottom.run();

    const auto lifted = derive_dataset(res.model, 1, local);
    RangeTrainer top{res.model, 1, 1, lifted, models::layer_loss(spec, 1), cfg, 1, {}};
    auto top_history = top.run();
    res.history.insert(res.history.end(), top_history.begin(), top_history.end());
    res.best_val = top.last_best_val;
    res.final_val_loss = top.last_final_val;
    return res;
}

}  // namespace matad::train

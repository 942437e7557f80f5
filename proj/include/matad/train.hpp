#pragma once

#include "matad/models.hpp"

namespace matad::train {

struct TrainConfig {
    double learning_rate = 3e-4;
    int batch_size = 64;
    int max_epochs = 100;
    int patience = 10;
    double clip_norm = 5.0;
    uint64_t seed = 0;
    double val_fraction = 0.2;

    void validate() const {
        if (learning_rate <= 0) throw ContractError("train: learning_rate must be positive");
        if (val_fraction <= 0 || val_fraction >= 1) throw ContractError("train: val_fraction in (0,1)");
        if (batch_size < 1 || max_epochs < 1 || patience < 1)
            throw ContractError("train: batch_size, max_epochs, patience must be >= 1");
    }
};

struct AdamState {
    std::vector<Matrix> m, v;
    long step = 0;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
};

// Bias-corrected Adam update, in place.
void adam_step(const std::vector<Matrix*>& params, const std::vector<Matrix>& grads,
               AdamState& state, double lr);

// Scales grads so the global L2 norm is at most max_norm; returns the
// pre-clip norm.
double clip_global_norm(std::vector<Matrix>& grads, double max_norm);

struct EpochStats {
    int layer = 0;
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
};

struct TrainResult {
    models::Model model;
    std::vector<EpochStats> history;
    double best_val = 0.0;        // best validation loss seen (top layer for stacks)
    double final_val_loss = 0.0;  // re-evaluated after restoring the best checkpoint
};

// Trains a model per its spec: single layer, joint stack, or layerwise stack.
// The dataset is raw; the configured input transform is applied here (and
// again at scoring time by the models module, both starting from raw data).
TrainResult fit(const models::ModelSpec& spec, const Dataset& data, const TrainConfig& cfg);

// Layerwise stack training: the bottom layer is trained to its own objective
// and frozen; the next layer trains on the frozen encoder's hidden-state
// sequences. Scoring such a model uses the top layer's loss only.
TrainResult stack_layerwise_train(const models::ModelSpec& spec, const Dataset& data,
                                  const TrainConfig& cfg);

}  // namespace matad::train

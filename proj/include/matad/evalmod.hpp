#pragma once

#include <functional>

#include "matad/train.hpp"

namespace matad::eval {

// Mann-Whitney AUC via midranks: the probability a random positive outscores
// a random negative, ties counted one half.
double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels);

struct F1Result {
    double f1 = 0.0;
    double threshold = 0.0;
};
// Best F1 over all distinct-score thresholds (positive = score >= threshold),
// ties broken toward the lower threshold.
F1Result best_f1(const std::vector<double>& scores, const std::vector<int>& labels);

struct MetricReport {
    double auc = 0.0;
    double f1 = 0.0;
    double threshold = 0.0;
    int n_pos = 0;
    int n_neg = 0;
    long param_count = 0;
    uint64_t seed = 0;
};

MetricReport evaluate_scores(const std::vector<models::ScoredSequence>& scored, long param_count,
                             uint64_t seed);

struct AggregateReport {
    double auc_mean = 0.0, auc_std = 0.0;
    double f1_mean = 0.0, f1_std = 0.0;
    long param_count = 0;
    std::vector<MetricReport> per_seed;
    std::string config_fingerprint;
    bool partial = false;                // some seed failed
    std::vector<std::string> failures;
};

// Optional hook for persisting per-seed artifacts (model + scores); invoked
// after each successful seed run.
using SeedArtifactSink =
    std::function<void(uint64_t seed, const models::Model&, const std::vector<models::ScoredSequence>&)>;

// Trains, scores and evaluates once per seed; reports mean and population
// standard deviation over seeds.
AggregateReport run_experiment(const models::ModelSpec& spec, const train::TrainConfig& base_cfg,
                               const Dataset& train_data, const Dataset& test_data,
                               const std::vector<uint64_t>& seeds,
                               const std::string& config_fingerprint = "",
                               const SeedArtifactSink& sink = nullptr);

struct SweepPoint {
    int k_r = 0, k_c = 0, k = 0;
    long param_count = 0;
    AggregateReport report;
};
struct HiddenGridEntry {
    int k_r = 0, k_c = 0;  // matLSTM dims
    int k = 0;             // vector LSTM size
};

std::vector<SweepPoint> sweep_hidden_sizes(const models::ModelSpec& base,
                                           const train::TrainConfig& cfg, const Dataset& train_data,
                                           const Dataset& test_data,
                                           const std::vector<HiddenGridEntry>& grid,
                                           const std::vector<uint64_t>& seeds);

std::string sweep_csv(const std::vector<SweepPoint>& points);

}  // namespace matad::eval

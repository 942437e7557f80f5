#include "matad/evalmod.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace matad::eval {

namespace {

void check_two_classes(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size()) throw ContractError("metrics: scores/labels size mismatch");
    int pos = 0, neg = 0;
    for (int l : labels) {
        if (l == 1)
            ++pos;
        else if (l == 0)
            ++neg;
        else
            throw ContractError("metrics: labels must be 0 or 1");
    }
    if (pos == 0 || neg == 0) throw ContractError("metrics: need both classes present");
}

}  // namespace

double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    check_two_classes(scores, labels);
    const size_t n = scores.size();
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&scores](size_t a, size_t b) { return scores[a] < scores[b]; });

    double pos_rank_sum = 0.0;
    long n_pos = 0, n_neg = 0;
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (size_t k = i; k < j; ++k) {
            if (labels[order[k]] == 1) {
                pos_rank_sum += midrank;
                ++n_pos;
            } else {
                ++n_neg;
            }
        }
        i = j;
    }
    const double u = pos_rank_sum - static_cast<double>(n_pos) * (n_pos + 1) / 2.0;
    return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

F1Result best_f1(const std::vector<double>& scores, const std::vector<int>& labels) {
    check_two_classes(scores, labels);
    const size_t n = scores.size();
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&scores](size_t a, size_t b) { return scores[a] > scores[b]; });

    long total_pos = std::count(labels.begin(), labels.end(), 1);
    long tp = 0, fp = 0;
    F1Result best{-1.0, 0.0};
    size_t i = 0;
    while (i < n) {
        const double threshold = scores[order[i]];
        size_t j = i;
        while (j < n && scores[order[j]] == threshold) {
            if (labels[order[j]] == 1)
                ++tp;
            else
                ++fp;
            ++j;
        }
        const long fn = total_pos - tp;
        const double f1 = tp == 0 ? 0.0 : 2.0 * tp / static_cast<double>(2 * tp + fp + fn);
        // >= so equal scores resolve to the lower threshold
        if (f1 >= best.f1) best = {f1, threshold};
        i = j;
    }
    return best;
}

MetricReport evaluate_scores(const std::vector<models::ScoredSequence>& scored, long param_count,
                             uint64_t seed) {
    std::vector<double> scores;
    std::vector<int> labels;
    for (const auto& s : scored) {
        if (!s.label) continue;
        scores.push_back(s.score);
        labels.push_back(*s.label);
    }
    MetricReport r;
    r.auc = roc_auc(scores, labels);
    const auto f1 = best_f1(scores, labels);
    r.f1 = f1.f1;
    r.threshold = f1.threshold;
    r.n_pos = static_cast<int>(std::count(labels.begin(), labels.end(), 1));
    r.n_neg = static_cast<int>(labels.size()) - r.n_pos;
    r.param_count = param_count;
    r.seed = seed;
    return r;
}

AggregateReport run_experiment(const models::ModelSpec& spec, const train::TrainConfig& base_cfg,
                               const Dataset& train_data, const Dataset& test_data,
                               const std::vector<uint64_t>& seeds,
                               const std::string& config_fingerprint, const SeedArtifactSink& sink) {
    if (seeds.empty()) throw ContractError("run_experiment: no seeds");
    AggregateReport agg;
    agg.config_fingerprint = config_fingerprint;
    for (uint64_t seed : seeds) {
        try {
            train::TrainConfig cfg = base_cfg;
            cfg.seed = seed;
            auto result = train::fit(spec, train_data, cfg);
            auto scored = models::score_dataset(test_data, result.model);
            agg.per_seed.push_back(evaluate_scores(scored, models::param_count(result.model), seed));
            if (sink) sink(seed, result.model, scored);
        } catch (const std::exception& e) {
            agg.partial = true;
            agg.failures.push_back("seed " + std::to_string(seed) + ": " + e.what());
        }
    }
    const size_t n = agg.per_seed.size();
    if (n > 0) {
        auto mean_std = [&](auto getter, double& mean, double& stdev) {
            mean = 0.0;
            for (const auto& r : agg.per_seed) mean += getter(r);
            mean /= static_cast<double>(n);
            double var = 0.0;
            for (const auto& r : agg.per_seed) var += (getter(r) - mean) * (getter(r) - mean);
            stdev = std::sqrt(var / static_cast<double>(n));
        };
        mean_std([](const MetricReport& r) { return r.auc; }, agg.auc_mean, agg.auc_std);
        mean_std([](const MetricReport& r) { return r.f1; }, agg.f1_mean, agg.f1_std);
        agg.param_count = agg.per_seed.front().param_count;
    }
    return agg;
}

std::vector<SweepPoint> sweep_hidden_sizes(const models::ModelSpec& base,
                                           const train::TrainConfig& cfg, const Dataset& train_data,
                                           const Dataset& test_data,
                                           const std::vector<HiddenGridEntry>& grid,
                                           const std::vector<uint64_t>& seeds) {
    if (grid.empty()) throw ContractError("sweep: empty grid");
    std::vector<SweepPoint> points;
    for (const auto& g : grid) {
        models::ModelSpec spec = base;
        if (spec.cell == models::CellKind::kMatLstm) {
            spec.k_r = g.k_r;
            spec.k_c = g.k_c;
        } else {
            spec.k = g.k;
        }
        SweepPoint p;
        p.k_r = g.k_r;
        p.k_c = g.k_c;
        p.k = g.k;
        p.report = run_experiment(spec, cfg, train_data, test_data, seeds);
        p.param_count = p.report.param_count;
        points.push_back(std::move(p));
    }
    return points;
}

std::string sweep_csv(const std::vector<SweepPoint>& points) {
    std::ostringstream out;
    out << "param_count,auc_mean,auc_std,f1_mean,f1_std\n";
    out.precision(17);
    for (const auto& p : points)
        out << p.param_count << "," << p.report.auc_mean << "," << p.report.auc_std << ","
            << p.report.f1_mean << "," << p.report.f1_std << "\n";
    return out.str();
}

}  // namespace matad::eval

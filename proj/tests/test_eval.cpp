#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "matad/evalmod.hpp"

namespace eval = matad::eval;

namespace {

// O(n^2) pair oracle with half-credit ties
double auc_pair_oracle(const std::vector<double>& s, const std::vector<int>& y) {
    double num = 0.0;
    long pairs = 0;
    for (size_t i = 0; i < s.size(); ++i) {
        if (y[i] != 1) continue;
        for (size_t j = 0; j < s.size(); ++j) {
            if (y[j] != 0) continue;
            ++pairs;
            if (s[i] > s[j])
                num += 1.0;
            else if (s[i] == s[j])
                num += 0.5;
        }
    }
    return num / pairs;
}

// brute force over all candidate thresholds
eval::F1Result f1_oracle(const std::vector<double>& s, const std::vector<int>& y) {
    eval::F1Result best{-1.0, 0.0};
    std::vector<double> cands = s;
    std::sort(cands.begin(), cands.end());
    cands.erase(std::unique(cands.begin(), cands.end()), cands.end());
    for (double th : cands) {
        long tp = 0, fp = 0, fn = 0;
        for (size_t i = 0; i < s.size(); ++i) {
            const bool pred = s[i] >= th;
            if (pred && y[i] == 1) ++tp;
            if (pred && y[i] == 0) ++fp;
            if (!pred && y[i] == 1) ++fn;
        }
        const double f1 = tp == 0 ? 0.0 : 2.0 * tp / static_cast<double>(2 * tp + fp + fn);
        if (f1 > best.f1 || (f1 == best.f1 && th < best.threshold)) best = {f1, th};
    }
    return best;
}

}  // namespace

TEST_CASE("roc_auc hand cases") {
    CHECK(eval::roc_auc({0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0}) == 1.0);
    CHECK(eval::roc_auc({0.5, 0.5, 0.5, 0.5}, {1, 0, 1, 0}) == 0.5);
    // pairs: (0.3 vs 0.7) loses, (0.3 vs 0.4) loses -> 0
    CHECK(eval::roc_auc({0.3, 0.7, 0.4}, {1, 0, 0}) == 0.0);
    CHECK_THROWS_AS(eval::roc_auc({0.1, 0.2}, {1, 1}), matad::ContractError);
}

TEST_CASE("roc_auc matches the pair oracle on 200 random score sets") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0, 1);
    std::uniform_int_distribution<int> size(2, 60);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = size(rng);
        std::vector<double> s(n);
        std::vector<int> y(n);
        int pos = 0;
        for (int i = 0; i < n; ++i) {
            // quantized scores so ties happen often
            s[i] = std::floor(u(rng) * 8) / 8.0;
            y[i] = u(rng) < 0.4;
            pos += y[i];
        }
        if (pos == 0) y[0] = 1;
        if (pos == n) y[0] = 0;
        CHECK(eval::roc_auc(s, y) == doctest::Approx(auc_pair_oracle(s, y)).epsilon(1e-12));
    }
}

TEST_CASE("roc_auc invariances") {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<double> s(40);
    std::vector<int> y(40);
    for (int i = 0; i < 40; ++i) {
        s[i] = u(rng);
        y[i] = i % 3 == 0;
    }
    const double base = eval::roc_auc(s, y);

    // strictly increasing transform
    std::vector<double> t(40);
    for (int i = 0; i < 40; ++i) t[i] = std::exp(3.0 * s[i]) + 7.0;
    CHECK(eval::roc_auc(t, y) == doctest::Approx(base).epsilon(1e-12));

    // negation flips (no ties with continuous draws)
    std::vector<double> neg(40);
    for (int i = 0; i < 40; ++i) neg[i] = -s[i];
    CHECK(eval::roc_auc(neg, y) == doctest::Approx(1.0 - base).epsilon(1e-12));
}

TEST_CASE("best_f1 hand cases") {
    auto perfect = eval::best_f1({0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0});
    CHECK(perfect.f1 == 1.0);

    // inverted scores: predicting everything positive is the best one can do
    auto inverted = eval::best_f1({0.2, 0.9}, {1, 0});
    CHECK(inverted.f1 == doctest::Approx(2.0 / 3.0));
    CHECK(inverted.threshold == 0.2);

    CHECK_THROWS_AS(eval::best_f1({0.1}, {1}), matad::ContractError);
}

TEST_CASE("best_f1 matches exhaustive enumeration") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0, 1);
    std::uniform_int_distribution<int> size(2, 50);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = size(rng);
        std::vector<double> s(n);
        std::vector<int> y(n);
        int pos = 0;
        for (int i = 0; i < n; ++i) {
            s[i] = std::floor(u(rng) * 6) / 6.0;
            y[i] = u(rng) < 0.5;
            pos += y[i];
        }
        if (pos == 0) y[0] = 1;
        if (pos == n) y[0] = 0;
        auto got = eval::best_f1(s, y);
        auto want = f1_oracle(s, y);
        CHECK(got.f1 == doctest::Approx(want.f1).epsilon(1e-12));
        CHECK(got.threshold == want.threshold);
    }
}

TEST_CASE("aggregate mean and std match a direct two-pass computation") {
    using matad::models::ScoredSequence;
    // synthetic per-seed reports via evaluate_scores
    std::vector<ScoredSequence> scored;
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0, 1);
    for (int i = 0; i < 30; ++i) scored.push_back({std::to_string(i), u(rng), i % 4 == 0});
    auto rep = eval::evaluate_scores(scored, 123, 7);
    CHECK(rep.n_pos == 8);
    CHECK(rep.n_neg == 22);
    CHECK(rep.param_count == 123);
    CHECK(rep.auc >= 0.0);
    CHECK(rep.auc <= 1.0);
    CHECK(rep.f1 >= 0.0);
    CHECK(rep.f1 <= 1.0);
}

TEST_CASE("sweep csv has the pinned column order") {
    std::vector<eval::SweepPoint> pts(1);
    pts[0].param_count = 42;
    pts[0].report.auc_mean = 0.5;
    const auto csv = eval::sweep_csv(pts);
    CHECK(csv.rfind("param_count,auc_mean,auc_std,f1_mean,f1_std\n", 0) == 0);
    CHECK(csv.find("42,0.5") != std::string::npos);
}

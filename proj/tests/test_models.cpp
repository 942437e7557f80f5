#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "matad/models.hpp"
#include "matad/train.hpp"

using matad::Dataset;
using matad::LossKind;
using matad::Matrix;
using matad::MatrixSequence;
using matad::Tape;
namespace models = matad::models;
namespace cells = matad::cells;

namespace {

Matrix random_matrix(int r, int c, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> dist(lo, hi);
    Matrix m(r, c);
    for (double& v : m.data) v = dist(rng);
    return m;
}

MatrixSequence random_sequence(int T, int n_r, int n_c, std::mt19937_64& rng) {
    MatrixSequence s;
    s.id = "test";
    for (int t = 0; t < T; ++t) s.frames.push_back(random_matrix(n_r, n_c, rng));
    return s;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
    REQUIRE(a.same_shape(b));
    double d = 0.0;
    for (int i = 0; i < a.size(); ++i) d = std::max(d, std::fabs(a.data[i] - b.data[i]));
    return d;
}

models::ModelSpec small_spec(models::Strategy strategy) {
    models::ModelSpec spec;
    spec.cell = models::CellKind::kMatLstm;
    spec.strategy = strategy;
    spec.k_r = 3;
    spec.k_c = 3;
    spec.loss = LossKind::kFrobeniusMse;
    spec.dropout_rate = 0.0;
    return spec;
}

}  // namespace

TEST_CASE("encode matches a stepwise fold and handles T=1") {
    std::mt19937_64 rng(1);
    auto p = cells::init_matlstm(4, 4, 2, 2, rng);
    cells::visit_params(p, [](Matrix& m) { std::fill(m.data.begin(), m.data.end(), 0.0); });
    MatrixSequence one;
    one.id = "one";
    one.frames.push_back(random_matrix(4, 4, rng));
    auto st = models::encode(one, p);
    for (double v : st.h.data) CHECK(v == 0.0);  // 0.25 * zero initial memory

    auto q = cells::init_matlstm(4, 4, 2, 2, rng);
    auto seq = random_sequence(5, 4, 4, rng);
    auto full = models::encode(seq, q);

    // independent fold oracle: re-encode one step at a time via prefix calls
    Tape t;
    auto qn = cells::bind(t, q);
    auto state = cells::zero_state(t, 2, 2);
    for (const auto& f : seq.frames) state = cells::matlstm_step(t, t.input(f), state, qn);
    CHECK(max_abs_diff(full.h, t.value(state.h)) == 0.0);
    CHECK(max_abs_diff(full.c, t.value(state.c)) == 0.0);
}

TEST_CASE("reconstruct emits T frames and respects strategy") {
    std::mt19937_64 rng(2);
    auto spec = small_spec(models::Strategy::kAutoencoder);
    auto m = models::init_model(spec, 4, 5, 7);
    auto seq = random_sequence(6, 4, 5, rng);
    auto recon = models::reconstruct(seq, m);
    CHECK(recon.size() == 6);
    for (const auto& f : recon) CHECK((f.rows == 4 && f.cols == 5));

    auto pred_spec = small_spec(models::Strategy::kEncoderPredictor);
    auto pm = models::init_model(pred_spec, 4, 5, 7);
    CHECK_THROWS_AS(models::reconstruct(seq, pm), matad::ContractError);
}

TEST_CASE("unconditional decoder output depends only on the encoder state") {
    std::mt19937_64 rng(3);
    auto spec = small_spec(models::Strategy::kAutoencoder);
    spec.conditional_decoding = false;
    auto m = models::init_model(spec, 4, 4, 9);
    auto seq_a = random_sequence(5, 4, 4, rng);

    // same sequence, different data after encoding is impossible for the AE
    // (it reads everything), so check determinism of the decode given the
    // state: two identical calls agree bitwise, and the decode inputs being
    // zero matrices means outputs equal a manual zero-fed decode.
    auto r1 = models::reconstruct(seq_a, m);
    auto r2 = models::reconstruct(seq_a, m);
    for (size_t i = 0; i < r1.size(); ++i) CHECK(max_abs_diff(r1[i], r2[i]) == 0.0);
}

TEST_CASE("score_reconstruction pairing and oracle") {
    std::mt19937_64 rng(4);
    auto seq = random_sequence(4, 3, 3, rng);
    std::vector<Matrix> reversed(seq.frames.rbegin(), seq.frames.rend());
    CHECK(models::score_reconstruction(seq, reversed, LossKind::kFrobeniusMse) == 0.0);

    // T=2: decode step 2 (index 1) is compared with frame 1 (index 0)
    MatrixSequence two;
    two.id = "two";
    two.frames = {Matrix(1, 1, 3.0), Matrix(1, 1, 5.0)};
    std::vector<Matrix> recon = {Matrix(1, 1, 5.0), Matrix(1, 1, 2.0)};
    // step 1 vs frame 2: (5-5)^2=0 ; step 2 vs frame 1: (2-3)^2=1 ; mean 0.5
    CHECK(models::score_reconstruction(two, recon, LossKind::kFrobeniusMse) == doctest::Approx(0.5));

    // random case equals a per-step loop
    auto r = random_sequence(5, 3, 3, rng);
    std::vector<Matrix> guesses;
    for (int s = 0; s < 5; ++s) guesses.push_back(random_matrix(3, 3, rng));
    double acc = 0.0;
    for (int s = 0; s < 5; ++s)
        acc += matad::matgrad::frobenius_mse(r.frames[4 - s], guesses[s]);
    CHECK(models::score_reconstruction(r, guesses, LossKind::kFrobeniusMse) ==
          doctest::Approx(acc / 5).epsilon(1e-12));

    guesses.pop_back();
    CHECK_THROWS_AS(models::score_reconstruction(r, guesses, LossKind::kFrobeniusMse),
                    matad::ContractError);
}

TEST_CASE("predict_future length and causality") {
    std::mt19937_64 rng(5);
    auto spec = small_spec(models::Strategy::kEncoderPredictor);
    auto m = models::init_model(spec, 4, 4, 11);
    auto seq = random_sequence(8, 4, 4, rng);
    auto preds = models::predict_future(seq, m);
    CHECK(preds.size() == 4);  // T_e = 4 by default

    // perturbing future frames must not change predictions
    auto perturbed = seq;
    for (int t = 4; t < 8; ++t)
        for (double& v : perturbed.frames[t].data) v += 0.37;
    auto preds2 = models::predict_future(perturbed, m);
    for (size_t i = 0; i < preds.size(); ++i) CHECK(max_abs_diff(preds[i], preds2[i]) == 0.0);
}

TEST_CASE("score_prediction basics and loop oracle") {
    std::mt19937_64 rng(6);
    auto seq = random_sequence(6, 2, 3, rng);
    std::vector<Matrix> exact(seq.frames.begin() + 3, seq.frames.end());
    CHECK(models::score_prediction(seq, exact, 3, LossKind::kFrobeniusMse) == 0.0);

    MatrixSequence tiny;
    tiny.id = "tiny";
    tiny.frames = {Matrix(1, 1, 0.0), Matrix(1, 1, 2.0)};
    std::vector<Matrix> one = {Matrix(1, 1, 1.0)};
    CHECK(models::score_prediction(tiny, one, 1, LossKind::kFrobeniusMse) == doctest::Approx(1.0));

    std::vector<Matrix> guesses;
    for (int s = 0; s < 3; ++s) guesses.push_back(random_matrix(2, 3, rng));
    double acc = 0.0;
    for (int s = 0; s < 3; ++s) acc += matad::matgrad::frobenius_mse(seq.frames[3 + s], guesses[s]);
    CHECK(models::score_prediction(seq, guesses, 3, LossKind::kFrobeniusMse) ==
          doctest::Approx(acc / 3).epsilon(1e-12));

    CHECK_THROWS_AS(models::score_prediction(seq, guesses, 4, LossKind::kFrobeniusMse),
                    matad::ContractError);
}

TEST_CASE("temporal_difference basics and telescoping") {
    MatrixSequence constant;
    constant.id = "const";
    for (int t = 0; t < 4; ++t) constant.frames.push_back(Matrix(2, 2, 3.5));
    auto d = models::temporal_difference(constant);
    CHECK(d.length() == 3);
    for (const auto& f : d.frames)
        for (double v : f.data) CHECK(v == 0.0);

    MatrixSequence ramp;
    ramp.id = "ramp";
    for (int t = 0; t < 5; ++t) ramp.frames.push_back(Matrix(2, 2, 1.5 * t));
    auto rd = models::temporal_difference(ramp);
    for (const auto& f : rd.frames)
        for (double v : f.data) CHECK(v == doctest::Approx(1.5));

    std::mt19937_64 rng(7);
    auto seq = random_sequence(6, 3, 2, rng);
    auto diff = models::temporal_difference(seq);
    Matrix acc = seq.frames[0];
    for (int t = 0; t < diff.length(); ++t) {
        for (int i = 0; i < acc.size(); ++i) acc.data[i] += diff.frames[t].data[i];
        CHECK(max_abs_diff(acc, seq.frames[t + 1]) < 1e-12);
    }

    MatrixSequence single;
    single.id = "single";
    single.frames.push_back(Matrix(2, 2, 0.0));
    CHECK_THROWS_AS(models::temporal_difference(single), matad::ContractError);
}

TEST_CASE("vectors_to_matrix_blocks grouping rules") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> dist(-1, 1);
    auto vecs = [&](int T, int d) {
        std::vector<std::vector<double>> v(T, std::vector<double>(d));
        for (auto& row : v)
            for (double& x : row) x = dist(rng);
        return v;
    };

    auto v20 = vecs(20, 7);
    auto b = models::vectors_to_matrix_blocks(v20, 5);
    CHECK(b.length() == 4);
    CHECK(b.n_r() == 5);
    CHECK(b.n_c() == 7);

    auto b1 = models::vectors_to_matrix_blocks(v20, 1);
    CHECK(b1.length() == 20);
    CHECK(b1.n_r() == 1);

    auto v23 = vecs(23, 4);
    auto b23 = models::vectors_to_matrix_blocks(v23, 5);
    CHECK(b23.length() == 4);  // vectors 21..23 dropped

    // every kept vector round-trips exactly
    for (int f = 0; f < b23.length(); ++f)
        for (int r = 0; r < 5; ++r)
            for (int j = 0; j < 4; ++j) CHECK(b23.frames[f](r, j) == v23[f * 5 + r][j]);

    CHECK_THROWS_AS(models::vectors_to_matrix_blocks(vecs(3, 4), 5), matad::ContractError);
}

TEST_CASE("autoencoder overfits a single repeated constant sequence") {
    std::mt19937_64 rng(9);
    MatrixSequence seq = random_sequence(4, 3, 3, rng);
    Dataset data{seq, seq, seq, seq};

    auto spec = small_spec(models::Strategy::kAutoencoder);
    matad::train::TrainConfig cfg;
    cfg.learning_rate = 3e-2;
    cfg.max_epochs = 300;
    cfg.patience = 300;
    cfg.batch_size = 4;
    cfg.seed = 1;
    auto res = matad::train::fit(spec, data, cfg);

    auto recon = models::reconstruct(seq, res.model);
    CHECK(models::score_reconstruction(seq, recon, LossKind::kFrobeniusMse) < 1e-3);
}

TEST_CASE("predictor overfits a deterministic shift sequence") {
    // fixed rotation by one column each step
    MatrixSequence seq;
    seq.id = "rot";
    std::mt19937_64 rng(10);
    Matrix frame = random_matrix(3, 4, rng, 0.0, 1.0);
    for (int t = 0; t < 8; ++t) {
        seq.frames.push_back(frame);
        Matrix next(3, 4);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 4; ++j) next(i, j) = frame(i, (j + 3) % 4);
        frame = next;
    }
    Dataset data{seq, seq, seq, seq};

    auto spec = small_spec(models::Strategy::kEncoderPredictor);
    spec.k_r = 4;
    spec.k_c = 4;
    matad::train::TrainConfig cfg;
    cfg.learning_rate = 3e-2;
    cfg.max_epochs = 500;
    cfg.patience = 500;
    cfg.batch_size = 4;
    cfg.seed = 2;
    auto res = matad::train::fit(spec, data, cfg);

    auto preds = models::predict_future(seq, res.model);
    CHECK(models::score_prediction(seq, preds, 4, LossKind::kFrobeniusMse) < 1e-3);
}

TEST_CASE("score_dataset is deterministic, non-negative, and skips bad shapes") {
    std::mt19937_64 rng(11);
    auto spec = small_spec(models::Strategy::kEncoderPredictor);
    auto m = models::init_model(spec, 4, 4, 13);
    Dataset data;
    for (int i = 0; i < 6; ++i) {
        auto s = random_sequence(6, 4, 4, rng);
        s.id = "seq" + std::to_string(i);
        s.label = i % 2;
        data.push_back(std::move(s));
    }
    auto bad = random_sequence(6, 5, 5, rng);
    bad.id = "bad";
    data.push_back(std::move(bad));

    std::vector<std::string> warnings;
    auto scores1 = models::score_dataset(data, m, &warnings);
    auto scores2 = models::score_dataset(data, m, nullptr);
    REQUIRE(scores1.size() == 6);  // bad one skipped
    CHECK(warnings.size() == 1);
    CHECK(warnings[0].find("bad") != std::string::npos);
    for (size_t i = 0; i < scores1.size(); ++i) {
        CHECK(scores1[i].score >= 0.0);
        CHECK(scores1[i].score == scores2[i].score);
        CHECK(scores1[i].id == data[i].id);
    }
}

TEST_CASE("reversed pairing bookkeeping") {
    // labelling decode outputs T+1..2T, target t satisfies t + position = 2T+1
    std::mt19937_64 rng(12);
    auto spec = small_spec(models::Strategy::kAutoencoder);
    auto m = models::init_model(spec, 3, 3, 5);
    auto seq = random_sequence(5, 3, 3, rng);
    Tape t;
    auto g = models::build_sequence_graph(t, m, 0, 1, seq, spec.loss, false, 0);
    const int T = 5;
    for (int s = 0; s < T; ++s) {
        const int decode_label = T + 1 + s;              // 1-based decode step T+1..2T
        const int target_1based = g.target_index[s] + 1;  // X_t
        CHECK(decode_label + target_1based == 2 * T + 1);
    }
}

TEST_CASE("layerwise stacking: shapes, freezing, and distinct scores") {
    std::mt19937_64 rng(13);
    Dataset data;
    for (int i = 0; i < 8; ++i) {
        auto s = random_sequence(6, 4, 4, rng);
        s.id = "s" + std::to_string(i);
        data.push_back(std::move(s));
    }

    auto spec = small_spec(models::Strategy::kAutoencoder);
    spec.layers = 2;
    spec.k_r = 3;
    spec.k_c = 3;
    spec.k2_r = 2;
    spec.k2_c = 2;

    matad::train::TrainConfig cfg;
    cfg.max_epochs = 3;
    cfg.patience = 3;
    cfg.batch_size = 8;
    cfg.seed = 3;

    // train layer 1 alone first to capture its parameters
    auto spec1 = spec;
    spec1.layers = 1;
    auto single = matad::train::fit(spec1, data, cfg);

    auto stacked = matad::train::stack_layerwise_train(spec, data, cfg);

    // layer-2 input shape is layer-1's hidden shape
    auto lifted = models::hidden_sequence(stacked.model, 1, data[0]);
    CHECK(lifted.n_r() == 3);
    CHECK(lifted.n_c() == 3);

    // freezing: layer-1 params identical to the single-layer run (same seed
    // and shapes mean identical init and identical layer-1 training)
    auto p_single = models::collect_params(single.model, 0);
    auto p_stacked = models::collect_params(stacked.model, 0);
    REQUIRE(p_single.size() == p_stacked.size());
    // dims of heads differ only if shapes differ; compare cell params (first 40)
    for (size_t i = 0; i < 40; ++i) CHECK(p_single[i]->data == p_stacked[i]->data);

    // scores differ between 1- and 2-layer models on the same data
    auto s1 = models::score_dataset(data, single.model);
    auto s2 = models::score_dataset(data, stacked.model);
    bool any_diff = false;
    for (size_t i = 0; i < s1.size(); ++i) any_diff |= s1[i].score != s2[i].score;
    CHECK(any_diff);
}

TEST_CASE("joint 2-layer training runs and scores") {
    std::mt19937_64 rng(14);
    Dataset data;
    for (int i = 0; i < 6; ++i) data.push_back(random_sequence(6, 4, 4, rng));
    for (size_t i = 0; i < data.size(); ++i) data[i].id = "j" + std::to_string(i);

    auto spec = small_spec(models::Strategy::kEncoderPredictor);
    spec.layers = 2;
    spec.stack_mode = models::StackMode::kJoint;
    matad::train::TrainConfig cfg;
    cfg.max_epochs = 2;
    cfg.patience = 2;
    cfg.batch_size = 6;
    cfg.seed = 4;
    auto res = matad::train::fit(spec, data, cfg);
    auto scores = models::score_dataset(data, res.model);
    CHECK(scores.size() == data.size());
    for (const auto& s : scores) CHECK(std::isfinite(s.score));
}

TEST_CASE("model gradients pass finite differences end to end") {
    std::mt19937_64 rng(15);
    for (auto strategy : {models::Strategy::kAutoencoder, models::Strategy::kEncoderPredictor}) {
        for (auto loss : {LossKind::kFrobeniusMse, LossKind::kBceWithLogits}) {
            auto spec = small_spec(strategy);
            spec.k_r = 2;
            spec.k_c = 2;
            spec.loss = loss;
            auto m = models::init_model(spec, 3, 3, 17);
            auto seq = random_sequence(4, 3, 3, rng);
            if (loss == LossKind::kBceWithLogits)
                for (auto& f : seq.frames)
                    for (double& v : f.data) v = v > 0 ? 1.0 : 0.0;

            auto params = models::collect_params(m, 0);
            // check build_sequence_graph's own binding against central differences
            Tape t0;
            auto g0 = models::build_sequence_graph(t0, m, 0, 1, seq, loss, false, 0);
            t0.backward(g0.loss);

            const double eps = 1e-5;
            double max_rel = 0.0;
            std::mt19937_64 pick(5);
            for (size_t pi = 0; pi < params.size(); ++pi) {
                Matrix* p = const_cast<Matrix*>(params[pi]);
                std::uniform_int_distribution<int> entry(0, p->size() - 1);
                for (int rep = 0; rep < 2; ++rep) {
                    const int idx = entry(pick);
                    const double saved = p->data[idx];
                    auto eval = [&](double v) {
                        p->data[idx] = v;
                        Tape t;
                        auto g = models::build_sequence_graph(t, m, 0, 1, seq, loss, false, 0);
                        return t.scalar(g.loss);
                    };
                    const double fp = eval(saved + eps), fm = eval(saved - eps);
                    p->data[idx] = saved;
                    const double numeric = (fp - fm) / (2 * eps);
                    const double analytic = t0.grad(g0.param_ids[pi]).data[idx];
                    const double denom = std::max({std::fabs(analytic), std::fabs(numeric), 1e-3});
                    max_rel = std::max(max_rel, std::fabs(analytic - numeric) / denom);
                }
            }
            CHECK(max_rel < 1e-4);
        }
    }
}

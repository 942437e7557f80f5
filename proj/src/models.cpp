#include "matad/models.hpp"

#include <cmath>
#include <iostream>

namespace matad::models {

namespace {

struct LayerShape {
    // matrix layer: input in_r x in_c, hidden k_r x k_c
    // vector layer: input in_dim x 1, hidden k x 1
    int in_r = 0, in_c = 0;
    int k_r = 0, k_c = 0;
};

std::vector<LayerShape> layer_shapes(const ModelSpec& spec, int n_r, int n_c) {
    if (spec.layers < 1 || spec.layers > 2) throw ContractError("model layers must be 1 or 2");
    std::vector<LayerShape> shapes(spec.layers);
    if (spec.cell == CellKind::kMatLstm) {
        shapes[0] = {n_r, n_c, spec.k_r, spec.k_c};
        if (spec.layers == 2) {
            const int k2r = spec.k2_r > 0 ? spec.k2_r : spec.k_r;
            const int k2c = spec.k2_c > 0 ? spec.k2_c : spec.k_c;
            shapes[1] = {spec.k_r, spec.k_c, k2r, k2c};
        }
    } else {
        shapes[0] = {n_r * n_c, 1, spec.k, 1};
        if (spec.layers == 2) {
            const int k2 = spec.k2 > 0 ? spec.k2 : spec.k;
            shapes[1] = {spec.k, 1, k2, 1};
        }
    }
    return shapes;
}

Matrix flatten(const Matrix& m) {
    Matrix v = m;
    v.rows = m.size();
    v.cols = 1;
    return v;
}

Matrix reshape_like(Matrix m, int rows, int cols) {
    if (m.size() != rows * cols)
        throw ShapeError("reshape: " + m.shape_str() + " to " + std::to_string(rows) + "x" +
                         std::to_string(cols));
    m.rows = rows;
    m.cols = cols;
    return m;
}

struct BoundLayer {
    std::variant<cells::MatLstmNodes, cells::VecLstmNodes> encoder, decoder;
    std::variant<cells::MatnetNodes, cells::DenseHeadNodes> head;
    bool is_mat = false;
};

BoundLayer bind_layer(Tape& t, const LayerParams& lp) {
    BoundLayer b;
    if (const auto* mat = std::get_if<MatLayer>(&lp)) {
        b.is_mat = true;
        b.encoder = cells::bind(t, mat->encoder);
        b.decoder = cells::bind(t, mat->decoder);
        b.head = cells::bind(t, mat->head);
    } else {
        const auto& vec = std::get<VecLayer>(lp);
        b.encoder = cells::bind(t, vec.encoder);
        b.decoder = cells::bind(t, vec.decoder);
        b.head = cells::bind(t, vec.head);
    }
    return b;
}

cells::MatStateNodes cell_step(Tape& t, const BoundLayer& b, bool use_decoder, NodeId x,
                               cells::MatStateNodes prev) {
    const auto& params = use_decoder ? b.decoder : b.encoder;
    if (b.is_mat) return cells::matlstm_step(t, x, prev, std::get<cells::MatLstmNodes>(params));
    return cells::lstm_step(t, x, prev, std::get<cells::VecLstmNodes>(params));
}

NodeId head_forward(Tape& t, const BoundLayer& b, NodeId h, bool training, std::mt19937_64* rng) {
    if (b.is_mat) return cells::matnet_forward(t, h, std::get<cells::MatnetNodes>(b.head), training, rng);
    return cells::dense_forward(t, h, std::get<cells::DenseHeadNodes>(b.head), training, rng);
}

}  // namespace

int effective_context(const ModelSpec& spec, int T) {
    const int t_e = spec.context_len > 0 ? spec.context_len : T / 2;
    if (t_e < 1 || t_e >= T)
        throw ContractError("context length " + std::to_string(t_e) + " out of range for T=" +
                            std::to_string(T));
    return t_e;
}

LossKind layer_loss(const ModelSpec& spec, int layer) {
    // hidden states are continuous regardless of the data's loss
    return layer == 0 ? spec.loss : LossKind::kFrobeniusMse;
}

Model init_model(const ModelSpec& spec, int n_r, int n_c, uint64_t seed) {
    if (n_r <= 0 || n_c <= 0) throw ContractError("init_model: frame dims must be positive");
    Model m;
    m.spec = spec;
    m.n_r = n_r;
    m.n_c = n_c;
    std::mt19937_64 rng(seed);
    const auto shapes = layer_shapes(spec, n_r, n_c);
    for (int l = 0; l < spec.layers; ++l) {
        const auto& s = shapes[l];
        // layerwise: every layer reconstructs its own input; joint: only the
        // top layer carries a head, mapping straight to the data space.
        const bool top = l == spec.layers - 1;
        const bool has_head = spec.stack_mode == StackMode::kLayerwise || top;
        int out_r = s.in_r, out_c = s.in_c;
        if (spec.stack_mode == StackMode::kJoint && top) {
            out_r = spec.cell == CellKind::kMatLstm ? n_r : n_r * n_c;
            out_c = spec.cell == CellKind::kMatLstm ? n_c : 1;
        }
        if (spec.cell == CellKind::kMatLstm) {
            MatLayer layer;
            layer.encoder = cells::init_matlstm(s.in_r, s.in_c, s.k_r, s.k_c, rng);
            layer.decoder = cells::init_matlstm(s.in_r, s.in_c, s.k_r, s.k_c, rng);
            if (has_head)
                layer.head = cells::init_matnet(s.k_r, s.k_c, out_r, out_c, spec.head_hidden,
                                                spec.dropout_rate, rng);
            m.layers.emplace_back(std::move(layer));
        } else {
            VecLayer layer;
            layer.encoder = cells::init_veclstm(s.in_r, s.k_r, rng);
            layer.decoder = cells::init_veclstm(s.in_r, s.k_r, rng);
            if (has_head)
                layer.head = cells::init_dense_head(s.k_r, out_r, spec.head_hidden,
                                                    spec.dropout_rate, rng);
            m.layers.emplace_back(std::move(layer));
        }
    }
    return m;
}

long param_count(const Model& m) {
    long n = 0;
    for (const auto& lp : m.layers) {
        if (const auto* mat = std::get_if<MatLayer>(&lp))
            n += cells::param_count(mat->encoder) + cells::param_count(mat->decoder) +
                 cells::param_count(mat->head);
        else {
            const auto& vec = std::get<VecLayer>(lp);
            n += cells::param_count(vec.encoder) + cells::param_count(vec.decoder) +
                 cells::param_count(vec.head);
        }
    }
    return n;
}

long param_count(const ModelSpec& spec, int n_r, int n_c) {
    return param_count(init_model(spec, n_r, n_c, 0));
}

std::vector<Matrix*> collect_params(Model& m, int layer) {
    std::vector<Matrix*> out;
    auto push = [&out](Matrix& mat) { out.push_back(&mat); };
    auto& lp = m.layers.at(layer);
    if (auto* mat = std::get_if<MatLayer>(&lp)) {
        cells::visit_params(mat->encoder, push);
        cells::visit_params(mat->decoder, push);
        cells::visit_params(mat->head, push);
    } else {
        auto& vec = std::get<VecLayer>(lp);
        cells::visit_params(vec.encoder, push);
        cells::visit_params(vec.decoder, push);
        cells::visit_params(vec.head, push);
    }
    return out;
}

std::vector<const Matrix*> collect_params(const Model& m, int layer) {
    auto ptrs = collect_params(const_cast<Model&>(m), layer);
    return {ptrs.begin(), ptrs.end()};
}

MatrixSequence temporal_difference(const MatrixSequence& seq) {
    seq.validate();
    if (seq.length() < 2) throw ContractError("temporal_difference: need at least 2 frames");
    MatrixSequence out;
    out.label = seq.label;
    out.id = seq.id;
    out.frames.reserve(seq.length() - 1);
    for (int t = 0; t + 1 < seq.length(); ++t) {
        Matrix d(seq.n_r(), seq.n_c());
        for (int i = 0; i < d.size(); ++i) d.data[i] = seq.frames[t + 1].data[i] - seq.frames[t].data[i];
        out.frames.push_back(std::move(d));
    }
    return out;
}

MatrixSequence vectors_to_matrix_blocks(const std::vector<std::vector<double>>& vseq, int block) {
    if (block < 1) throw ContractError("vectors_to_matrix_blocks: block must be >= 1");
    const int T = static_cast<int>(vseq.size());
    if (T < block) throw ContractError("vectors_to_matrix_blocks: fewer vectors than block size");
    const int d = static_cast<int>(vseq.front().size());
    MatrixSequence out;
    const int n_frames = T / block;
    out.frames.reserve(n_frames);
    for (int f = 0; f < n_frames; ++f) {
        Matrix m(block, d);
        for (int r = 0; r < block; ++r) {
            const auto& v = vseq[static_cast<size_t>(f) * block + r];
            if (static_cast<int>(v.size()) != d)
                throw ShapeError("vectors_to_matrix_blocks: ragged vector lengths");
            for (int j = 0; j < d; ++j) m(r, j) = v[j];
        }
        out.frames.push_back(std::move(m));
    }
    return out;
}

MatrixSequence transform_input(const MatrixSequence& seq, const ModelSpec& spec) {
    if (spec.input_transform == InputTransform::kTemporalDifference) return temporal_difference(seq);
    MatrixSequence copy = seq;
    return copy;
}

SequenceGraph build_sequence_graph(Tape& t, const Model& m, int first_layer, int n_layers,
                                   const MatrixSequence& local, LossKind loss_kind, bool training,
                                   uint64_t dropout_seed) {
    local.validate();
    if (first_layer < 0 || first_layer + n_layers > static_cast<int>(m.layers.size()))
        throw ContractError("build_sequence_graph: layer range out of bounds");
    const ModelSpec& spec = m.spec;
    const bool vec = spec.cell == CellKind::kVecLstm;
    const auto shapes = layer_shapes(spec, m.n_r, m.n_c);

    SequenceGraph g;

    const auto base = static_cast<cells::NodeId>(t.size());
    std::vector<BoundLayer> bound;
    for (int l = first_layer; l < first_layer + n_layers; ++l)
        bound.push_back(bind_layer(t, m.layers[l]));
    for (auto id = base; id < static_cast<cells::NodeId>(t.size()); ++id) g.param_ids.push_back(id);

    const int T = local.length();
    const bool predictor = spec.strategy == Strategy::kEncoderPredictor;
    const int t_e = predictor ? effective_context(spec, T) : T;
    const int n_steps = predictor ? T - t_e : T;

    auto local_input = [&](int idx) {
        const Matrix& f = local.frames[idx];
        // the bottom of this range takes raw frames; flatten for vector cells
        return t.input(vec && first_layer == 0 ? flatten(f) : f);
    };

    // encoder: fold the context through the layer chain
    std::vector<cells::MatStateNodes> enc(n_layers);
    for (int i = 0; i < n_layers; ++i) {
        const auto& s = shapes[first_layer + i];
        enc[i] = cells::zero_state(t, s.k_r, s.k_c);
    }
    for (int step = 0; step < t_e; ++step) {
        NodeId x = local_input(step);
        for (int i = 0; i < n_layers; ++i) {
            enc[i] = cell_step(t, bound[i], false, x, enc[i]);
            x = enc[i].h;
        }
    }

    // decoder starts from the encoder's final state
    std::vector<cells::MatStateNodes> dec = enc;
    std::mt19937_64 drop_rng(dropout_seed);
    const auto& sh0 = shapes[first_layer];
    auto zero_input = [&]() { return t.input(Matrix(sh0.in_r, sh0.in_c, 0.0)); };

    NodeId prev_out = -1;
    for (int s = 0; s < n_steps; ++s) {
        NodeId x;
        if (s == 0)
            x = predictor ? local_input(t_e - 1) : zero_input();
        else if (spec.conditional_decoding)
            x = loss_kind == LossKind::kBceWithLogits ? t.sigmoid(prev_out) : prev_out;
        else
            x = zero_input();

        for (int i = 0; i < n_layers; ++i) {
            dec[i] = cell_step(t, bound[i], true, x, dec[i]);
            x = dec[i].h;
        }
        NodeId out = head_forward(t, bound.back(), dec[n_layers - 1].h, training,
                                  training ? &drop_rng : nullptr);
        g.outputs.push_back(out);
        g.target_index.push_back(predictor ? t_e + s : T - 1 - s);
        prev_out = out;
    }

    std::vector<NodeId> step_losses;
    step_losses.reserve(n_steps);
    for (int s = 0; s < n_steps; ++s) {
        const Matrix& target = local.frames[g.target_index[s]];
        NodeId y = t.input(vec && first_layer == 0 ? flatten(target) : target);
        step_losses.push_back(t.loss(loss_kind, y, g.outputs[s]));
    }
    g.loss = t.mean(step_losses);
    return g;
}

MatrixSequence hidden_sequence(const Model& m, int upto, const MatrixSequence& seq) {
    MatrixSequence cur = seq;
    const bool vec = m.spec.cell == CellKind::kVecLstm;
    for (int l = 0; l < upto; ++l) {
        Tape t;
        BoundLayer b = bind_layer(t, m.layers[l]);
        const auto shapes = layer_shapes(m.spec, m.n_r, m.n_c);
        auto state = cells::zero_state(t, shapes[l].k_r, shapes[l].k_c);
        MatrixSequence next;
        next.label = cur.label;
        next.id = cur.id;
        for (int step = 0; step < cur.length(); ++step) {
            NodeId x = t.input(vec && l == 0 ? flatten(cur.frames[step]) : cur.frames[step]);
            state = cell_step(t, b, false, x, state);
            next.frames.push_back(t.value(state.h));
        }
        cur = std::move(next);
    }
    return cur;
}

MatState encode(const MatrixSequence& seq, const cells::MatLstmParams& p) {
    seq.validate();
    Tape t;
    auto pn = cells::bind(t, p);
    auto state = cells::zero_state(t, p.input_gate.b.rows, p.input_gate.b.cols);
    for (const auto& f : seq.frames) state = cells::matlstm_step(t, t.input(f), state, pn);
    return {t.value(state.h), t.value(state.c)};
}

MatState encode(const MatrixSequence& seq, const cells::VecLstmParams& p) {
    seq.validate();
    Tape t;
    auto pn = cells::bind(t, p);
    const int k = p.input_gate.b.rows;
    auto state = cells::zero_state(t, k, 1);
    for (const auto& f : seq.frames) state = cells::lstm_step(t, t.input(flatten(f)), state, pn);
    return {t.value(state.h), t.value(state.c)};
}

namespace {

// Decode in the top layer's local space; shared by reconstruct/predict_future.
std::vector<Matrix> decode_outputs(const MatrixSequence& seq, const Model& m) {
    const MatrixSequence transformed = transform_input(seq, m.spec);
    const int top = static_cast<int>(m.layers.size()) - 1;
    Tape t;
    std::vector<Matrix> outs;
    if (m.spec.stack_mode == StackMode::kJoint) {
        auto g = build_sequence_graph(t, m, 0, static_cast<int>(m.layers.size()), transformed,
                                      m.spec.loss, false, 0);
        for (NodeId id : g.outputs) outs.push_back(t.value(id));
    } else {
        const MatrixSequence local = hidden_sequence(m, top, transformed);
        auto g = build_sequence_graph(t, m, top, 1, local, layer_loss(m.spec, top), false, 0);
        for (NodeId id : g.outputs) outs.push_back(t.value(id));
    }
    // vector models emit flat columns in the data space; give frames back
    if (m.spec.cell == CellKind::kVecLstm && (top == 0 || m.spec.stack_mode == StackMode::kJoint))
        for (auto& o : outs) o = reshape_like(std::move(o), transformed.n_r(), transformed.n_c());
    return outs;
}

}  // namespace

std::vector<Matrix> reconstruct(const MatrixSequence& seq, const Model& m) {
    if (m.spec.strategy != Strategy::kAutoencoder)
        throw ContractError("reconstruct: model strategy is not autoencoder");
    return decode_outputs(seq, m);
}

double score_reconstruction(const MatrixSequence& seq, const std::vector<Matrix>& recon,
                            LossKind loss) {
    const int T = seq.length();
    if (static_cast<int>(recon.size()) != T)
        throw ContractError("score_reconstruction: got " + std::to_string(recon.size()) +
                            " reconstructions for T=" + std::to_string(T));
    double acc = 0.0;
    for (int s = 0; s < T; ++s) {
        const Matrix& target = seq.frames[T - 1 - s];
        Matrix pred = recon[s];
        if (!pred.same_shape(target)) pred = reshape_like(std::move(pred), target.rows, target.cols);
        acc += matgrad::loss_value(loss, target, pred);
    }
    return acc / T;
}

std::vector<Matrix> predict_future(const MatrixSequence& seq, const Model& m) {
    if (m.spec.strategy != Strategy::kEncoderPredictor)
        throw ContractError("predict_future: model strategy is not encoder-predictor");
    return decode_outputs(seq, m);
}

double score_prediction(const MatrixSequence& seq, const std::vector<Matrix>& preds, int t_e,
                        LossKind loss) {
    const int T = seq.length();
    if (t_e < 1 || t_e >= T) throw ContractError("score_prediction: context length out of range");
    if (static_cast<int>(preds.size()) != T - t_e)
        throw ContractError("score_prediction: got " + std::to_string(preds.size()) +
                            " predictions, want " + std::to_string(T - t_e));
    double acc = 0.0;
    for (int s = 0; s < T - t_e; ++s) {
        const Matrix& target = seq.frames[t_e + s];
        Matrix pred = preds[s];
        if (!pred.same_shape(target)) pred = reshape_like(std::move(pred), target.rows, target.cols);
        acc += matgrad::loss_value(loss, target, pred);
    }
    return acc / (T - t_e);
}

double sequence_score(const Model& m, const MatrixSequence& seq) {
    const MatrixSequence transformed = transform_input(seq, m.spec);
    Tape t;
    if (m.spec.stack_mode == StackMode::kJoint) {
        auto g = build_sequence_graph(t, m, 0, static_cast<int>(m.layers.size()), transformed,
                                      m.spec.loss, false, 0);
        return t.scalar(g.loss);
    }
    const int top = static_cast<int>(m.layers.size()) - 1;
    const MatrixSequence local = hidden_sequence(m, top, transformed);
    auto g = build_sequence_graph(t, m, top, 1, local, layer_loss(m.spec, top), false, 0);
    return t.scalar(g.loss);
}

std::vector<ScoredSequence> score_dataset(const Dataset& data, const Model& m,
                                          std::vector<std::string>* warnings) {
    const int n = static_cast<int>(data.size());
    std::vector<ScoredSequence> results(n);
    std::vector<char> ok(n, 0);
    std::vector<std::string> errors(n);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
        try {
            results[i] = {data[i].id, sequence_score(m, data[i]), data[i].label};
            ok[i] = 1;
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    }
    std::vector<ScoredSequence> out;
    out.reserve(n);
    for (int i = 0; i < n; ++i) {
        if (ok[i]) {
            out.push_back(std::move(results[i]));
            continue;
        }
        const std::string msg = "skipping sequence " + data[i].id + ": " + errors[i];
        if (warnings)
            warnings->push_back(msg);
        else
            std::cerr << "warning: " << msg << "\n";
    }
    return out;
}

}  // namespace matad::models

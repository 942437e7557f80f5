#pragma once

#include <variant>

#include "matad/cells.hpp"
#include "matad/sequence.hpp"

namespace matad::models {

using cells::MatState;

enum class CellKind : uint8_t { kMatLstm, kVecLstm };
enum class Strategy : uint8_t { kAutoencoder, kEncoderPredictor };
enum class InputTransform : uint8_t { kIdentity, kTemporalDifference };
enum class StackMode : uint8_t { kLayerwise, kJoint };

struct ModelSpec {
    CellKind cell = CellKind::kMatLstm;
    Strategy strategy = Strategy::kEncoderPredictor;
    int layers = 1;
    int k_r = 8, k_c = 8;    // matLSTM hidden dims
    int k2_r = 0, k2_c = 0;  // second layer dims; 0 = same as first
    int k = 32, k2 = 0;      // vector LSTM hidden sizes
    LossKind loss = LossKind::kFrobeniusMse;
    bool conditional_decoding = true;
    InputTransform input_transform = InputTransform::kIdentity;
    int context_len = 0;  // T_e for the predictor; 0 = floor(T/2)
    bool head_hidden = true;
    double dropout_rate = 0.1;
    StackMode stack_mode = StackMode::kLayerwise;
};

struct MatLayer {
    cells::MatLstmParams encoder, decoder;
    cells::MatnetParams head;  // maps hidden state back to the layer's input shape
};
struct VecLayer {
    cells::VecLstmParams encoder, decoder;
    cells::DenseHeadParams head;
};
using LayerParams = std::variant<MatLayer, VecLayer>;

struct Model {
    ModelSpec spec;
    int n_r = 0, n_c = 0;  // frame shape the model consumes (after input transform)
    std::vector<LayerParams> layers;
};

struct ScoredSequence {
    std::string id;
    double score = 0.0;
    std::optional<int> label;
};

// ---- model construction -----------------------------------------------------
Model init_model(const ModelSpec& spec, int n_r, int n_c, uint64_t seed);
long param_count(const Model& m);
long param_count(const ModelSpec& spec, int n_r, int n_c);

// Flat parameter pointers for one stack layer, in binding order.
std::vector<Matrix*> collect_params(Model& m, int layer);
std::vector<const Matrix*> collect_params(const Model& m, int layer);

// Effective context length for the predictor strategy.
int effective_context(const ModelSpec& spec, int T);

// ---- sequence utilities ------------------------------------------------------
// ΔX_t = X_{t+1} - X_t; output has length T-1.
MatrixSequence temporal_difference(const MatrixSequence& seq);
// Stacks consecutive groups of `block` vectors as matrix rows; the incomplete
// tail is dropped.
MatrixSequence vectors_to_matrix_blocks(const std::vector<std::vector<double>>& vseq, int block);
// Applies the model's configured input transform.
MatrixSequence transform_input(const MatrixSequence& seq, const ModelSpec& spec);

// ---- unrolled graphs ---------------------------------------------------------
// One sequence unrolled on a tape across stack layers [first_layer,
// first_layer+n_layers). `local` must already be in the base layer's input
// space. Parameters of those layers are bound first, so their flat gradient
// order matches collect_params.
struct SequenceGraph {
    std::vector<cells::NodeId> param_ids;  // flat, binding order
    std::vector<cells::NodeId> outputs;    // decoder emissions, in order
    std::vector<int> target_index;         // frame index each output is scored against
    cells::NodeId loss = -1;               // scalar mean per-step loss
};
SequenceGraph build_sequence_graph(Tape& t, const Model& m, int first_layer, int n_layers,
                                   const MatrixSequence& local, LossKind loss_kind, bool training,
                                   uint64_t dropout_seed);

// Loss kind used when training/scoring stack layer `layer` in layerwise mode:
// the configured loss at the bottom, squared error on hidden states above.
LossKind layer_loss(const ModelSpec& spec, int layer);

// Hidden-state sequence after folding `seq` through the encoders of layers
// [0, upto); upto = 0 returns the input unchanged.
MatrixSequence hidden_sequence(const Model& m, int upto, const MatrixSequence& seq);

// ---- spec-level operations ---------------------------------------------------
// Final encoder state after folding all frames.
MatState encode(const MatrixSequence& seq, const cells::MatLstmParams& p);
MatState encode(const MatrixSequence& seq, const cells::VecLstmParams& p);

// Autoencoder decode: returns T head outputs; emission s (0-based) is scored
// against frame T-1-s.
std::vector<Matrix> reconstruct(const MatrixSequence& seq, const Model& m);
double score_reconstruction(const MatrixSequence& seq, const std::vector<Matrix>& recon, LossKind loss);

// Predictor decode: returns T - T_e head outputs in forward order.
std::vector<Matrix> predict_future(const MatrixSequence& seq, const Model& m);
double score_prediction(const MatrixSequence& seq, const std::vector<Matrix>& preds, int t_e,
                        LossKind loss);

// Anomaly score of one sequence under the model's strategy (dropout off).
double sequence_score(const Model& m, const MatrixSequence& seq);

// Scores every sequence; shape failures are skipped with a warning collected
// into `warnings` (stderr when null). Parallel over sequences, output order
// fixed by input order.
std::vector<ScoredSequence> score_dataset(const Dataset& data, const Model& m,
                                          std::vector<std::string>* warnings = nullptr);

}  // namespace matad::models

#include "matad/runconfig.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace matad::cli {

namespace {

const std::map<std::string, std::string>& default_values() {
    static const std::map<std::string, std::string> defaults = {
        // data generation
        {"data.kind", "synth"},
        {"data.n_r", "10"},
        {"data.n_c", "10"},
        {"data.T", "20"},
        {"data.n", "5000"},
        {"data.outlier_ratio", "0.05"},
        {"data.seed", "0"},
        {"data.shift_min", "1"},
        {"data.shift_max", "5"},
        {"data.fixed_shift", "false"},
        {"data.fixed_perm", "false"},
        {"data.zero_noise_p", "0"},
        {"data.salt_pepper_p", "0"},
        {"data.canvas", "28"},
        {"data.speed", "2"},
        {"data.curvature", "0.05"},
        {"data.jitter", "0"},
        {"data.permute", "false"},
        {"data.sprite_radius", "3"},
        // model
        {"model.cell", "matlstm"},
        {"model.strategy", "encoder_predictor"},
        {"model.layers", "1"},
        {"model.k_r", "8"},
        {"model.k_c", "8"},
        {"model.k2_r", "0"},
        {"model.k2_c", "0"},
        {"model.k", "32"},
        {"model.k2", "0"},
        {"model.loss", "bce_with_logits"},
        {"model.conditional_decoding", "true"},
        {"model.input_transform", "identity"},
        {"model.context_len", "0"},
        {"model.head_hidden", "true"},
        {"model.dropout", "0.1"},
        {"model.stack_mode", "layerwise"},
        // training
        {"train.learning_rate", "0.0003"},
        {"train.batch_size", "64"},
        {"train.max_epochs", "100"},
        {"train.patience", "10"},
        {"train.clip_norm", "5"},
        {"train.seed", "0"},
        {"train.val_fraction", "0.2"},
        // evaluation
        {"eval.seeds", "0,1,2"},
        // ECG preparation
        {"ecg.group", "5"},
        {"ecg.stride", "0"},  // 0 = non-overlapping (= group)
        {"ecg.window", "360"},
        {"ecg.channel", "MLII"},
        {"ecg.seq_len", "10"},
        {"ecg.seq_stride", "1"},
        {"ecg.detrend_order", "6"},
        {"ecg.low_hz", "5"},
        {"ecg.high_hz", "15"},
        {"ecg.filter_order", "6"},
        {"ecg.zero_phase", "false"},
    };
    return defaults;
}

std::string canonicalize_value(const nlohmann::json& v) {
    if (v.is_string()) return v.get<std::string>();
    return v.dump();
}

}  // namespace

std::string fnv1a_hex(const std::string& text) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

RunConfig RunConfig::defaults() {
    RunConfig cfg;
    cfg.values_ = default_values();
    return cfg;
}

void RunConfig::set(const std::string& key, const std::string& value) {
    if (!default_values().count(key)) throw ContractError("unknown config key: " + key);
    values_[key] = value;
}

void RunConfig::apply_json_text(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("config: ") + e.what());
    }
    if (!doc.is_object()) throw ParseError("config: expected a flat JSON object");
    for (const auto& [key, value] : doc.items()) {
        if (value.is_object() || value.is_array())
            throw ParseError("config: key " + key + " must be a scalar");
        set(key, canonicalize_value(value));
    }
}

void RunConfig::apply_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("config: cannot open " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    apply_json_text(buf.str());
}

void RunConfig::apply_override(const std::string& kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ContractError("--set expects key=value, got: " + kv);
    const std::string key = kv.substr(0, eq);
    std::string value = kv.substr(eq + 1);
    // run overrides through the same canonicalization as file values
    try {
        value = canonicalize_value(nlohmann::json::parse(value));
    } catch (...) {
        // bare strings stay as-is
    }
    set(key, value);
}

const std::string& RunConfig::get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ContractError("unknown config key: " + key);
    return it->second;
}

double RunConfig::num(const std::string& key) const {
    try {
        size_t used = 0;
        const double v = std::stod(get(key), &used);
        if (used != get(key).size()) throw std::invalid_argument("trailing");
        return v;
    } catch (...) {
        throw ContractError("config key " + key + " is not a number: " + get(key));
    }
}

int RunConfig::integer(const std::string& key) const {
    const double v = num(key);
    const int i = static_cast<int>(v);
    if (static_cast<double>(i) != v) throw ContractError("config key " + key + " is not an integer");
    return i;
}

uint64_t RunConfig::uint(const std::string& key) const {
    const double v = num(key);
    if (v < 0) throw ContractError("config key " + key + " must be non-negative");
    return static_cast<uint64_t>(v);
}

bool RunConfig::flag(const std::string& key) const {
    const std::string& v = get(key);
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ContractError("config key " + key + " is not a boolean: " + v);
}

std::string RunConfig::canonical_json() const {
    nlohmann::ordered_json doc;
    for (const auto& [k, v] : values_) doc[k] = v;  // std::map keeps keys sorted
    return doc.dump();
}

std::string RunConfig::fingerprint() const { return fnv1a_hex(canonical_json()); }

std::string RunConfig::data_schema_fingerprint() const {
    // structural data keys only: the seed, the sequence count and the outlier
    // ratio may differ between a model's train file and a compatible test file
    nlohmann::ordered_json doc;
    for (const auto& [k, v] : values_) {
        const bool data_key = k.rfind("data.", 0) == 0 || k.rfind("ecg.", 0) == 0;
        if (!data_key || k == "data.seed" || k == "data.n" || k == "data.outlier_ratio") continue;
        doc[k] = v;
    }
    return fnv1a_hex(doc.dump());
}

models::ModelSpec RunConfig::model_spec() const {
    models::ModelSpec spec;
    const std::string cell = get("model.cell");
    if (cell == "matlstm")
        spec.cell = models::CellKind::kMatLstm;
    else if (cell == "veclstm")
        spec.cell = models::CellKind::kVecLstm;
    else
        throw ContractError("model.cell must be matlstm or veclstm, got " + cell);

    const std::string strat = get("model.strategy");
    if (strat == "autoencoder")
        spec.strategy = models::Strategy::kAutoencoder;
    else if (strat == "encoder_predictor")
        spec.strategy = models::Strategy::kEncoderPredictor;
    else
        throw ContractError("model.strategy must be autoencoder or encoder_predictor, got " + strat);

    spec.layers = integer("model.layers");
    spec.k_r = integer("model.k_r");
    spec.k_c = integer("model.k_c");
    spec.k2_r = integer("model.k2_r");
    spec.k2_c = integer("model.k2_c");
    spec.k = integer("model.k");
    spec.k2 = integer("model.k2");

    const std::string loss = get("model.loss");
    if (loss == "frobenius_mse")
        spec.loss = LossKind::kFrobeniusMse;
    else if (loss == "bce_with_logits")
        spec.loss = LossKind::kBceWithLogits;
    else
        throw ContractError("model.loss must be frobenius_mse or bce_with_logits, got " + loss);

    spec.conditional_decoding = flag("model.conditional_decoding");

    const std::string transform = get("model.input_transform");
    if (transform == "identity")
        spec.input_transform = models::InputTransform::kIdentity;
    else if (transform == "temporal_difference")
        spec.input_transform = models::InputTransform::kTemporalDifference;
    else
        throw ContractError("model.input_transform must be identity or temporal_difference");

    spec.context_len = integer("model.context_len");
    spec.head_hidden = flag("model.head_hidden");
    spec.dropout_rate = num("model.dropout");

    const std::string mode = get("model.stack_mode");
    if (mode == "layerwise")
        spec.stack_mode = models::StackMode::kLayerwise;
    else if (mode == "joint")
        spec.stack_mode = models::StackMode::kJoint;
    else
        throw ContractError("model.stack_mode must be layerwise or joint");
    return spec;
}

train::TrainConfig RunConfig::train_config() const {
    train::TrainConfig cfg;
    cfg.learning_rate = num("train.learning_rate");
    cfg.batch_size = integer("train.batch_size");
    cfg.max_epochs = integer("train.max_epochs");
    cfg.patience = integer("train.patience");
    cfg.clip_norm = num("train.clip_norm");
    cfg.seed = uint("train.seed");
    cfg.val_fraction = num("train.val_fraction");
    return cfg;
}

synthgen::SynthConfig RunConfig::synth_config() const {
    synthgen::SynthConfig cfg;
    cfg.n_r = integer("data.n_r");
    cfg.n_c = integer("data.n_c");
    cfg.T = integer("data.T");
    cfg.n_sequences = integer("data.n");
    cfg.outlier_ratio = num("data.outlier_ratio");
    cfg.shift_min = integer("data.shift_min");
    cfg.shift_max = integer("data.shift_max");
    cfg.fixed_shift_per_sequence = flag("data.fixed_shift");
    cfg.fixed_perm_per_sequence = flag("data.fixed_perm");
    cfg.seed = uint("data.seed");
    return cfg;
}

synthgen::SpriteConfig RunConfig::sprite_config() const {
    synthgen::SpriteConfig cfg;
    cfg.canvas = integer("data.canvas");
    cfg.T = integer("data.T");
    cfg.n_sequences = integer("data.n");
    cfg.outlier_ratio = num("data.outlier_ratio");
    cfg.speed = num("data.speed");
    cfg.curvature = num("data.curvature");
    cfg.trajectory_jitter = num("data.jitter");
    cfg.permute = flag("data.permute");
    cfg.salt_pepper_p = num("data.salt_pepper_p");
    cfg.sprite_radius = num("data.sprite_radius");
    cfg.seed = uint("data.seed");
    return cfg;
}

std::vector<uint64_t> RunConfig::eval_seeds() const {
    std::vector<uint64_t> seeds;
    std::stringstream ss(get("eval.seeds"));
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        try {
            seeds.push_back(std::stoull(tok));
        } catch (...) {
            throw ContractError("eval.seeds: bad entry '" + tok + "'");
        }
    }
    if (seeds.empty()) throw ContractError("eval.seeds: empty");
    return seeds;
}

}  // namespace matad::cli

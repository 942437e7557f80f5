#pragma once

#include <map>
#include <string>
#include <vector>

#include "matad/models.hpp"
#include "matad/synthgen.hpp"
#include "matad/train.hpp"

namespace matad::cli {

// Flat namespaced key-value configuration (model.*, train.*, data.*, eval.*,
// ecg.*) stored in canonical string form. Files are flat JSON objects;
// overrides arrive as "key=value" strings. Unknown keys are rejected.
class RunConfig {
public:
    static RunConfig defaults();

    void apply_json_text(const std::string& text);
    void apply_file(const std::string& path);
    void apply_override(const std::string& key_equals_value);
    void set(const std::string& key, const std::string& value);

    const std::string& get(const std::string& key) const;
    double num(const std::string& key) const;
    int integer(const std::string& key) const;
    bool flag(const std::string& key) const;
    uint64_t uint(const std::string& key) const;

    // sorted-key flat JSON of every resolved value
    std::string canonical_json() const;
    // FNV-1a 64 of the canonical JSON, 16 hex chars
    std::string fingerprint() const;
    // same, restricted to data.* with data.seed excluded: identifies the data
    // family a model was trained for without pinning the exact draw
    std::string data_schema_fingerprint() const;

    models::ModelSpec model_spec() const;
    train::TrainConfig train_config() const;
    synthgen::SynthConfig synth_config() const;
    synthgen::SpriteConfig sprite_config() const;
    std::vector<uint64_t> eval_seeds() const;

private:
    std::map<std::string, std::string> values_;
};

std::string fnv1a_hex(const std::string& text);

}  // namespace matad::cli

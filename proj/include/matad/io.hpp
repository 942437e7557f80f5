#pragma once

#include "matad/models.hpp"
#include "matad/runconfig.hpp"

namespace matad::io {

// ---- MSEQ container ------------------------------------------------------
// magic "MSEQ1"; little-endian u32 n_sequences, T, n_r, n_c; u8 dtype
// (0 = float32, 1 = unsigned byte); labels: one byte per sequence
// (0/1/255 = unlabelled); payload row-major, frame-major, sequence-major.
constexpr uint8_t kDtypeF32 = 0;
constexpr uint8_t kDtypeU8 = 1;

struct MseqInfo {
    uint32_t n_sequences = 0, T = 0, n_r = 0, n_c = 0;
    uint8_t dtype = kDtypeF32;
};

std::vector<uint8_t> serialize_mseq(const Dataset& data, uint8_t dtype);
Dataset parse_mseq(const std::vector<uint8_t>& bytes, MseqInfo* info = nullptr);
void write_mseq(const std::string& path, const Dataset& data, uint8_t dtype);
Dataset read_mseq(const std::string& path, MseqInfo* info = nullptr);

// Sidecar metadata written next to generated datasets (resolved config plus
// fingerprints); the MSEQ payload itself is pinned byte-exact above.
void write_dataset_meta(const std::string& mseq_path, const cli::RunConfig& cfg);
// empty strings when no sidecar exists
struct DatasetMeta {
    std::string fingerprint, schema_fingerprint;
    bool found = false;
};
DatasetMeta read_dataset_meta(const std::string& mseq_path);

// ---- model file -------------------------------------------------------------
// magic "MMDL1"; u32 version; resolved config JSON; data schema fingerprint;
// frame dims; parameter matrices as little-endian f64 in collect_params order.
void save_model(const std::string& path, const models::Model& m, const cli::RunConfig& resolved,
                const std::string& schema_fp_override = "");
struct LoadedModel {
    models::Model model;
    cli::RunConfig config;
    std::string fingerprint;
    std::string data_schema_fingerprint;
};
LoadedModel load_model(const std::string& path);

// ---- scores CSV ----------------------------------------------------------------
// "# config=<fp> data_schema=<fp>" comment, then "id,score,label" rows;
// label column empty for unlabelled sequences.
std::string scores_to_csv(const std::vector<models::ScoredSequence>& scored,
                          const std::string& config_fp, const std::string& schema_fp);
struct ScoresFile {
    std::vector<models::ScoredSequence> rows;
    std::string config_fingerprint, data_schema_fingerprint;
};
ScoresFile parse_scores_csv(const std::string& text);
void write_scores_csv(const std::string& path, const std::vector<models::ScoredSequence>& scored,
                      const std::string& config_fp, const std::string& schema_fp);
ScoresFile read_scores_csv(const std::string& path);

// temp file + rename
void atomic_write(const std::string& path, const std::string& bytes);
void atomic_write(const std::string& path, const std::vector<uint8_t>& bytes);

}  // namespace matad::io

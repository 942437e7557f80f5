#pragma once

#include <cstdint>
#include <optional>

#include "matad/sequence.hpp"

namespace matad::synthgen {

// Binary matrix sequences: normal = per-step circular right shift, anomalous
// = per-step random column permutation.
struct SynthConfig {
    int n_r = 10;
    int n_c = 10;
    int T = 20;
    int n_sequences = 5000;
    double outlier_ratio = 0.05;
    int shift_min = 1;
    int shift_max = 5;
    bool fixed_shift_per_sequence = false;  // one shift amount reused every step
    bool fixed_perm_per_sequence = false;   // one permutation reused every step
    uint64_t seed = 0;

    void validate() const {
        if (n_r < 1 || n_c < 1 || T < 2 || n_sequences < 1)
            throw ContractError("synth: dims, T>=2 and n_sequences must be positive");
        if (outlier_ratio < 0 || outlier_ratio > 1)
            throw ContractError("synth: outlier_ratio in [0,1]");
        if (shift_min < 1 || shift_max < shift_min || shift_max > n_c)
            throw ContractError("synth: shift range must be non-empty within 1..n_c");
    }
};

// Moving sprite sequences: normal = straight trajectory, anomalous = curved.
struct SpriteConfig {
    int canvas = 28;
    int T = 20;
    int n_sequences = 1000;
    double outlier_ratio = 0.05;
    double speed = 2.0;          // pixels per step
    double curvature = 0.05;     // heading change per step on curved tracks
    double trajectory_jitter = 0.0;  // uniform per-step render offset, pixels
    bool permute = false;        // one row+column permutation per sequence
    double salt_pepper_p = 0.0;  // probability of each noise type per pixel
    double sprite_radius = 3.0;  // parametric blob radius (ignored with glyphs)
    uint64_t seed = 0;

    void validate() const {
        if (canvas < 4 || T < 2 || n_sequences < 1) throw ContractError("sprites: bad dims");
        if (outlier_ratio < 0 || outlier_ratio > 1) throw ContractError("sprites: outlier_ratio");
        if (trajectory_jitter < 0) throw ContractError("sprites: jitter must be >= 0");
        if (salt_pepper_p < 0 || 2 * salt_pepper_p > 1)
            throw ContractError("sprites: need 2p <= 1");
    }
};

// Result column j equals input column (j - c) mod n_c.
Matrix circshift(const Matrix& x, int c);

Dataset gen_synthetic(const SynthConfig& cfg);

// Per-sequence permutations used by gen_moving_sprites, for round-trip checks.
struct SpriteMeta {
    std::vector<int> row_perm, col_perm;
};
Dataset gen_moving_sprites(const SpriteConfig& cfg, const std::vector<Matrix>* glyphs = nullptr,
                           std::vector<SpriteMeta>* meta = nullptr);

// Each entry independently zeroed with probability p, fresh mask per frame.
MatrixSequence inject_zero_noise(const MatrixSequence& seq, double p, uint64_t seed);
void inject_zero_noise(Dataset& data, double p, uint64_t seed);

// Each pixel set to 1 with probability p and to 0 with probability p.
MatrixSequence inject_salt_pepper(const MatrixSequence& seq, double p, uint64_t seed);
void inject_salt_pepper(Dataset& data, double p, uint64_t seed);

// Applies the same row and column permutation to every frame; out[i][j] =
// in[row_perm[i]][col_perm[j]].
MatrixSequence permute_rows_cols(const MatrixSequence& seq, const std::vector<int>& row_perm,
                                 const std::vector<int>& col_perm);

// IDX3 image files (magic 0x00000803, big-endian dims); pixels scaled to [0,1].
std::vector<Matrix> read_idx_images(const std::string& path);
std::vector<Matrix> parse_idx_images(const std::vector<uint8_t>& bytes);

}  // namespace matad::synthgen

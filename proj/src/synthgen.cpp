#include "matad/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "matad/rng.hpp"

namespace matad::synthgen {

namespace {

std::vector<int> outlier_flags(int n, double ratio, uint64_t seed) {
    const int n_out = static_cast<int>(std::lround(ratio * n));
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 rng(derive_stream(seed, {0xa551u}));
    std::shuffle(idx.begin(), idx.end(), rng);
    std::vector<int> flags(n, 0);
    for (int i = 0; i < n_out; ++i) flags[idx[i]] = 1;
    return flags;
}

std::vector<int> random_permutation(int n, std::mt19937_64& rng) {
    std::vector<int> p(n);
    std::iota(p.begin(), p.end(), 0);
    std::shuffle(p.begin(), p.end(), rng);
    return p;
}

void check_permutation(const std::vector<int>& p, int n, const char* what) {
    if (static_cast<int>(p.size()) != n) throw ContractError(std::string(what) + ": wrong size");
    std::vector<char> seen(n, 0);
    for (int v : p) {
        if (v < 0 || v >= n || seen[v]) throw ContractError(std::string(what) + ": not a bijection");
        seen[v] = 1;
    }
}

Matrix permute_columns(const Matrix& x, const std::vector<int>& col_perm) {
    Matrix out(x.rows, x.cols);
    for (int i = 0; i < x.rows; ++i)
        for (int j = 0; j < x.cols; ++j) out(i, j) = x(i, col_perm[j]);
    return out;
}

}  // namespace

Matrix circshift(const Matrix& x, int c) {
    if (c < 0) throw ContractError("circshift: shift must be non-negative");
    const int n = x.cols;
    const int s = n == 0 ? 0 : c % n;
    Matrix out(x.rows, x.cols);
    for (int i = 0; i < x.rows; ++i)
        for (int j = 0; j < n; ++j) out(i, j) = x(i, (j - s + n) % n);
    return out;
}

Dataset gen_synthetic(const SynthConfig& cfg) {
    cfg.validate();
    const auto flags = outlier_flags(cfg.n_sequences, cfg.outlier_ratio, cfg.seed);
    Dataset data(cfg.n_sequences);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < cfg.n_sequences; ++i) {
        std::mt19937_64 rng(derive_stream(cfg.seed, {0x5e9u, static_cast<uint64_t>(i)}));
        std::bernoulli_distribution bern(0.5);
        std::uniform_int_distribution<int> shift(cfg.shift_min, cfg.shift_max);

        MatrixSequence seq;
        seq.id = "synth-" + std::to_string(i);
        seq.label = flags[i];
        Matrix frame(cfg.n_r, cfg.n_c);
        for (double& v : frame.data) v = bern(rng) ? 1.0 : 0.0;
        seq.frames.push_back(frame);

        const int fixed_shift = shift(rng);
        const auto fixed_perm = random_permutation(cfg.n_c, rng);
        for (int t = 1; t < cfg.T; ++t) {
            if (flags[i]) {
                const auto perm =
                    cfg.fixed_perm_per_sequence ? fixed_perm : random_permutation(cfg.n_c, rng);
                frame = permute_columns(frame, perm);
            } else {
                frame = circshift(frame, cfg.fixed_shift_per_sequence ? fixed_shift : shift(rng));
            }
            seq.frames.push_back(frame);
        }
        data[i] = std::move(seq);
    }
    return data;
}

MatrixSequence inject_zero_noise(const MatrixSequence& seq, double p, uint64_t seed) {
    if (p < 0 || p > 1) throw ContractError("inject_zero_noise: p in [0,1]");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    MatrixSequence out = seq;
    for (auto& f : out.frames)
        for (double& v : f.data)
            if (u(rng) < p) v = 0.0;
    return out;
}

void inject_zero_noise(Dataset& data, double p, uint64_t seed) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < static_cast<int>(data.size()); ++i)
        data[i] = inject_zero_noise(data[i], p, derive_stream(seed, {0x02eu, static_cast<uint64_t>(i)}));
}

MatrixSequence inject_salt_pepper(const MatrixSequence& seq, double p, uint64_t seed) {
    if (p < 0 || 2 * p > 1) throw ContractError("inject_salt_pepper: need 0 <= 2p <= 1");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    MatrixSequence out = seq;
    for (auto& f : out.frames)
        for (double& v : f.data) {
            const double r = u(rng);
            if (r < p)
                v = 1.0;
            else if (r < 2 * p)
                v = 0.0;
        }
    return out;
}

void inject_salt_pepper(Dataset& data, double p, uint64_t seed) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < static_cast<int>(data.size()); ++i)
        data[i] = inject_salt_pepper(data[i], p, derive_stream(seed, {0x5a17u, static_cast<uint64_t>(i)}));
}

MatrixSequence permute_rows_cols(const MatrixSequence& seq, const std::vector<int>& row_perm,
                                 const std::vector<int>& col_perm) {
    seq.validate();
    check_permutation(row_perm, seq.n_r(), "row permutation");
    check_permutation(col_perm, seq.n_c(), "column permutation");
    MatrixSequence out = seq;
    for (size_t t = 0; t < out.frames.size(); ++t) {
        const Matrix& src = seq.frames[t];
        Matrix dst(src.rows, src.cols);
        for (int i = 0; i < src.rows; ++i)
            for (int j = 0; j < src.cols; ++j) dst(i, j) = src(row_perm[i], col_perm[j]);
        out.frames[t] = std::move(dst);
    }
    return out;
}

namespace {

// Soft disc stamp; bilinear splatting keeps its mass exactly constant under
// subpixel translation.
Matrix blob_stamp(double radius) {
    const int half = static_cast<int>(std::ceil(radius)) + 1;
    const int s = 2 * half + 1;
    Matrix stamp(s, s);
    for (int i = 0; i < s; ++i)
        for (int j = 0; j < s; ++j) {
            const double d = std::hypot(i - half, j - half);
            stamp(i, j) = std::clamp(radius + 0.5 - d, 0.0, 1.0);
        }
    return stamp;
}

void splat(Matrix& canvas, const Matrix& stamp, double center_r, double center_c) {
    const double half_r = (stamp.rows - 1) / 2.0;
    const double half_c = (stamp.cols - 1) / 2.0;
    for (int i = 0; i < stamp.rows; ++i)
        for (int j = 0; j < stamp.cols; ++j) {
            const double v = stamp(i, j);
            if (v == 0.0) continue;
            const double r = center_r - half_r + i;
            const double c = center_c - half_c + j;
            const int r0 = static_cast<int>(std::floor(r));
            const int c0 = static_cast<int>(std::floor(c));
            const double fr = r - r0, fc = c - c0;
            const double w[4] = {(1 - fr) * (1 - fc), (1 - fr) * fc, fr * (1 - fc), fr * fc};
            const int rr[4] = {r0, r0, r0 + 1, r0 + 1};
            const int cc[4] = {c0, c0 + 1, c0, c0 + 1};
            for (int k = 0; k < 4; ++k)
                if (rr[k] >= 0 && rr[k] < canvas.rows && cc[k] >= 0 && cc[k] < canvas.cols)
                    canvas(rr[k], cc[k]) += v * w[k];
        }
}

// Reflects x into [lo, hi].
double reflect(double x, double lo, double hi, double* dir) {
    const double span = hi - lo;
    while (x < lo || x > hi) {
        if (x < lo) {
            x = 2 * lo - x;
            *dir = -*dir;
        } else {
            x = 2 * hi - x;
            *dir = -*dir;
        }
        if (span <= 0) throw ContractError("sprite does not fit canvas");
    }
    return x;
}

}  // namespace

Dataset gen_moving_sprites(const SpriteConfig& cfg, const std::vector<Matrix>* glyphs,
                           std::vector<SpriteMeta>* meta) {
    cfg.validate();
    if (glyphs && glyphs->empty()) throw ContractError("sprites: empty glyph set");
    const Matrix blob = blob_stamp(cfg.sprite_radius);
    const auto flags = outlier_flags(cfg.n_sequences, cfg.outlier_ratio, cfg.seed);
    Dataset data(cfg.n_sequences);
    if (meta) meta->assign(cfg.n_sequences, {});

#pragma omp parallel for schedule(static)
    for (int i = 0; i < cfg.n_sequences; ++i) {
        std::mt19937_64 rng(derive_stream(cfg.seed, {0x5127u, static_cast<uint64_t>(i)}));
        std::uniform_real_distribution<double> uni(0.0, 1.0);

        const Matrix& stamp = glyphs ? (*glyphs)[static_cast<size_t>(uni(rng) * glyphs->size()) %
                                                 glyphs->size()]
                                     : blob;
        const double half = (std::max(stamp.rows, stamp.cols) - 1) / 2.0;
        const double lo = half + cfg.trajectory_jitter;
        const double hi = cfg.canvas - 2 - half - cfg.trajectory_jitter;
        if (hi <= lo) throw ContractError("sprite does not fit canvas");

        const double slope = uni(rng) * 2.0 * M_PI;  // heading in [0, 2pi]
        double vr = cfg.speed * std::sin(slope);
        double vc = cfg.speed * std::cos(slope);
        double r = lo + uni(rng) * (hi - lo);
        double c = lo + uni(rng) * (hi - lo);

        MatrixSequence seq;
        seq.id = "sprite-" + std::to_string(i);
        seq.label = flags[i];
        const double kappa = flags[i] ? cfg.curvature : 0.0;

        for (int t = 0; t < cfg.T; ++t) {
            double jr = 0.0, jc = 0.0;
            if (cfg.trajectory_jitter > 0) {
                jr = (2 * uni(rng) - 1) * cfg.trajectory_jitter;
                jc = (2 * uni(rng) - 1) * cfg.trajectory_jitter;
            }
            Matrix frame(cfg.canvas, cfg.canvas, 0.0);
            splat(frame, stamp, r + jr, c + jc);
            for (double& v : frame.data) v = std::min(v, 1.0);
            seq.frames.push_back(std::move(frame));

            // advance: curved tracks rotate the velocity a little each step
            if (kappa != 0.0) {
                const double cs = std::cos(kappa), sn = std::sin(kappa);
                const double nvr = cs * vr - sn * vc;
                const double nvc = sn * vr + cs * vc;
                vr = nvr;
                vc = nvc;
            }
            r += vr;
            c += vc;
            r = reflect(r, lo, hi, &vr);
            c = reflect(c, lo, hi, &vc);
        }

        if (cfg.permute) {
            const auto rp = random_permutation(cfg.canvas, rng);
            const auto cp = random_permutation(cfg.canvas, rng);
            seq = permute_rows_cols(seq, rp, cp);
            if (meta) (*meta)[i] = {rp, cp};
        }
        if (cfg.salt_pepper_p > 0)
            seq = inject_salt_pepper(seq, cfg.salt_pepper_p,
                                     derive_stream(cfg.seed, {0x5a17u, static_cast<uint64_t>(i)}));
        data[i] = std::move(seq);
    }
    return data;
}

std::vector<Matrix> parse_idx_images(const std::vector<uint8_t>& bytes) {
    auto be32 = [&](size_t off) {
        return (static_cast<uint32_t>(bytes[off]) << 24) | (static_cast<uint32_t>(bytes[off + 1]) << 16) |
               (static_cast<uint32_t>(bytes[off + 2]) << 8) | static_cast<uint32_t>(bytes[off + 3]);
    };
    if (bytes.size() < 16)
        throw ParseError("idx: header truncated, need 16 bytes, got " + std::to_string(bytes.size()));
    const uint32_t magic = be32(0);
    if (magic != 0x00000803) {
        char buf[16];
        std::snprintf(buf, sizeof buf, "0x%08x", magic);
        throw ParseError(std::string("idx: bad magic ") + buf + " at offset 0 (want 0x00000803)");
    }
    const uint32_t count = be32(4), rows = be32(8), cols = be32(12);
    const size_t want = 16 + static_cast<size_t>(count) * rows * cols;
    if (bytes.size() < want)
        throw ParseError("idx: payload truncated at offset " + std::to_string(bytes.size()) +
                         ", expected " + std::to_string(want) + " bytes total, got " +
                         std::to_string(bytes.size()));
    std::vector<Matrix> images;
    images.reserve(count);
    size_t off = 16;
    for (uint32_t k = 0; k < count; ++k) {
        Matrix m(static_cast<int>(rows), static_cast<int>(cols));
        for (int i = 0; i < m.size(); ++i) m.data[i] = bytes[off++] / 255.0;
        images.push_back(std::move(m));
    }
    return images;
}

std::vector<Matrix> read_idx_images(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("idx: cannot open " + path);
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_idx_images(bytes);
}

}  // namespace matad::synthgen

#include "matad/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace matad::io {

namespace {

constexpr char kMseqMagic[5] = {'M', 'S', 'E', 'Q', '1'};
constexpr char kModelMagic[5] = {'M', 'M', 'D', 'L', '1'};

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(v & 0xFF);
    out.push_back((v >> 8) & 0xFF);
    out.push_back((v >> 16) & 0xFF);
    out.push_back((v >> 24) & 0xFF);
}

uint32_t get_u32(const std::vector<uint8_t>& bytes, size_t& off) {
    if (off + 4 > bytes.size()) throw ParseError("truncated u32 at offset " + std::to_string(off));
    const uint32_t v = bytes[off] | (bytes[off + 1] << 8) | (bytes[off + 2] << 16) |
                       (static_cast<uint32_t>(bytes[off + 3]) << 24);
    off += 4;
    return v;
}

void put_f32(std::vector<uint8_t>& out, float v) {
    uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(out, bits);
}

float get_f32(const std::vector<uint8_t>& bytes, size_t& off) {
    const uint32_t bits = get_u32(bytes, off);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

void put_f64(std::vector<uint8_t>& out, double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u32(out, static_cast<uint32_t>(bits & 0xFFFFFFFFull));
    put_u32(out, static_cast<uint32_t>(bits >> 32));
}

double get_f64(const std::vector<uint8_t>& bytes, size_t& off) {
    const uint64_t lo = get_u32(bytes, off);
    const uint64_t hi = get_u32(bytes, off);
    const uint64_t bits = lo | (hi << 32);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

void put_string(std::vector<uint8_t>& out, const std::string& s) {
    put_u32(out, static_cast<uint32_t>(s.size()));
    out.insert(out.end(), s.begin(), s.end());
}

std::string get_string(const std::vector<uint8_t>& bytes, size_t& off) {
    const uint32_t len = get_u32(bytes, off);
    if (off + len > bytes.size()) throw ParseError("truncated string at offset " + std::to_string(off));
    std::string s(bytes.begin() + off, bytes.begin() + off + len);
    off += len;
    return s;
}

std::string format_score(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

std::vector<uint8_t> serialize_mseq(const Dataset& data, uint8_t dtype) {
    if (dtype != kDtypeF32 && dtype != kDtypeU8) throw ContractError("mseq: dtype must be 0 or 1");
    if (data.empty()) throw ContractError("mseq: empty dataset");
    const uint32_t n = static_cast<uint32_t>(data.size());
    const uint32_t T = static_cast<uint32_t>(data.front().length());
    const uint32_t n_r = static_cast<uint32_t>(data.front().n_r());
    const uint32_t n_c = static_cast<uint32_t>(data.front().n_c());
    for (const auto& seq : data) {
        seq.validate();
        if (seq.length() != static_cast<int>(T) || seq.n_r() != static_cast<int>(n_r) ||
            seq.n_c() != static_cast<int>(n_c))
            throw ShapeError("mseq: sequence " + seq.id + " breaks the uniform shape");
    }

    std::vector<uint8_t> out;
    out.insert(out.end(), kMseqMagic, kMseqMagic + 5);
    put_u32(out, n);
    put_u32(out, T);
    put_u32(out, n_r);
    put_u32(out, n_c);
    out.push_back(dtype);
    for (const auto& seq : data) out.push_back(seq.label ? static_cast<uint8_t>(*seq.label) : 255);
    for (const auto& seq : data)
        for (const auto& frame : seq.frames)
            for (double v : frame.data) {
                if (dtype == kDtypeF32)
                    put_f32(out, static_cast<float>(v));
                else
                    out.push_back(static_cast<uint8_t>(std::lround(std::clamp(v, 0.0, 255.0))));
            }
    return out;
}

Dataset parse_mseq(const std::vector<uint8_t>& bytes, MseqInfo* info) {
    if (bytes.size() < 5 || std::memcmp(bytes.data(), kMseqMagic, 5) != 0)
        throw ParseError("mseq: bad magic at offset 0");
    size_t off = 5;
    MseqInfo h;
    h.n_sequences = get_u32(bytes, off);
    h.T = get_u32(bytes, off);
    h.n_r = get_u32(bytes, off);
    h.n_c = get_u32(bytes, off);
    if (off >= bytes.size()) throw ParseError("mseq: truncated header");
    h.dtype = bytes[off++];
    if (h.dtype != kDtypeF32 && h.dtype != kDtypeU8)
        throw ParseError("mseq: unknown dtype " + std::to_string(h.dtype));

    const size_t n_values =
        static_cast<size_t>(h.n_sequences) * h.T * h.n_r * h.n_c;
    const size_t expected =
        off + h.n_sequences + n_values * (h.dtype == kDtypeF32 ? 4 : 1);
    if (bytes.size() != expected)
        throw ParseError("mseq: payload length " + std::to_string(bytes.size()) + ", expected " +
                         std::to_string(expected));

    std::vector<uint8_t> labels(bytes.begin() + off, bytes.begin() + off + h.n_sequences);
    off += h.n_sequences;

    Dataset data;
    data.reserve(h.n_sequences);
    for (uint32_t i = 0; i < h.n_sequences; ++i) {
        MatrixSequence seq;
        seq.id = "seq-" + std::to_string(i);
        if (labels[i] != 255) seq.label = labels[i];
        for (uint32_t t = 0; t < h.T; ++t) {
            Matrix f(static_cast<int>(h.n_r), static_cast<int>(h.n_c));
            for (int k = 0; k < f.size(); ++k)
                f.data[k] = h.dtype == kDtypeF32 ? static_cast<double>(get_f32(bytes, off))
                                                 : static_cast<double>(bytes[off++]);
            seq.frames.push_back(std::move(f));
        }
        data.push_back(std::move(seq));
    }
    if (info) *info = h;
    return data;
}

void atomic_write(const std::string& path, const std::vector<uint8_t>& bytes) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ContractError("cannot write " + tmp);
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<long>(bytes.size()));
        if (!out) throw ContractError("short write to " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) throw ContractError("cannot rename into " + path);
}

void atomic_write(const std::string& path, const std::string& bytes) {
    atomic_write(path, std::vector<uint8_t>(bytes.begin(), bytes.end()));
}

void write_mseq(const std::string& path, const Dataset& data, uint8_t dtype) {
    atomic_write(path, serialize_mseq(data, dtype));
}

Dataset read_mseq(const std::string& path, MseqInfo* info) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("mseq: cannot open " + path);
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_mseq(bytes, info);
}

void write_dataset_meta(const std::string& mseq_path, const cli::RunConfig& cfg) {
    nlohmann::ordered_json doc;
    doc["config"] = nlohmann::json::parse(cfg.canonical_json());
    doc["fingerprint"] = cfg.fingerprint();
    doc["data_schema_fingerprint"] = cfg.data_schema_fingerprint();
    atomic_write(mseq_path + ".meta.json", doc.dump(2) + "\n");
}

DatasetMeta read_dataset_meta(const std::string& mseq_path) {
    std::ifstream in(mseq_path + ".meta.json");
    DatasetMeta meta;
    if (!in) return meta;
    try {
        nlohmann::json doc = nlohmann::json::parse(in);
        meta.fingerprint = doc.value("fingerprint", "");
        meta.schema_fingerprint = doc.value("data_schema_fingerprint", "");
        meta.found = true;
    } catch (...) {
        // a malformed sidecar is treated as absent
    }
    return meta;
}

void save_model(const std::string& path, const models::Model& m, const cli::RunConfig& resolved,
                const std::string& schema_fp_override) {
    std::vector<uint8_t> out;
    out.insert(out.end(), kModelMagic, kModelMagic + 5);
    put_u32(out, 1);  // format version
    put_string(out, resolved.canonical_json());
    put_string(out, schema_fp_override.empty() ? resolved.data_schema_fingerprint()
                                               : schema_fp_override);
    put_u32(out, static_cast<uint32_t>(m.n_r));
    put_u32(out, static_cast<uint32_t>(m.n_c));
    put_u32(out, static_cast<uint32_t>(m.layers.size()));
    for (int l = 0; l < static_cast<int>(m.layers.size()); ++l) {
        const auto params = models::collect_params(m, l);
        put_u32(out, static_cast<uint32_t>(params.size()));
        for (const Matrix* p : params) {
            put_u32(out, static_cast<uint32_t>(p->rows));
            put_u32(out, static_cast<uint32_t>(p->cols));
            for (double v : p->data) put_f64(out, v);
        }
    }
    atomic_write(path, out);
}

LoadedModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("model: cannot open " + path);
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() < 9 || std::memcmp(bytes.data(), kModelMagic, 5) != 0)
        throw ParseError("model: bad magic at offset 0");
    size_t off = 5;
    const uint32_t version = get_u32(bytes, off);
    if (version != 1) throw ParseError("model: unsupported format version " + std::to_string(version));

    LoadedModel loaded;
    const std::string config_json = get_string(bytes, off);
    loaded.config = cli::RunConfig::defaults();
    loaded.config.apply_json_text(config_json);
    loaded.fingerprint = loaded.config.fingerprint();
    loaded.data_schema_fingerprint = get_string(bytes, off);

    const uint32_t n_r = get_u32(bytes, off);
    const uint32_t n_c = get_u32(bytes, off);
    loaded.model = models::init_model(loaded.config.model_spec(), static_cast<int>(n_r),
                                      static_cast<int>(n_c), 0);
    const uint32_t n_layers = get_u32(bytes, off);
    if (n_layers != loaded.model.layers.size())
        throw ParseError("model: layer count mismatch with its own config");
    for (uint32_t l = 0; l < n_layers; ++l) {
        auto params = models::collect_params(loaded.model, static_cast<int>(l));
        const uint32_t n_params = get_u32(bytes, off);
        if (n_params != params.size()) throw ParseError("model: parameter count mismatch");
        for (Matrix* p : params) {
            const uint32_t rows = get_u32(bytes, off);
            const uint32_t cols = get_u32(bytes, off);
            if (static_cast<int>(rows) != p->rows || static_cast<int>(cols) != p->cols)
                throw ParseError("model: matrix shape mismatch at offset " + std::to_string(off));
            for (double& v : p->data) v = get_f64(bytes, off);
        }
    }
    if (off != bytes.size())
        throw ParseError("model: trailing bytes at offset " + std::to_string(off));
    return loaded;
}

std::string scores_to_csv(const std::vector<models::ScoredSequence>& scored,
                          const std::string& config_fp, const std::string& schema_fp) {
    std::ostringstream out;
    out << "# config=" << config_fp << " data_schema=" << schema_fp << "\n";
    out << "id,score,label\n";
    for (const auto& s : scored) {
        out << s.id << "," << format_score(s.score) << ",";
        if (s.label) out << *s.label;
        out << "\n";
    }
    return out.str();
}

ScoresFile parse_scores_csv(const std::string& text) {
    ScoresFile file;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            const auto cpos = line.find("config=");
            const auto dpos = line.find("data_schema=");
            if (cpos != std::string::npos)
                file.config_fingerprint = line.substr(cpos + 7, line.find(' ', cpos + 7) - cpos - 7);
            if (dpos != std::string::npos) file.data_schema_fingerprint = line.substr(dpos + 12);
            continue;
        }
        if (line == "id,score,label") continue;
        std::stringstream ls(line);
        std::string id, score, label;
        if (!std::getline(ls, id, ',') || !std::getline(ls, score, ','))
            throw ParseError("scores csv line " + std::to_string(line_no) + ": malformed row");
        std::getline(ls, label, ',');
        models::ScoredSequence s;
        s.id = id;
        try {
            s.score = std::stod(score);
        } catch (...) {
            throw ParseError("scores csv line " + std::to_string(line_no) + ": bad score " + score);
        }
        if (!label.empty()) s.label = std::stoi(label);
        file.rows.push_back(std::move(s));
    }
    return file;
}

void write_scores_csv(const std::string& path, const std::vector<models::ScoredSequence>& scored,
                      const std::string& config_fp, const std::string& schema_fp) {
    atomic_write(path, scores_to_csv(scored, config_fp, schema_fp));
}

ScoresFile read_scores_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("scores csv: cannot open " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_scores_csv(buf.str());
}

}  // namespace matad::io

#include "matad/ecgpipe.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace matad::ecgpipe {

namespace {
constexpr const char* kSymbols = "NVSFQ";
}

bool is_abnormal(char symbol) { return symbol == 'V' || symbol == 'S' || symbol == 'F'; }

std::vector<std::vector<double>> read_wfdb_212(const std::vector<uint8_t>& bytes, int n_channels,
                                               long n_samples) {
    if (n_channels < 1) throw ContractError("wfdb: need at least one channel");
    const long total = n_samples * n_channels;
    const long need = (total * 3 + 1) / 2;  // ceil(total * 1.5)
    if (static_cast<long>(bytes.size()) < need)
        throw ParseError("wfdb 212: truncated at offset " + std::to_string(bytes.size()) +
                         ", need " + std::to_string(need) + " bytes for " +
                         std::to_string(n_samples) + " samples x " + std::to_string(n_channels) +
                         " channels");

    auto sign_extend_12 = [](int v) { return v & 0x800 ? v - 0x1000 : v; };
    std::vector<std::vector<double>> channels(n_channels, std::vector<double>(n_samples));
    long flat = 0;
    size_t off = 0;
    while (flat < total) {
        const int b0 = bytes[off], b1 = bytes[off + 1], b2 = bytes[off + 2];
        off += 3;
        const int s1 = sign_extend_12(b0 | ((b1 & 0x0F) << 8));
        channels[flat % n_channels][flat / n_channels] = s1;
        ++flat;
        if (flat >= total) break;
        const int s2 = sign_extend_12(b2 | ((b1 & 0xF0) << 4));
        channels[flat % n_channels][flat / n_channels] = s2;
        ++flat;
    }
    return channels;
}

std::vector<uint8_t> encode_wfdb_212(const std::vector<std::vector<double>>& channels) {
    if (channels.empty()) throw ContractError("wfdb encode: no channels");
    const size_t n_samples = channels[0].size();
    for (const auto& c : channels)
        if (c.size() != n_samples) throw ShapeError("wfdb encode: unequal channel lengths");

    std::vector<int> flat;
    flat.reserve(n_samples * channels.size());
    for (size_t s = 0; s < n_samples; ++s)
        for (const auto& c : channels) {
            const int v = static_cast<int>(c[s]);
            if (v < -2048 || v > 2047) throw ContractError("wfdb encode: sample out of 12-bit range");
            flat.push_back(v & 0xFFF);
        }
    std::vector<uint8_t> bytes;
    bytes.reserve((flat.size() * 3 + 1) / 2);
    for (size_t i = 0; i < flat.size(); i += 2) {
        const int s1 = flat[i];
        const int s2 = i + 1 < flat.size() ? flat[i + 1] : 0;
        bytes.push_back(static_cast<uint8_t>(s1 & 0xFF));
        bytes.push_back(static_cast<uint8_t>(((s1 >> 8) & 0x0F) | ((s2 >> 4) & 0xF0)));
        bytes.push_back(static_cast<uint8_t>(s2 & 0xFF));
    }
    return bytes;
}

HeaderInfo parse_hea(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    HeaderInfo info;
    // first non-comment line: record nsig fs nsamples
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        if (!(ls >> info.record >> info.n_channels >> info.sampling_rate >> info.n_samples))
            throw ParseError("hea: malformed record line: " + line);
        break;
    }
    if (info.record.empty()) throw ParseError("hea: missing record line");
    // strip a segment suffix like 100/...; record names may carry layout info
    for (int i = 0; i < info.n_channels; ++i) {
        if (!std::getline(in, line)) throw ParseError("hea: missing signal line " + std::to_string(i));
        std::istringstream ls(line);
        std::vector<std::string> tokens;
        std::string tok;
        while (ls >> tok) tokens.push_back(tok);
        if (tokens.size() < 2) throw ParseError("hea: malformed signal line: " + line);
        info.dat_files.push_back(tokens[0]);
        info.channel_names.push_back(tokens.back());
    }
    return info;
}

HeaderInfo read_hea(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("hea: cannot open " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_hea(buf.str());
}

EcgRecording read_record(const std::string& dir, const std::string& record) {
    const auto info = read_hea(dir + "/" + record + ".hea");
    std::ifstream in(dir + "/" + info.dat_files.at(0), std::ios::binary);
    if (!in) throw ParseError("wfdb: cannot open " + dir + "/" + info.dat_files.at(0));
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    EcgRecording rec;
    rec.subject = info.record;
    rec.sampling_rate = info.sampling_rate;
    rec.channel_names = info.channel_names;
    rec.channels = read_wfdb_212(bytes, info.n_channels, info.n_samples);
    return rec;
}

std::vector<BeatAnnotation> parse_annotation_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::vector<BeatAnnotation> anns;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto comma = line.find(',');
        if (comma == std::string::npos)
            throw ParseError("annotation csv line " + std::to_string(line_no) + ": missing comma");
        const std::string first = line.substr(0, comma);
        const std::string second = line.substr(comma + 1);
        if (line_no == 1 && first == "sample") continue;  // optional header
        BeatAnnotation a;
        try {
            a.sample = std::stol(first);
        } catch (...) {
            throw ParseError("annotation csv line " + std::to_string(line_no) +
                             ": bad sample index '" + first + "'");
        }
        if (second.size() != 1 || std::string(kSymbols).find(second[0]) == std::string::npos)
            throw ParseError("annotation csv line " + std::to_string(line_no) + ": unknown symbol '" +
                             second + "'");
        a.symbol = second[0];
        anns.push_back(a);
    }
    std::stable_sort(anns.begin(), anns.end(),
                     [](const BeatAnnotation& a, const BeatAnnotation& b) { return a.sample < b.sample; });
    return anns;
}

std::vector<BeatAnnotation> read_annotation_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("annotation csv: cannot open " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_annotation_csv(buf.str());
}

PolyFit detrend_fit(const std::vector<double>& signal, int order) {
    const long n = static_cast<long>(signal.size());
    if (order < 0) throw ContractError("detrend: order must be non-negative");
    if (n <= order) throw ContractError("detrend: need more samples than the polynomial order");

    // monomial basis on t in [-1,1], orthonormalized by modified Gram-Schmidt;
    // coefficient vectors are carried along so the fit is reported in the
    // monomial basis.
    const int m = order + 1;
    std::vector<std::vector<double>> basis(m, std::vector<double>(n));
    std::vector<std::vector<double>> coef(m, std::vector<double>(m, 0.0));
    for (long i = 0; i < n; ++i) {
        const double t = n == 1 ? 0.0 : -1.0 + 2.0 * i / (n - 1);
        double p = 1.0;
        for (int d = 0; d < m; ++d) {
            basis[d][i] = p;
            p *= t;
        }
    }
    for (int d = 0; d < m; ++d) coef[d][d] = 1.0;

    auto dot = [n](const std::vector<double>& a, const std::vector<double>& b) {
        double acc = 0.0;
        for (long i = 0; i < n; ++i) acc += a[i] * b[i];
        return acc;
    };
    for (int d = 0; d < m; ++d) {
        for (int prev = 0; prev < d; ++prev) {
            const double proj = dot(basis[d], basis[prev]);
            for (long i = 0; i < n; ++i) basis[d][i] -= proj * basis[prev][i];
            for (int c = 0; c < m; ++c) coef[d][c] -= proj * coef[prev][c];
        }
        const double norm = std::sqrt(dot(basis[d], basis[d]));
        if (norm < 1e-300) throw ContractError("detrend: degenerate basis");
        for (long i = 0; i < n; ++i) basis[d][i] /= norm;
        for (int c = 0; c < m; ++c) coef[d][c] /= norm;
    }

    PolyFit fit;
    fit.coeffs.assign(m, 0.0);
    fit.fitted.assign(n, 0.0);
    for (int d = 0; d < m; ++d) {
        const double w = dot(signal, basis[d]);
        for (long i = 0; i < n; ++i) fit.fitted[i] += w * basis[d][i];
        for (int c = 0; c < m; ++c) fit.coeffs[c] += w * coef[d][c];
    }
    fit.detrended.resize(n);
    for (long i = 0; i < n; ++i) fit.detrended[i] = signal[i] - fit.fitted[i];
    return fit;
}

std::vector<double> detrend_poly(const std::vector<double>& signal, int order) {
    return detrend_fit(signal, order).detrended;
}

std::vector<Biquad> design_butterworth_bandpass(double low_hz, double high_hz, int order, double fs) {
    if (!(0 < low_hz && low_hz < high_hz && high_hz < fs / 2))
        throw ContractError("butterworth: need 0 < low < high < fs/2");
    if (order < 1) throw ContractError("butterworth: order must be >= 1");

    using cd = std::complex<double>;
    const double k = 2.0 * fs;  // bilinear constant
    const double wl = k * std::tan(M_PI * low_hz / fs);
    const double wh = k * std::tan(M_PI * high_hz / fs);
    const double w0 = std::sqrt(wl * wh);
    const double bw = wh - wl;

    // analog prototype poles on the unit circle, left half-plane
    std::vector<cd> proto;
    for (int i = 1; i <= order; ++i) {
        const double theta = M_PI * (2.0 * i + order - 1.0) / (2.0 * order);
        proto.emplace_back(std::cos(theta), std::sin(theta));
    }

    // lowpass -> bandpass: each prototype pole p yields the two roots of
    // s^2 - bw*p*s + w0^2
    std::vector<cd> analog;
    for (const cd& p : proto) {
        const cd b = bw * p;
        const cd disc = std::sqrt(b * b - 4.0 * w0 * w0);
        analog.push_back((b + disc) / 2.0);
        analog.push_back((b - disc) / 2.0);
    }

    // bilinear transform
    std::vector<cd> digital;
    for (const cd& s : analog) digital.push_back((k + s) / (k - s));

    // group into conjugate (or real) pairs
    std::vector<cd> upper, reals;
    for (const cd& p : digital) {
        if (p.imag() > 1e-12)
            upper.push_back(p);
        else if (p.imag() >= -1e-12)
            reals.push_back(p);
    }
    std::sort(upper.begin(), upper.end(), [](const cd& a, const cd& b) {
        return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
    });
    std::sort(reals.begin(), reals.end(), [](const cd& a, const cd& b) { return a.real() < b.real(); });

    std::vector<Biquad> sos;
    for (const cd& p : upper) {
        Biquad q;
        q.b0 = 1.0;
        q.b1 = 0.0;
        q.b2 = -1.0;  // zeros at z = +1 and z = -1
        q.a1 = -2.0 * p.real();
        q.a2 = std::norm(p);
        sos.push_back(q);
    }
    for (size_t i = 0; i + 1 < reals.size(); i += 2) {
        Biquad q;
        q.b0 = 1.0;
        q.b1 = 0.0;
        q.b2 = -1.0;
        q.a1 = -(reals[i].real() + reals[i + 1].real());
        q.a2 = reals[i].real() * reals[i + 1].real();
        sos.push_back(q);
    }
    if (static_cast<int>(sos.size()) != order)
        throw NumericalError("butterworth: pole pairing failed");

    // exact unit gain at the (digital image of the) center frequency
    const double f0 = fs / M_PI * std::atan(w0 / k);
    std::vector<Biquad> unscaled = sos;
    const double g = std::abs(sos_response(unscaled, f0, fs));
    if (!(g > 0) || !std::isfinite(g)) throw NumericalError("butterworth: degenerate center gain");
    const double fix = std::pow(1.0 / g, 1.0 / order);
    for (Biquad& q : sos) {
        q.b0 *= fix;
        q.b1 *= fix;
        q.b2 *= fix;
    }
    return sos;
}

std::complex<double> sos_response(const std::vector<Biquad>& sos, double freq_hz, double fs) {
    using cd = std::complex<double>;
    const double w = 2.0 * M_PI * freq_hz / fs;
    const cd z1 = std::polar(1.0, -w);  // z^-1
    const cd z2 = z1 * z1;
    cd h(1.0, 0.0);
    for (const Biquad& q : sos)
        h *= (q.b0 + q.b1 * z1 + q.b2 * z2) / (1.0 + q.a1 * z1 + q.a2 * z2);
    return h;
}

std::vector<double> apply_sos(const std::vector<Biquad>& sos, const std::vector<double>& signal) {
    std::vector<double> x = signal;
    for (const Biquad& q : sos) {
        double d1 = 0.0, d2 = 0.0;  // direct form II transposed
        for (double& v : x) {
            const double in = v;
            const double out = q.b0 * in + d1;
            d1 = q.b1 * in - q.a1 * out + d2;
            d2 = q.b2 * in - q.a2 * out;
            v = out;
        }
    }
    return x;
}

std::vector<double> butterworth_bandpass(const std::vector<double>& signal, double low_hz,
                                         double high_hz, int order, double fs, bool zero_phase) {
    const auto sos = design_butterworth_bandpass(low_hz, high_hz, order, fs);
    std::vector<double> out = apply_sos(sos, signal);
    if (zero_phase) {
        std::reverse(out.begin(), out.end());
        out = apply_sos(sos, out);
        std::reverse(out.begin(), out.end());
    }
    return out;
}

std::vector<double> zscore(const std::vector<double>& signal) {
    const long n = static_cast<long>(signal.size());
    if (n == 0) throw ContractError("zscore: empty signal");
    double mean = 0.0;
    for (double v : signal) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : signal) var += (v - mean) * (v - mean);
    var /= n;
    if (var <= 0.0) throw ContractError("zscore: zero variance");
    const double inv = 1.0 / std::sqrt(var);
    std::vector<double> out(n);
    for (long i = 0; i < n; ++i) out[i] = (signal[i] - mean) * inv;
    return out;
}

std::vector<double> condition_signal(const std::vector<double>& signal, double fs, int detrend_order,
                                     double low_hz, double high_hz, int filter_order, bool zero_phase) {
    return zscore(butterworth_bandpass(detrend_poly(signal, detrend_order), low_hz, high_hz,
                                       filter_order, fs, zero_phase));
}

std::vector<Beat> extract_beats(const std::vector<double>& signal,
                                const std::vector<BeatAnnotation>& annotations, int window) {
    if (window < 2 || window % 2 != 0) throw ContractError("extract_beats: window must be even");
    const long n = static_cast<long>(signal.size());
    const int half = window / 2;
    std::vector<Beat> beats;
    for (const auto& a : annotations) {
        if (a.symbol == 'Q') continue;  // unknown class removed
        const long start = a.sample - half;
        if (start < 0 || start + window > n) continue;  // window leaves the recording
        Beat b;
        b.symbol = a.symbol;
        b.r_sample = a.sample;
        b.samples.assign(signal.begin() + start, signal.begin() + start + window);
        beats.push_back(std::move(b));
    }
    return beats;
}

std::vector<BeatUnit> beats_to_units(const std::vector<Beat>& beats, int group, int stride,
                                     const std::string& subject) {
    if (group < 1 || stride < 1) throw ContractError("beats_to_units: group and stride must be >= 1");
    std::vector<BeatUnit> units;
    const long n = static_cast<long>(beats.size());
    for (long start = 0; start + group <= n; start += stride) {
        BeatUnit u;
        u.subject = subject;
        u.start_beat = start;
        const int width = static_cast<int>(beats[start].samples.size());
        u.matrix = Matrix(group, width);
        u.label = 0;
        for (int r = 0; r < group; ++r) {
            const Beat& b = beats[start + r];
            if (static_cast<int>(b.samples.size()) != width)
                throw ShapeError("beats_to_units: inconsistent beat lengths");
            for (int j = 0; j < width; ++j) u.matrix(r, j) = b.samples[j];
            if (is_abnormal(b.symbol)) u.label = 1;
        }
        units.push_back(std::move(u));
    }
    return units;
}

std::pair<std::vector<BeatUnit>, std::vector<BeatUnit>> split_by_subject(
    const std::vector<BeatUnit>& units, double test_fraction, uint64_t seed) {
    std::vector<std::string> subjects;
    for (const auto& u : units)
        if (std::find(subjects.begin(), subjects.end(), u.subject) == subjects.end())
            subjects.push_back(u.subject);
    if (subjects.size() < 2) throw ContractError("split_by_subject: need at least 2 subjects");

    std::sort(subjects.begin(), subjects.end());
    std::mt19937_64 rng(seed);
    std::shuffle(subjects.begin(), subjects.end(), rng);
    long n_test = std::lround(test_fraction * static_cast<double>(subjects.size()));
    n_test = std::clamp<long>(n_test, 1, static_cast<long>(subjects.size()) - 1);

    std::vector<std::string> test_subjects(subjects.begin(), subjects.begin() + n_test);
    auto in_test = [&test_subjects](const std::string& s) {
        return std::find(test_subjects.begin(), test_subjects.end(), s) != test_subjects.end();
    };
    std::pair<std::vector<BeatUnit>, std::vector<BeatUnit>> out;
    for (const auto& u : units) (in_test(u.subject) ? out.second : out.first).push_back(u);
    return out;
}

Dataset units_to_sequences(const std::vector<BeatUnit>& units, int seq_len, int seq_stride) {
    if (seq_len < 2 || seq_stride < 1)
        throw ContractError("units_to_sequences: need seq_len >= 2, stride >= 1");
    Dataset out;
    size_t group_start = 0;
    while (group_start < units.size()) {
        size_t group_end = group_start;
        while (group_end < units.size() && units[group_end].subject == units[group_start].subject)
            ++group_end;
        for (size_t s = group_start; s + seq_len <= group_end; s += seq_stride) {
            MatrixSequence seq;
            seq.id = units[s].subject + ":" + std::to_string(units[s].start_beat);
            for (int t = 0; t < seq_len; ++t) seq.frames.push_back(units[s + t].matrix);
            seq.label = units[s + seq_len - 1].label;
            out.push_back(std::move(seq));
        }
        group_start = group_end;
    }
    return out;
}

}  // namespace matad::ecgpipe

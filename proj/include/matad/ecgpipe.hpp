#pragma once

#include <complex>
#include <cstdint>
#include <map>

#include "matad/sequence.hpp"

namespace matad::ecgpipe {

// ---- WFDB ingestion ---------------------------------------------------------
struct EcgRecording {
    std::string subject;
    std::vector<std::string> channel_names;
    std::vector<std::vector<double>> channels;  // ADC units, equal lengths
    double sampling_rate = 360.0;
};

// Format 212: each 3-byte group packs two 12-bit two's-complement samples,
//   s1 = b0 | ((b1 & 0x0F) << 8),  s2 = b2 | ((b1 & 0xF0) << 4),
// sign-extended from bit 11; samples interleave across channels.
std::vector<std::vector<double>> read_wfdb_212(const std::vector<uint8_t>& bytes, int n_channels,
                                               long n_samples);
std::vector<uint8_t> encode_wfdb_212(const std::vector<std::vector<double>>& channels);

struct HeaderInfo {
    std::string record;
    int n_channels = 0;
    double sampling_rate = 0.0;
    long n_samples = 0;
    std::vector<std::string> channel_names;  // signal description field
    std::vector<std::string> dat_files;
};
HeaderInfo parse_hea(const std::string& text);
HeaderInfo read_hea(const std::string& path);
EcgRecording read_record(const std::string& dir, const std::string& record);

// ---- annotations -------------------------------------------------------------
struct BeatAnnotation {
    long sample = 0;
    char symbol = 'N';  // one of N V S F Q
};
bool is_abnormal(char symbol);  // V, S, F
std::vector<BeatAnnotation> read_annotation_csv(const std::string& path);
std::vector<BeatAnnotation> parse_annotation_csv(const std::string& text);

// ---- signal conditioning -------------------------------------------------------
struct PolyFit {
    std::vector<double> coeffs;  // monomial basis on time normalized to [-1,1]
    std::vector<double> fitted;
    std::vector<double> detrended;
};
// Least-squares polynomial fit via orthogonalized basis vectors (time axis
// normalized to [-1,1] for conditioning), subtracted from the signal.
PolyFit detrend_fit(const std::vector<double>& signal, int order);
std::vector<double> detrend_poly(const std::vector<double>& signal, int order = 6);

struct Biquad {
    double b0 = 0, b1 = 0, b2 = 0;  // numerator
    double a1 = 0, a2 = 0;          // denominator (a0 = 1)
};
// Analog Butterworth prototype of `order`, lowpass-to-bandpass transform,
// bilinear transform with prewarping, normalized to unit gain at the
// geometric center frequency.
std::vector<Biquad> design_butterworth_bandpass(double low_hz, double high_hz, int order, double fs);
// |H(e^{j 2 pi f / fs})| of the cascade.
std::complex<double> sos_response(const std::vector<Biquad>& sos, double freq_hz, double fs);
std::vector<double> apply_sos(const std::vector<Biquad>& sos, const std::vector<double>& signal);
std::vector<double> butterworth_bandpass(const std::vector<double>& signal, double low_hz = 5.0,
                                         double high_hz = 15.0, int order = 6, double fs = 360.0,
                                         bool zero_phase = false);

std::vector<double> zscore(const std::vector<double>& signal);

// detrend -> bandpass -> z-score, per channel
std::vector<double> condition_signal(const std::vector<double>& signal, double fs = 360.0,
                                     int detrend_order = 6, double low_hz = 5.0, double high_hz = 15.0,
                                     int filter_order = 6, bool zero_phase = false);

// ---- beats and units -----------------------------------------------------------
struct Beat {
    std::vector<double> samples;  // window centered on the R peak
    char symbol = 'N';
    long r_sample = 0;
};
// Window/2 samples before the annotated R peak and window/2 after; beats whose
// window leaves the recording are dropped, as is the unknown class Q.
std::vector<Beat> extract_beats(const std::vector<double>& signal,
                                const std::vector<BeatAnnotation>& annotations, int window = 360);

struct BeatUnit {
    Matrix matrix;  // one heartbeat per row
    int label = 0;  // 1 iff any member beat is V, S or F
    std::string subject;
    long start_beat = 0;
};
std::vector<BeatUnit> beats_to_units(const std::vector<Beat>& beats, int group, int stride,
                                     const std::string& subject = "");

std::pair<std::vector<BeatUnit>, std::vector<BeatUnit>> split_by_subject(
    const std::vector<BeatUnit>& units, double test_fraction, uint64_t seed);

// Sequences of `seq_len` consecutive units (stride `seq_stride`), never
// straddling subjects; the sequence label is the last unit's label, matching
// prediction-style scoring of the most recent group.
Dataset units_to_sequences(const std::vector<BeatUnit>& units, int seq_len, int seq_stride = 1);

}  // namespace matad::ecgpipe

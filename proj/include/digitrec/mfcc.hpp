#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <vector>

#include "digitrec/audio.hpp"
#include "digitrec/common.hpp"

namespace digitrec {

struct MfccConfig {
    double frame_len_ms = 25.0;
    double hop_ms = 10.0;
    std::size_t n_fft = 2048;
    std::size_t n_mels = 26;
    std::size_t n_coeffs = 13;
    double fmin = 0.0;
    double fmax = 0.0;  // 0 means Nyquist (rate/2) at extraction time
    double pre_emphasis = 0.97;
    std::size_t delta_window = 2;
    std::size_t target_frames = 39;
    double log_floor = 1e-10;

    void validate() const;
    std::size_t frame_len_samples(int rate) const;
    std::size_t hop_samples(int rate) const;
};

// Coefficient matrices are rows x columns = coefficients x frames.
using CoeffMatrix = std::vector<std::vector<double>>;

// The 39x39 CNN input: rows 0-12 static MFCCs, 13-25 deltas, 26-38
// delta-deltas; columns are frames.
struct FeatureMap {
    static constexpr std::size_t kSize = 39;
    std::array<double, kSize * kSize> values{};

    double& at(std::size_t r, std::size_t c) { return values[r * kSize + c]; }
    double at(std::size_t r, std::size_t c) const { return values[r * kSize + c]; }
};

// Per-row standardization statistics computed on a training set.
struct RowStats {
    std::array<double, FeatureMap::kSize> mean{};
    std::array<double, FeatureMap::kSize> stddev{};
};

// y[0] = x[0]; y[t] = x[t] - alpha * x[t-1].
std::vector<double> pre_emphasize(const std::vector<double>& signal, double alpha);

// Frame i covers [i*hop, i*hop + frame_len); count = 1 + floor((len-frame)/hop)
// when the signal is long enough, otherwise one zero-padded frame.
std::vector<std::vector<double>> frame_signal(const std::vector<double>& signal,
                                              std::size_t frame_len, std::size_t hop);

// Hamming-windowed, zero-padded periodogram: P[k] = |DFT_k|^2 / n_fft
// for k = 0..n_fft/2.
std::vector<double> power_spectrum(const std::vector<double>& frame, std::size_t n_fft);

// Triangular mel filters on n_mels+2 equally-mel-spaced points; each row
// peaks at exactly 1 on its center bin.
std::vector<std::vector<double>> mel_filterbank(std::size_t n_mels, std::size_t n_fft,
                                                int rate, double fmin, double fmax);

// Full chain: pre-emphasis, framing, power spectra, mel energies,
// floored log, orthonormal DCT-II, keep coefficients 0..n_coeffs-1.
// Result is n_coeffs x T over the clip's true frame count.
CoeffMatrix mfcc(const AudioClip& clip, const MfccConfig& config);

// Regression deltas with window N and edge replication:
// d[t] = sum_n n*(c[t+n] - c[t-n]) / (2 * sum_n n^2).
CoeffMatrix delta(const CoeffMatrix& coeffs, std::size_t window);

// Static + delta + delta-delta stack, symmetrically zero-padded or
// center-cropped to 39 frames, then per-row standardized when stats are
// supplied (identity otherwise).
FeatureMap feature_map(const AudioClip& clip, const MfccConfig& config,
                       const RowStats* stats = nullptr);

// Mean/std per row over a set of maps; zero-variance rows get std 1 so
// standardization stays finite.
RowStats compute_row_stats(const std::vector<FeatureMap>& maps);

FeatureMap standardize(const FeatureMap& map, const RowStats& stats);

// Flat binary record: magic, version, rows, cols, row-major float32 payload.
void write_feature_record(const FeatureMap& map, const std::filesystem::path& file);
FeatureMap read_feature_record(const std::filesystem::path& file);

// Everything between a WAV on disk and a raw feature map: target rate,
// optional spectral noise gate, optional silence trim, and the MFCC chain.
// Carried inside checkpoints so prediction preprocesses exactly like the
// features the model trained on.
struct FeaturePipeline {
    int sample_rate = 44100;
    bool denoise = false;
    double noise_gate = 1.5;
    std::size_t noise_nfft = 2048;
    bool trim = true;
    double trim_threshold_db = -40.0;
    double trim_frame_ms = 20.0;
    MfccConfig mfcc;
};

// Resample, denoise (profile estimated per clip), trim, extract.
FeatureMap featurize_clip(const AudioClip& clip, const FeaturePipeline& pipeline);

}  // namespace digitrec

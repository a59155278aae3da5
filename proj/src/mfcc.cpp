#include "digitrec/mfcc.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "digitrec/dsp.hpp"
#include "digitrec/preprocess.hpp"

namespace digitrec {

namespace {

constexpr char kRecordMagic[4] = {'D', 'G', 'F', 'M'};
constexpr std::uint32_t kRecordVersion = 1;

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

}  // namespace

void MfccConfig::validate() const {
    if (frame_len_ms <= 0.0 || hop_ms <= 0.0)
        raise(Errc::invalid_config, "frame and hop lengths must be positive");
    if (hop_ms > frame_len_ms) raise(Errc::invalid_config, "hop must not exceed frame length");
    if (!is_power_of_two(n_fft)) raise(Errc::bad_fft_size, "n_fft must be a power of two");
    if (n_coeffs == 0 || n_coeffs > n_mels)
        raise(Errc::invalid_config, "need 1 <= n_coeffs <= n_mels");
    if (!(pre_emphasis >= 0.0 && pre_emphasis < 1.0))
        raise(Errc::invalid_config, "pre_emphasis must lie in [0, 1)");
    if (delta_window < 1) raise(Errc::invalid_config, "delta_window must be at least 1");
    if (target_frames == 0) raise(Errc::invalid_config, "target_frames must be positive");
    if (log_floor <= 0.0) raise(Errc::invalid_config, "log_floor must be positive");
}

std::size_t MfccConfig::frame_len_samples(int rate) const {
    return static_cast<std::size_t>(frame_len_ms * rate / 1000.0);
}

std::size_t MfccConfig::hop_samples(int rate) const {
    return static_cast<std::size_t>(hop_ms * rate / 1000.0);
}

std::vector<double> pre_emphasize(const std::vector<double>& signal, double alpha) {
    std::vector<double> out(signal.size());
    if (signal.empty()) return out;
    out[0] = signal[0];
    for (std::size_t t = 1; t < signal.size(); ++t) out[t] = signal[t] - alpha * signal[t - 1];
    return out;
}

std::vector<std::vector<double>> frame_signal(const std::vector<double>& signal,
                                              std::size_t frame_len, std::size_t hop) {
    if (hop == 0 || frame_len < hop) raise(Errc::invalid_config, "need frame_len >= hop >= 1");

    std::size_t n_frames = 1;
    if (signal.size() >= frame_len) n_frames = 1 + (signal.size() - frame_len) / hop;

    std::vector<std::vector<double>> frames(n_frames, std::vector<double>(frame_len, 0.0));
    for (std::size_t f = 0; f < n_frames; ++f) {
        const std::size_t start = f * hop;
        const std::size_t avail = signal.size() > start ? signal.size() - start : 0;
        const std::size_t len = std::min(frame_len, avail);
        for (std::size_t i = 0; i < len; ++i) frames[f][i] = signal[start + i];
    }
    return frames;
}

std::vector<double> power_spectrum(const std::vector<double>& frame, std::size_t n_fft) {
    if (!is_power_of_two(n_fft) || n_fft < frame.size())
        raise(Errc::bad_fft_size, "n_fft must be a power of two covering the frame");

    const auto window = hamming_window(frame.size());
    std::vector<double> windowed(frame.size());
    for (std::size_t i = 0; i < frame.size(); ++i) windowed[i] = frame[i] * window[i];

    const auto spec = rfft(windowed, n_fft);
    std::vector<double> power(spec.size());
    for (std::size_t k = 0; k < spec.size(); ++k)
        power[k] = std::norm(spec[k]) / static_cast<double>(n_fft);
    return power;
}

std::vector<std::vector<double>> mel_filterbank(std::size_t n_mels, std::size_t n_fft,
                                                int rate, double fmin, double fmax) {
    if (fmax <= 0.0) fmax = rate / 2.0;
    if (!(fmin >= 0.0 && fmin < fmax && fmax <= rate / 2.0))
        raise(Errc::invalid_config, "need 0 <= fmin < fmax <= rate/2");
    if (n_mels == 0) raise(Errc::invalid_config, "n_mels must be positive");

    // n_mels+2 equally spaced points on the mel axis, mapped to FFT bins.
    const double mel_lo = hz_to_mel(fmin);
    const double mel_hi = hz_to_mel(fmax);
    std::vector<std::size_t> bin(n_mels + 2);
    for (std::size_t i = 0; i < bin.size(); ++i) {
        const double mel = mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) /
                                        static_cast<double>(n_mels + 1);
        const double hz = mel_to_hz(mel);
        bin[i] = static_cast<std::size_t>((n_fft + 1) * hz / rate);
    }
    for (std::size_t m = 1; m + 1 < bin.size(); ++m)
        if (bin[m] == bin[m - 1] || bin[m] == bin[m + 1])
            raise(Errc::degenerate_band, "mel filter centers collide; increase n_fft");

    const std::size_t n_bins = n_fft / 2 + 1;
    std::vector<std::vector<double>> bank(n_mels, std::vector<double>(n_bins, 0.0));
    for (std::size_t m = 0; m < n_mels; ++m) {
        const std::size_t lo = bin[m], center = bin[m + 1], hi = bin[m + 2];
        for (std::size_t k = lo + 1; k < center; ++k)
            bank[m][k] = static_cast<double>(k - lo) / static_cast<double>(center - lo);
        bank[m][center] = 1.0;
        for (std::size_t k = center + 1; k < hi && k < n_bins; ++k)
            bank[m][k] = static_cast<double>(hi - k) / static_cast<double>(hi - center);
    }
    return bank;
}

namespace {

// Orthonormal DCT-II of one vector, truncated to n_out coefficients.
std::vector<double> dct2_ortho(const std::vector<double>& x, std::size_t n_out) {
    const std::size_t n = x.size();
    std::vector<double> out(n_out, 0.0);
    for (std::size_t k = 0; k < n_out; ++k) {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            acc += x[i] * std::cos(M_PI * (2.0 * i + 1.0) * k / (2.0 * n));
        const double scale = k == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
        out[k] = scale * acc;
    }
    return out;
}

}  // namespace

CoeffMatrix mfcc(const AudioClip& clip, const MfccConfig& config) {
    config.validate();
    if (clip.empty()) raise(Errc::empty_clip, "cannot extract features from an empty clip");

    const std::size_t frame_len = config.frame_len_samples(clip.sample_rate);
    const std::size_t hop = config.hop_samples(clip.sample_rate);
    if (frame_len == 0 || hop == 0)
        raise(Errc::invalid_config, "frame or hop shorter than one sample at this rate");
    if (config.n_fft < frame_len)
        raise(Errc::bad_fft_size, "n_fft smaller than the frame length in samples");

    const auto emphasized = pre_emphasize(clip.samples, config.pre_emphasis);
    const auto frames = frame_signal(emphasized, frame_len, hop);
    const auto bank =
        mel_filterbank(config.n_mels, config.n_fft, clip.sample_rate, config.fmin, config.fmax);

    CoeffMatrix coeffs(config.n_coeffs, std::vector<double>(frames.size(), 0.0));
    std::vector<double> log_mel(config.n_mels);
    for (std::size_t t = 0; t < frames.size(); ++t) {
        const auto power = power_spectrum(frames[t], config.n_fft);
        for (std::size_t m = 0; m < config.n_mels; ++m) {
            double energy = 0.0;
            for (std::size_t k = 0; k < power.size(); ++k) energy += bank[m][k] * power[k];
            log_mel[m] = std::log(std::max(energy, config.log_floor));
        }
        const auto cep = dct2_ortho(log_mel, config.n_coeffs);
        for (std::size_t c = 0; c < config.n_coeffs; ++c) coeffs[c][t] = cep[c];
    }
    return coeffs;
}

CoeffMatrix delta(const CoeffMatrix& coeffs, std::size_t window) {
    if (window < 1) raise(Errc::invalid_config, "delta window must be at least 1");
    if (coeffs.empty() || coeffs[0].empty()) raise(Errc::shape_mismatch, "empty coefficient matrix");

    const long long T = static_cast<long long>(coeffs[0].size());
    double denom = 0.0;
    for (std::size_t n = 1; n <= window; ++n) denom += static_cast<double>(n) * n;
    denom *= 2.0;

    CoeffMatrix out(coeffs.size(), std::vector<double>(coeffs[0].size(), 0.0));
    for (std::size_t r = 0; r < coeffs.size(); ++r) {
        const auto& row = coeffs[r];
        for (long long t = 0; t < T; ++t) {
            double acc = 0.0;
            for (long long n = 1; n <= static_cast<long long>(window); ++n) {
                const auto ahead = static_cast<std::size_t>(std::clamp(t + n, 0LL, T - 1));
                const auto behind = static_cast<std::size_t>(std::clamp(t - n, 0LL, T - 1));
                acc += static_cast<double>(n) * (row[ahead] - row[behind]);
            }
            out[r][static_cast<std::size_t>(t)] = acc / denom;
        }
    }
    return out;
}

FeatureMap feature_map(const AudioClip& clip, const MfccConfig& config, const RowStats* stats) {
    const CoeffMatrix statics = mfcc(clip, config);
    const CoeffMatrix d1 = delta(statics, config.delta_window);
    const CoeffMatrix d2 = delta(d1, config.delta_window);

    const std::size_t n = config.n_coeffs;
    const std::size_t T = statics[0].size();
    const std::size_t target = FeatureMap::kSize;
    if (3 * n != target)
        raise(Errc::shape_mismatch, "static+delta+delta-delta rows must total 39");

    FeatureMap map;  // zero-initialized: padding columns stay 0
    // Fit the frame axis: center-crop long sequences, center-pad short ones.
    const std::size_t src_start = T > target ? (T - target) / 2 : 0;
    const std::size_t dst_start = T < target ? (target - T) / 2 : 0;
    const std::size_t span = std::min(T, target);

    const CoeffMatrix* blocks[3] = {&statics, &d1, &d2};
    for (std::size_t b = 0; b < 3; ++b)
        for (std::size_t r = 0; r < n; ++r)
            for (std::size_t c = 0; c < span; ++c)
                map.at(b * n + r, dst_start + c) = (*blocks[b])[r][src_start + c];

    if (stats) return standardize(map, *stats);
    return map;
}

RowStats compute_row_stats(const std::vector<FeatureMap>& maps) {
    if (maps.empty()) raise(Errc::empty_dataset, "cannot compute statistics of zero maps");
    constexpr std::size_t n = FeatureMap::kSize;
    RowStats stats;
    const double count = static_cast<double>(maps.size() * n);
    for (std::size_t r = 0; r < n; ++r) {
        double sum = 0.0;
        for (const auto& m : maps)
            for (std::size_t c = 0; c < n; ++c) sum += m.at(r, c);
        const double mean = sum / count;
        double var = 0.0;
        for (const auto& m : maps)
            for (std::size_t c = 0; c < n; ++c) {
                const double d = m.at(r, c) - mean;
                var += d * d;
            }
        var /= count;
        stats.mean[r] = mean;
        stats.stddev[r] = var > 1e-16 ? std::sqrt(var) : 1.0;
    }
    return stats;
}

FeatureMap standardize(const FeatureMap& map, const RowStats& stats) {
    FeatureMap out;
    for (std::size_t r = 0; r < FeatureMap::kSize; ++r)
        for (std::size_t c = 0; c < FeatureMap::kSize; ++c)
            out.at(r, c) = (map.at(r, c) - stats.mean[r]) / stats.stddev[r];
    return out;
}

void write_feature_record(const FeatureMap& map, const std::filesystem::path& file) {
    std::ofstream out(file, std::ios::binary);
    if (!out) raise(Errc::io_error, "cannot open feature record for writing: " + file.string());

    out.write(kRecordMagic, 4);
    const std::uint32_t header[3] = {kRecordVersion, FeatureMap::kSize, FeatureMap::kSize};
    out.write(reinterpret_cast<const char*>(header), sizeof(header));
    std::vector<float> payload(map.values.size());
    for (std::size_t i = 0; i < payload.size(); ++i) payload[i] = static_cast<float>(map.values[i]);
    out.write(reinterpret_cast<const char*>(payload.data()),
              static_cast<std::streamsize>(payload.size() * sizeof(float)));
    if (!out) raise(Errc::io_error, "short write on feature record: " + file.string());
}

FeatureMap read_feature_record(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) raise(Errc::file_not_found, "cannot open feature record: " + file.string());

    char magic[4];
    std::uint32_t header[3];
    in.read(magic, 4);
    in.read(reinterpret_cast<char*>(header), sizeof(header));
    if (!in || std::memcmp(magic, kRecordMagic, 4) != 0)
        raise(Errc::malformed_header, "not a feature record: " + file.string());
    if (header[0] != kRecordVersion)
        raise(Errc::version_mismatch, "unsupported feature record version");
    if (header[1] != FeatureMap::kSize || header[2] != FeatureMap::kSize)
        raise(Errc::shape_mismatch, "feature record is not 39x39");

    std::vector<float> payload(FeatureMap::kSize * FeatureMap::kSize);
    in.read(reinterpret_cast<char*>(payload.data()),
            static_cast<std::streamsize>(payload.size() * sizeof(float)));
    if (!in) raise(Errc::malformed_header, "feature record truncated: " + file.string());

    FeatureMap map;
    for (std::size_t i = 0; i < payload.size(); ++i) map.values[i] = payload[i];
    return map;
}

FeatureMap featurize_clip(const AudioClip& clip, const FeaturePipeline& pipeline) {
    AudioClip work = clip;
    if (work.sample_rate != pipeline.sample_rate) work = resample(work, pipeline.sample_rate);
    if (pipeline.denoise) {
        // Profile before trimming: the quiet frames being removed are
        // exactly the ones that characterize the noise floor.
        const auto profile = estimate_noise_profile(work, pipeline.noise_nfft);
        work = reduce_noise(work, profile, pipeline.noise_gate, pipeline.noise_nfft);
    }
    if (pipeline.trim)
        work = trim_silence(work, pipeline.trim_threshold_db, pipeline.trim_frame_ms);
    return feature_map(work, pipeline.mfcc);
}

}  // namespace digitrec

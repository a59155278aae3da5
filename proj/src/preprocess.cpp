#include "digitrec/preprocess.hpp"

#include <algorithm>
#include <cmath>

#include "digitrec/dsp.hpp"

namespace digitrec {

namespace {

double frame_rms(const std::vector<double>& x, std::size_t start, std::size_t len) {
    double acc = 0.0;
    for (std::size_t i = start; i < start + len; ++i) acc += x[i] * x[i];
    return std::sqrt(acc / static_cast<double>(len));
}

}  // namespace

AudioClip trim_silence(const AudioClip& clip, double threshold_db, double frame_ms) {
    if (clip.empty()) raise(Errc::empty_clip, "cannot trim an empty clip");
    if (frame_ms <= 0.0) raise(Errc::invalid_config, "frame_ms must be positive");

    const std::size_t frame_len = std::max<std::size_t>(
        1, static_cast<std::size_t>(frame_ms * clip.sample_rate / 1000.0));

    double peak = 0.0;
    for (double s : clip.samples) peak = std::max(peak, std::abs(s));
    const double threshold = peak * std::pow(10.0, threshold_db / 20.0);

    // Non-overlapping frames; a partial tail frame still counts.
    const std::size_t n = clip.size();
    const std::size_t n_frames = (n + frame_len - 1) / frame_len;

    std::size_t first = n_frames, last = n_frames;  // sentinel: none found
    std::size_t loudest = 0;
    double loudest_rms = -1.0;
    for (std::size_t f = 0; f < n_frames; ++f) {
        const std::size_t start = f * frame_len;
        const std::size_t len = std::min(frame_len, n - start);
        const double rms = frame_rms(clip.samples, start, len);
        if (rms > loudest_rms) {
            loudest_rms = rms;
            loudest = f;
        }
        if (rms >= threshold) {
            if (first == n_frames) first = f;
            last = f;
        }
    }
    if (first == n_frames) {
        // Everything is below the threshold; keep the loudest frame so the
        // result is never empty.
        first = last = loudest;
    }

    const std::size_t begin = first * frame_len;
    const std::size_t end = std::min(n, (last + 1) * frame_len);
    AudioClip out;
    out.sample_rate = clip.sample_rate;
    out.samples.assign(clip.samples.begin() + static_cast<long>(begin),
                       clip.samples.begin() + static_cast<long>(end));
    return out;
}

std::vector<double> estimate_noise_profile(const AudioClip& clip, std::size_t n_fft) {
    if (clip.empty()) raise(Errc::empty_clip, "cannot profile an empty clip");
    const Stft stft = stft_analyze(clip.samples, n_fft, n_fft / 2);
    const std::size_t n_frames = stft.frames.size();
    if (n_frames < 10) raise(Errc::too_short, "need at least 10 analysis frames to estimate noise");

    // Rank frames by total energy and average the quietest 10%.
    std::vector<double> energy(n_frames, 0.0);
    for (std::size_t f = 0; f < n_frames; ++f)
        for (const auto& bin : stft.frames[f]) energy[f] += std::norm(bin);

    std::vector<std::size_t> order(n_frames);
    for (std::size_t i = 0; i < n_frames; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return energy[a] < energy[b]; });

    const std::size_t keep = std::max<std::size_t>(1, n_frames / 10);
    const std::size_t n_bins = n_fft / 2 + 1;
    std::vector<double> profile(n_bins, 0.0);
    for (std::size_t r = 0; r < keep; ++r) {
        const auto& spec = stft.frames[order[r]];
        for (std::size_t k = 0; k < n_bins; ++k) profile[k] += std::abs(spec[k]);
    }
    for (double& v : profile) v /= static_cast<double>(keep);
    return profile;
}

AudioClip reduce_noise(const AudioClip& clip, const std::vector<double>& profile,
                       double gate_factor, std::size_t n_fft) {
    if (clip.empty()) raise(Errc::empty_clip, "cannot denoise an empty clip");
    if (gate_factor < 0.0) raise(Errc::invalid_config, "gate_factor must be nonnegative");
    const std::size_t n_bins = n_fft / 2 + 1;
    if (profile.size() != n_bins)
        raise(Errc::profile_length_mismatch, "noise profile has wrong number of bins");

    Stft stft = stft_analyze(clip.samples, n_fft, n_fft / 2);
    for (auto& spec : stft.frames)
        for (std::size_t k = 0; k < n_bins; ++k)
            if (std::abs(spec[k]) < gate_factor * profile[k]) spec[k] = {0.0, 0.0};

    AudioClip out;
    out.sample_rate = clip.sample_rate;
    out.samples = stft_synthesize(stft, clip.samples);
    for (double& s : out.samples) s = std::clamp(s, -1.0, 1.0);
    return out;
}

}  // namespace digitrec

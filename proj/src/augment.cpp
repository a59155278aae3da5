#include "digitrec/augment.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>

#include "digitrec/rng.hpp"

namespace digitrec {

void AugmentConfig::validate() const {
    if (shift_range_ms < 0.0) raise(Errc::invalid_config, "shift_range_ms must be nonnegative");
    if (speed_factors.empty()) raise(Errc::invalid_config, "speed_factors must not be empty");
    for (double f : speed_factors)
        if (!(f > 0.5 && f <= 2.0))
            raise(Errc::invalid_config, "speed factors must lie in (0.5, 2.0]");
    if (snr_db_choices.empty()) raise(Errc::invalid_config, "snr_db_choices must not be empty");
    if (gain_db_range.first > gain_db_range.second)
        raise(Errc::invalid_config, "gain_db_range low exceeds high");
    if (multiplier < 1) raise(Errc::invalid_config, "multiplier must be at least 1");
}

AudioClip time_shift(const AudioClip& clip, double shift_ms) {
    if (clip.empty()) raise(Errc::empty_clip, "cannot shift an empty clip");
    if (std::abs(shift_ms) >= clip.duration_s() * 1000.0)
        raise(Errc::shift_out_of_range, "shift exceeds clip duration");

    const long long k = std::llround(shift_ms * clip.sample_rate / 1000.0);
    const long long n = static_cast<long long>(clip.size());
    AudioClip out;
    out.sample_rate = clip.sample_rate;
    out.samples.assign(clip.size(), 0.0);
    for (long long i = 0; i < n; ++i) {
        const long long j = i - k;
        if (j >= 0 && j < n) out.samples[static_cast<std::size_t>(i)] = clip.samples[static_cast<std::size_t>(j)];
    }
    return out;
}

AudioClip speed_tune(const AudioClip& clip, double factor) {
    if (clip.empty()) raise(Errc::empty_clip, "cannot speed-tune an empty clip");
    if (!(factor > 0.5 && factor <= 2.0))
        raise(Errc::factor_out_of_range, "speed factor must lie in (0.5, 2.0]");

    const std::size_t out_len = static_cast<std::size_t>(
        std::llround(static_cast<double>(clip.size()) / factor));
    AudioClip out;
    out.sample_rate = clip.sample_rate;
    out.samples.resize(std::max<std::size_t>(1, out_len));
    const std::size_t last = clip.size() - 1;
    for (std::size_t i = 0; i < out.samples.size(); ++i) {
        const double pos = std::min(static_cast<double>(i) * factor, static_cast<double>(last));
        const std::size_t lo = static_cast<std::size_t>(pos);
        const std::size_t hi = std::min(lo + 1, last);
        const double frac = pos - static_cast<double>(lo);
        out.samples[i] = clip.samples[lo] + frac * (clip.samples[hi] - clip.samples[lo]);
    }
    return out;
}

AudioClip mix_noise(const AudioClip& clip, const AudioClip& noise, double snr_db) {
    if (clip.empty()) raise(Errc::empty_clip, "cannot mix into an empty clip");
    if (std::isinf(snr_db) && snr_db > 0.0) return clip;  // identity sentinel
    if (noise.empty()) raise(Errc::silent_noise, "noise clip is empty");
    if (noise.sample_rate != clip.sample_rate)
        raise(Errc::rate_mismatch, "noise sample rate differs from clip");

    // Loop or truncate the noise to the clip length.
    std::vector<double> looped(clip.size());
    for (std::size_t i = 0; i < clip.size(); ++i) looped[i] = noise.samples[i % noise.size()];

    double p_sig = 0.0, p_noise = 0.0;
    for (double s : clip.samples) p_sig += s * s;
    for (double s : looped) p_noise += s * s;
    p_sig /= static_cast<double>(clip.size());
    p_noise /= static_cast<double>(looped.size());
    if (p_noise <= 0.0) raise(Errc::silent_noise, "noise clip is silent");

    const double scale = std::sqrt(p_sig / (p_noise * std::pow(10.0, snr_db / 10.0)));
    AudioClip out;
    out.sample_rate = clip.sample_rate;
    out.samples.resize(clip.size());
    for (std::size_t i = 0; i < clip.size(); ++i)
        out.samples[i] = std::clamp(clip.samples[i] + scale * looped[i], -1.0, 1.0);
    return out;
}

AudioClip adjust_volume(const AudioClip& clip, double gain_db) {
    const double gain = std::pow(10.0, gain_db / 20.0);
    AudioClip out;
    out.sample_rate = clip.sample_rate;
    out.samples.resize(clip.size());
    for (std::size_t i = 0; i < clip.size(); ++i)
        out.samples[i] = std::clamp(clip.samples[i] * gain, -1.0, 1.0);
    return out;
}

namespace {

AudioClip draw_augmented_copy(const AudioClip& clip, const AugmentConfig& config,
                              const std::vector<AudioClip>& noise_bank, Rng& rng) {
    switch (rng.uniform_index(4)) {
        case 0: {
            // Never draw a shift the clip is too short for.
            const double limit = std::min(config.shift_range_ms, clip.duration_s() * 990.0);
            return time_shift(clip, rng.uniform(-limit, limit));
        }
        case 1:
            return speed_tune(clip, rng.choice(config.speed_factors));
        case 2: {
            const double snr = rng.choice(config.snr_db_choices);
            if (!noise_bank.empty()) {
                AudioClip noise = rng.choice(noise_bank);
                if (noise.sample_rate != clip.sample_rate)
                    noise = resample(noise, clip.sample_rate);
                return mix_noise(clip, noise, snr);
            }
            AudioClip white;
            white.sample_rate = clip.sample_rate;
            white.samples.resize(clip.size());
            for (double& s : white.samples) s = rng.normal();
            return mix_noise(clip, white, snr);
        }
        default:
            return adjust_volume(clip, rng.uniform(config.gain_db_range.first,
                                                   config.gain_db_range.second));
    }
}

}  // namespace

DatasetManifest augment_dataset(const DatasetManifest& manifest, const AugmentConfig& config,
                                const std::vector<AudioClip>& noise_bank) {
    config.validate();
    DatasetManifest out = manifest;
    for (std::size_t idx = 0; idx < manifest.entries.size(); ++idx) {
        const ManifestEntry& src = manifest.entries[idx];
        const AudioClip clip = read_wav(manifest.resolve(src));
        Rng rng(Rng::derive(config.seed, idx));
        for (std::size_t k = 1; k <= config.multiplier; ++k) {
            const AudioClip copy = draw_augmented_copy(clip, config, noise_bank, rng);

            const std::filesystem::path rel(src.path);
            const auto aug_rel =
                rel.parent_path() / (rel.stem().string() + ".aug" + std::to_string(k) + ".wav");
            write_wav(copy, manifest.root / aug_rel);

            ManifestEntry entry = src;
            entry.path = aug_rel.generic_string();
            entry.origin = ClipOrigin::augmented;
            out.entries.push_back(entry);
        }
    }
    return out;
}

}  // namespace digitrec

#pragma once

#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

#include "digitrec/audio.hpp"
#include "digitrec/common.hpp"
#include "digitrec/dataset.hpp"

namespace digitrec {

// Sentinel SNR meaning "add no noise at all".
inline constexpr double kSnrIdentity = std::numeric_limits<double>::infinity();

struct AugmentConfig {
    double shift_range_ms = 100.0;  // shifts drawn from [-range, +range]
    std::vector<double> speed_factors = {0.9, 1.0, 1.1};
    std::vector<double> snr_db_choices = {5.0, 10.0, 20.0};
    std::pair<double, double> gain_db_range = {-6.0, 6.0};
    std::size_t multiplier = 1;  // augmented copies per source clip
    std::uint64_t seed = 0;

    void validate() const;
};

// Rotates samples right by round(shift_ms * rate / 1000) with zero fill;
// positive shifts delay the onset. Length unchanged.
AudioClip time_shift(const AudioClip& clip, double shift_ms);

// Naive speed change: linear-interpolation resample to round(len / factor)
// samples while keeping the declared rate, so pitch and duration both scale.
AudioClip speed_tune(const AudioClip& clip, double factor);

// Loops/truncates noise to the clip length, scales it so the power ratio is
// snr_db, adds, and clips to [-1, 1]. snr_db = +infinity is the identity.
AudioClip mix_noise(const AudioClip& clip, const AudioClip& noise, double snr_db);

// Multiplies every sample by 10^(gain_db/20), clipped to [-1, 1].
AudioClip adjust_volume(const AudioClip& clip, double gain_db);

// Emits config.multiplier augmented copies of every manifest entry, each the
// result of one randomly drawn operator. Copies are written beside their
// source as `<stem>.aug<k>.wav`; the returned manifest holds originals plus
// copies with labels preserved. Each clip's random stream derives from
// (seed, clip index), so the result is independent of processing order.
// noise_bank supplies recorded noise for mixing; when empty, seeded white
// noise is generated instead.
DatasetManifest augment_dataset(const DatasetManifest& manifest, const AugmentConfig& config,
                                const std::vector<AudioClip>& noise_bank = {});

}  // namespace digitrec

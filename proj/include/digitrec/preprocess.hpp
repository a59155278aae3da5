#pragma once

#include <cstddef>
#include <vector>

#include "digitrec/audio.hpp"
#include "digitrec/common.hpp"

namespace digitrec {

// Drops leading and trailing frames whose RMS falls below a threshold
// relative to the clip's peak amplitude. If every frame is below the
// threshold, the single highest-RMS frame is kept (earliest on ties).
AudioClip trim_silence(const AudioClip& clip, double threshold_db = -40.0,
                       double frame_ms = 20.0);

// Average magnitude spectrum of the lowest-energy 10% of STFT frames
// (at least one), analyzed at 50% overlap. Requires at least 10 frames.
// Returns n_fft/2+1 bins.
std::vector<double> estimate_noise_profile(const AudioClip& clip,
                                           std::size_t n_fft = 2048);

// Spectral gate: zeroes every STFT bin whose magnitude falls below
// gate_factor * profile[bin], then resynthesizes via overlap-add.
// The profile must have n_fft/2+1 entries.
AudioClip reduce_noise(const AudioClip& clip, const std::vector<double>& profile,
                       double gate_factor = 1.5, std::size_t n_fft = 2048);

}  // namespace digitrec

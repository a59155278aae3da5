#pragma once

#include <filesystem>
#include <vector>

#include "digitrec/common.hpp"

namespace digitrec {

// Mono floating-point sample buffer. The unit of ingestion, preprocessing
// and augmentation; samples stay in [-1, 1].
struct AudioClip {
    std::vector<double> samples;
    int sample_rate = 44100;

    std::size_t size() const { return samples.size(); }
    bool empty() const { return samples.empty(); }
    double duration_s() const { return static_cast<double>(samples.size()) / sample_rate; }
};

// Reads a RIFF/WAVE file (PCM 16-bit or IEEE float 32-bit, mono or stereo).
// Stereo is averaged channel-wise; 16-bit samples are scaled by 1/32768.
AudioClip read_wav(const std::filesystem::path& path);

// Writes 16-bit PCM mono. Samples outside [-1, 1] are clipped.
void write_wav(const AudioClip& clip, const std::filesystem::path& path);

// Linear-interpolation resampling to target_rate.
// Output length = round(input_length * target_rate / source_rate).
AudioClip resample(const AudioClip& clip, int target_rate);

}  // namespace digitrec

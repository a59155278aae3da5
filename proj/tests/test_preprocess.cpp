#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "digitrec/preprocess.hpp"
#include "digitrec/rng.hpp"
#include "test_util.hpp"

using namespace digitrec;

namespace {

AudioClip tone(double freq, double amp, double seconds, int rate, double noise_amp = 0.0,
               std::uint64_t seed = 0) {
    Rng rng(seed);
    AudioClip clip;
    clip.sample_rate = rate;
    clip.samples.resize(static_cast<std::size_t>(seconds * rate));
    for (std::size_t i = 0; i < clip.size(); ++i) {
        const double t = static_cast<double>(i) / rate;
        clip.samples[i] = amp * std::sin(2.0 * M_PI * freq * t) + noise_amp * rng.normal();
    }
    return clip;
}

double power(const std::vector<double>& x) {
    double acc = 0.0;
    for (double v : x) acc += v * v;
    return acc / static_cast<double>(x.size());
}

}  // namespace

TEST_CASE("trim removes leading and trailing silence") {
    const int rate = 8000;
    AudioClip clip;
    clip.sample_rate = rate;
    // 100 ms silence, 200 ms tone, 100 ms silence; 20 ms frames.
    const std::size_t pad = rate / 10, body = rate / 5;
    clip.samples.assign(pad, 0.0);
    for (std::size_t i = 0; i < body; ++i)
        clip.samples.push_back(0.8 * std::sin(2.0 * M_PI * 440.0 * i / rate));
    clip.samples.insert(clip.samples.end(), pad, 0.0);

    const AudioClip trimmed = trim_silence(clip, -40.0, 20.0);
    CHECK(trimmed.size() == body);  // pads are whole frames, so the cut is exact
    CHECK(trimmed.samples[0] == clip.samples[pad]);
    CHECK(trimmed.samples.back() == clip.samples[pad + body - 1]);
}

TEST_CASE("trim keeps interior quiet stretches") {
    const int rate = 8000;
    AudioClip clip;
    clip.sample_rate = rate;
    auto burst = [&](double amp, double seconds) {
        const auto n = static_cast<std::size_t>(seconds * rate);
        for (std::size_t i = 0; i < n; ++i)
            clip.samples.push_back(amp * std::sin(2.0 * M_PI * 300.0 * i / rate));
    };
    burst(0.0, 0.1);
    burst(0.9, 0.1);
    burst(0.0, 0.1);  // quiet gap stays because trimming is ends-only
    burst(0.9, 0.1);
    burst(0.0, 0.1);

    const AudioClip trimmed = trim_silence(clip);
    CHECK(trimmed.size() == static_cast<std::size_t>(0.3 * rate));
}

TEST_CASE("when every frame is below threshold the loudest frame survives") {
    const int rate = 8000;
    AudioClip clip;
    clip.sample_rate = rate;
    clip.samples.assign(rate / 2, 0.5);  // constant hum
    clip.samples[3 * 160 + 5] = 1.0;     // lone spike makes frame 3 the loudest

    // Peak 1.0 with a -1 dB threshold puts every frame (RMS ~0.5) below it.
    const AudioClip kept = trim_silence(clip, -1.0, 20.0);
    CHECK(kept.size() == 160);
    CHECK(kept.samples[5] == 1.0);
}

TEST_CASE("an all-zero clip trims to itself") {
    // Peak 0 makes the threshold 0, and nothing lies below it.
    AudioClip clip;
    clip.sample_rate = 8000;
    clip.samples.assign(4000, 0.0);
    CHECK(trim_silence(clip).size() == clip.size());
}

TEST_CASE("trim input validation") {
    CHECK_RAISES(trim_silence(AudioClip{}), Errc::empty_clip);
    AudioClip clip;
    clip.samples = {0.1, 0.2};
    CHECK_RAISES(trim_silence(clip, -40.0, 0.0), Errc::invalid_config);
}

TEST_CASE("noise profile has one value per bin and needs enough frames") {
    AudioClip clip = tone(440.0, 0.5, 2.0, 8000, 0.01, 5);
    const auto profile = estimate_noise_profile(clip, 512);
    CHECK(profile.size() == 257);
    for (double v : profile) CHECK(v >= 0.0);

    AudioClip tiny = tone(440.0, 0.5, 0.05, 8000);
    CHECK_RAISES(estimate_noise_profile(tiny, 512), Errc::too_short);
    CHECK_RAISES(estimate_noise_profile(AudioClip{}, 512), Errc::empty_clip);
}

TEST_CASE("profile of pure noise scales with the noise level") {
    AudioClip quiet = tone(0.0, 0.0, 2.0, 8000, 0.01, 7);
    AudioClip loud = tone(0.0, 0.0, 2.0, 8000, 0.1, 7);
    const auto p_quiet = estimate_noise_profile(quiet, 512);
    const auto p_loud = estimate_noise_profile(loud, 512);
    double sum_quiet = 0.0, sum_loud = 0.0;
    for (std::size_t k = 0; k < p_quiet.size(); ++k) {
        sum_quiet += p_quiet[k];
        sum_loud += p_loud[k];
    }
    CHECK(sum_loud > 5.0 * sum_quiet);  // 10x amplitude, same seed
}

TEST_CASE("spectral gating removes most of the noise between words") {
    const int rate = 8000;
    // Tone burst in the middle of a noisy clip.
    AudioClip clip = tone(0.0, 0.0, 2.0, rate, 0.02, 11);
    for (std::size_t i = rate / 2; i < static_cast<std::size_t>(rate); ++i)
        clip.samples[i] += 0.7 * std::sin(2.0 * M_PI * 500.0 * (i - rate / 2) / rate);

    const auto profile = estimate_noise_profile(clip, 512);
    const AudioClip cleaned = reduce_noise(clip, profile, 3.0, 512);
    REQUIRE(cleaned.size() == clip.size());

    // The tail holds nothing but noise; gating should strip most of it.
    const std::vector<double> before(clip.samples.begin() + rate + rate / 2,
                                     clip.samples.end());
    const std::vector<double> after(cleaned.samples.begin() + rate + rate / 2,
                                    cleaned.samples.end());
    CHECK(power(after) < 0.2 * power(before));

    // The tone region keeps the bulk of its energy.
    const std::vector<double> tone_before(clip.samples.begin() + rate / 2,
                                          clip.samples.begin() + rate);
    const std::vector<double> tone_after(cleaned.samples.begin() + rate / 2,
                                         cleaned.samples.begin() + rate);
    CHECK(power(tone_after) > 0.5 * power(tone_before));
}

TEST_CASE("gate factor zero keeps the signal intact") {
    AudioClip clip = tone(440.0, 0.5, 1.0, 8000, 0.0, 1);
    std::vector<double> profile(257, 0.0);
    const AudioClip out = reduce_noise(clip, profile, 0.0, 512);
    REQUIRE(out.size() == clip.size());
    // abs(spec) < 0 never holds, so synthesis reproduces the input.
    for (std::size_t i = 0; i < clip.size(); ++i)
        CHECK(testutil::close(out.samples[i], clip.samples[i], 1e-9));
}

TEST_CASE("denoise input validation") {
    AudioClip clip = tone(440.0, 0.5, 1.0, 8000);
    std::vector<double> bad_profile(100, 0.0);
    CHECK_RAISES(reduce_noise(clip, bad_profile, 1.5, 512), Errc::profile_length_mismatch);
    std::vector<double> profile(257, 0.0);
    CHECK_RAISES(reduce_noise(AudioClip{}, profile, 1.5, 512), Errc::empty_clip);
    CHECK_RAISES(reduce_noise(clip, profile, -1.0, 512), Errc::invalid_config);
}

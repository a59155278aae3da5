#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <complex>
#include <vector>

#include "digitrec/dsp.hpp"
#include "digitrec/rng.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace digitrec;

TEST_CASE("fft matches the quadratic DFT") {
    Rng rng(21);
    for (std::size_t n : {8u, 64u, 256u}) {
        std::vector<double> x(n);
        for (double& v : x) v = rng.uniform(-1.0, 1.0);

        std::vector<std::complex<double>> fast(n);
        for (std::size_t i = 0; i < n; ++i) fast[i] = {x[i], 0.0};
        fft(fast);

        const auto slow = oracle::naive_dft(x, n);
        for (std::size_t k = 0; k < n; ++k) {
            CHECK(testutil::close(fast[k].real(), slow[k].real(), 1e-9));
            CHECK(testutil::close(fast[k].imag(), slow[k].imag(), 1e-9));
        }
    }
}

TEST_CASE("fft of an impulse is flat") {
    std::vector<std::complex<double>> x(16, {0.0, 0.0});
    x[0] = {1.0, 0.0};
    fft(x);
    for (const auto& v : x) {
        CHECK(v.real() == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(v.imag() == doctest::Approx(0.0).epsilon(1e-12));
    }
}

TEST_CASE("inverse fft round-trips") {
    Rng rng(3);
    std::vector<std::complex<double>> x(128);
    for (auto& v : x) v = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
    const auto original = x;
    fft(x);
    fft(x, true);
    for (std::size_t i = 0; i < x.size(); ++i) {
        CHECK(testutil::close(x[i].real(), original[i].real(), 1e-12));
        CHECK(testutil::close(x[i].imag(), original[i].imag(), 1e-12));
    }
}

TEST_CASE("fft rejects non-power-of-two sizes") {
    std::vector<std::complex<double>> x(12);
    CHECK_RAISES(fft(x), Errc::bad_fft_size);
}

TEST_CASE("rfft zero-pads and returns the half spectrum") {
    Rng rng(4);
    std::vector<double> x(100);
    for (double& v : x) v = rng.uniform(-1.0, 1.0);

    const auto half = rfft(x, 256);
    CHECK(half.size() == 129);
    const auto slow = oracle::naive_dft(x, 256);
    for (std::size_t k = 0; k < half.size(); ++k) {
        CHECK(testutil::close(half[k].real(), slow[k].real(), 1e-9));
        CHECK(testutil::close(half[k].imag(), slow[k].imag(), 1e-9));
    }

    CHECK_RAISES(rfft(x, 64), Errc::bad_fft_size);   // frame longer than n_fft
    CHECK_RAISES(rfft(x, 100), Errc::bad_fft_size);  // not a power of two
}

TEST_CASE("hamming window shape") {
    const auto w = hamming_window(11);
    CHECK(w[0] == doctest::Approx(0.08).epsilon(1e-12));
    CHECK(w[10] == doctest::Approx(0.08).epsilon(1e-12));
    CHECK(w[5] == doctest::Approx(1.0).epsilon(1e-12));  // symmetric peak
    for (std::size_t i = 0; i < w.size(); ++i)
        CHECK(w[i] == doctest::Approx(w[w.size() - 1 - i]).epsilon(1e-12));
    CHECK(hamming_window(1) == std::vector<double>{1.0});
}

TEST_CASE("periodic hann overlap-adds to a constant at half hop") {
    const std::size_t n = 64;
    const auto w = hann_window_periodic(n);
    CHECK(w[0] == doctest::Approx(0.0));
    for (std::size_t i = 0; i < n / 2; ++i)
        CHECK(w[i] + w[i + n / 2] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("stft frame counts") {
    std::vector<double> x(256, 0.5);
    CHECK(stft_analyze(x, 256, 128).frames.size() == 1);
    x.resize(257);
    CHECK(stft_analyze(x, 256, 128).frames.size() == 2);  // tail gets a frame
    x.resize(1024);
    CHECK(stft_analyze(x, 256, 128).frames.size() == 7);
    CHECK_RAISES(stft_analyze(x, 200, 100), Errc::bad_fft_size);
    CHECK_RAISES(stft_analyze(x, 256, 0), Errc::invalid_config);
}

TEST_CASE("stft analysis-synthesis is near-exact") {
    Rng rng(8);
    std::vector<double> x(1000);
    for (double& v : x) v = rng.uniform(-1.0, 1.0);

    const Stft spec = stft_analyze(x, 256, 128);
    const auto back = stft_synthesize(spec, x);
    REQUIRE(back.size() == x.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) worst = std::max(worst, std::abs(back[i] - x[i]));
    CHECK(worst < 1e-9);
}

#pragma once

#include <complex>
#include <vector>

#include "digitrec/common.hpp"

namespace digitrec {

// In-place iterative radix-2 FFT. Size must be a power of two.
void fft(std::vector<std::complex<double>>& x, bool inverse = false);

// Forward DFT of a real signal, zero-padded to n_fft; returns bins 0..n_fft/2.
std::vector<std::complex<double>> rfft(const std::vector<double>& x, std::size_t n_fft);

// Symmetric Hamming window: 0.54 - 0.46 cos(2 pi n / (N-1)).
std::vector<double> hamming_window(std::size_t n);

// Periodic Hann window: 0.5 (1 - cos(2 pi n / N)). Sums to a constant at
// 50% overlap, which makes unmodified overlap-add reconstruction exact.
std::vector<double> hann_window_periodic(std::size_t n);

inline bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

// Short-time Fourier transform with an analysis window of length n_fft and
// the given hop. Frames are placed at i*hop; the tail is zero-padded so the
// final frame covers the end of the signal.
struct Stft {
    std::size_t n_fft = 0;
    std::size_t hop = 0;
    std::size_t signal_len = 0;
    // One spectrum (n_fft/2+1 bins) per frame.
    std::vector<std::vector<std::complex<double>>> frames;
};

Stft stft_analyze(const std::vector<double>& signal, std::size_t n_fft, std::size_t hop);

// Inverse of stft_analyze: inverse FFT per frame, overlap-add, then divide
// by the accumulated window envelope. Where the envelope is ~0 (the very
// first and last samples of a Hann analysis) the fallback signal is used.
std::vector<double> stft_synthesize(const Stft& stft, const std::vector<double>& fallback);

}  // namespace digitrec

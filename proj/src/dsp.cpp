#include "digitrec/dsp.hpp"

#include <cmath>

namespace digitrec {

void fft(std::vector<std::complex<double>>& x, bool inverse) {
    const std::size_t n = x.size();
    if (!is_power_of_two(n)) raise(Errc::bad_fft_size, "FFT size must be a power of two");

    // Bit-reversal permutation.
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(x[i], x[j]);
    }

    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = (inverse ? 2.0 : -2.0) * M_PI / static_cast<double>(len);
        const std::complex<double> wlen(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                const auto u = x[i + k];
                const auto v = x[i + k + len / 2] * w;
                x[i + k] = u + v;
                x[i + k + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
    if (inverse) {
        const double inv = 1.0 / static_cast<double>(n);
        for (auto& v : x) v *= inv;
    }
}

std::vector<std::complex<double>> rfft(const std::vector<double>& x, std::size_t n_fft) {
    if (!is_power_of_two(n_fft)) raise(Errc::bad_fft_size, "FFT size must be a power of two");
    if (x.size() > n_fft) raise(Errc::bad_fft_size, "frame longer than FFT size");
    std::vector<std::complex<double>> buf(n_fft, {0.0, 0.0});
    for (std::size_t i = 0; i < x.size(); ++i) buf[i] = {x[i], 0.0};
    fft(buf);
    buf.resize(n_fft / 2 + 1);
    return buf;
}

std::vector<double> hamming_window(std::size_t n) {
    std::vector<double> w(n, 1.0);
    if (n < 2) return w;
    for (std::size_t i = 0; i < n; ++i)
        w[i] = 0.54 - 0.46 * std::cos(2.0 * M_PI * static_cast<double>(i) / static_cast<double>(n - 1));
    return w;
}

std::vector<double> hann_window_periodic(std::size_t n) {
    std::vector<double> w(n, 1.0);
    if (n < 2) return w;
    for (std::size_t i = 0; i < n; ++i)
        w[i] = 0.5 * (1.0 - std::cos(2.0 * M_PI * static_cast<double>(i) / static_cast<double>(n)));
    return w;
}

Stft stft_analyze(const std::vector<double>& signal, std::size_t n_fft, std::size_t hop) {
    if (!is_power_of_two(n_fft)) raise(Errc::bad_fft_size, "FFT size must be a power of two");
    if (hop == 0 || hop > n_fft) raise(Errc::invalid_config, "hop must be in [1, n_fft]");

    Stft out;
    out.n_fft = n_fft;
    out.hop = hop;
    out.signal_len = signal.size();

    // Enough frames so every sample is covered by at least one frame.
    std::size_t n_frames = 1;
    if (signal.size() > n_fft) n_frames = 1 + (signal.size() - n_fft + hop - 1) / hop;

    const auto window = hann_window_periodic(n_fft);
    std::vector<std::complex<double>> buf(n_fft);
    out.frames.reserve(n_frames);
    for (std::size_t f = 0; f < n_frames; ++f) {
        const std::size_t start = f * hop;
        for (std::size_t i = 0; i < n_fft; ++i) {
            const std::size_t idx = start + i;
            const double s = idx < signal.size() ? signal[idx] : 0.0;
            buf[i] = {s * window[i], 0.0};
        }
        fft(buf);
        out.frames.emplace_back(buf.begin(), buf.begin() + static_cast<long>(n_fft / 2 + 1));
    }
    return out;
}

std::vector<double> stft_synthesize(const Stft& stft, const std::vector<double>& fallback) {
    const std::size_t n_fft = stft.n_fft;
    const auto window = hann_window_periodic(n_fft);

    std::vector<double> acc(stft.signal_len, 0.0);
    std::vector<double> envelope(stft.signal_len, 0.0);
    std::vector<std::complex<double>> buf(n_fft);

    for (std::size_t f = 0; f < stft.frames.size(); ++f) {
        const auto& spec = stft.frames[f];
        // Rebuild the full conjugate-symmetric spectrum.
        for (std::size_t k = 0; k <= n_fft / 2; ++k) buf[k] = spec[k];
        for (std::size_t k = n_fft / 2 + 1; k < n_fft; ++k) buf[k] = std::conj(spec[n_fft - k]);
        fft(buf, true);

        const std::size_t start = f * stft.hop;
        for (std::size_t i = 0; i < n_fft; ++i) {
            const std::size_t idx = start + i;
            if (idx >= stft.signal_len) break;
            acc[idx] += buf[i].real();
            envelope[idx] += window[i];
        }
    }

    std::vector<double> out(stft.signal_len);
    for (std::size_t i = 0; i < stft.signal_len; ++i) {
        // The analysis window is applied once, so overlap-add returns
        // envelope-weighted samples; dividing restores the original scale.
        out[i] = envelope[i] > 1e-8 ? acc[i] / envelope[i]
                                    : (i < fallback.size() ? fallback[i] : 0.0);
    }
    return out;
}

}  // namespace digitrec

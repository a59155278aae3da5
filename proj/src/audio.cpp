#include "digitrec/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

namespace digitrec {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatIeeeFloat = 3;

template <typename T>
T read_le(std::istream& in) {
    unsigned char buf[sizeof(T)];
    in.read(reinterpret_cast<char*>(buf), sizeof(T));
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(buf[i]) << (8 * i);
    return v;
}

template <typename T>
void write_le(std::ostream& out, T v) {
    unsigned char buf[sizeof(T)];
    for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
    out.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

double clamp_sample(double s) { return std::clamp(s, -1.0, 1.0); }

}  // namespace

AudioClip read_wav(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(Errc::file_not_found, "cannot open " + path.string());

    char tag[4];
    in.read(tag, 4);
    if (!in || std::memcmp(tag, "RIFF", 4) != 0)
        raise(Errc::malformed_header, path.string() + ": missing RIFF tag");
    read_le<std::uint32_t>(in);  // overall size, unused
    in.read(tag, 4);
    if (!in || std::memcmp(tag, "WAVE", 4) != 0)
        raise(Errc::malformed_header, path.string() + ": missing WAVE tag");

    bool have_fmt = false;
    std::uint16_t format = 0, channels = 0, bits = 0;
    std::uint32_t rate = 0;
    std::vector<unsigned char> data;
    bool have_data = false;

    // Walk chunks; anything other than 'fmt ' and 'data' is skipped.
    // Chunk payloads are word-aligned: odd sizes carry one pad byte.
    while (true) {
        in.read(tag, 4);
        if (!in) break;
        const std::uint32_t size = read_le<std::uint32_t>(in);
        if (!in) raise(Errc::malformed_header, path.string() + ": truncated chunk header");

        if (std::memcmp(tag, "fmt ", 4) == 0) {
            if (size < 16) raise(Errc::malformed_header, path.string() + ": fmt chunk too small");
            format = read_le<std::uint16_t>(in);
            channels = read_le<std::uint16_t>(in);
            rate = read_le<std::uint32_t>(in);
            read_le<std::uint32_t>(in);  // byte rate
            read_le<std::uint16_t>(in);  // block align
            bits = read_le<std::uint16_t>(in);
            in.ignore(size - 16 + (size & 1));
            have_fmt = true;
        } else if (std::memcmp(tag, "data", 4) == 0) {
            data.resize(size);
            in.read(reinterpret_cast<char*>(data.data()), size);
            if (static_cast<std::uint32_t>(in.gcount()) != size)
                raise(Errc::malformed_header, path.string() + ": truncated data chunk");
            if (size & 1) in.ignore(1);
            have_data = true;
        } else {
            in.ignore(static_cast<std::streamsize>(size) + (size & 1));
        }
        if (!in && !(have_fmt && have_data)) break;
    }

    if (!have_fmt || !have_data)
        raise(Errc::malformed_header, path.string() + ": missing fmt or data chunk");
    if (rate == 0 || channels == 0)
        raise(Errc::malformed_header, path.string() + ": zero rate or channel count");
    if (!((format == kFormatPcm && bits == 16) || (format == kFormatIeeeFloat && bits == 32)))
        raise(Errc::unsupported_format,
              path.string() + ": only PCM 16-bit and IEEE float 32-bit are supported (format " +
                  std::to_string(format) + ", " + std::to_string(bits) + " bits)");

    const std::size_t bytes_per_sample = bits / 8;
    const std::size_t frame_bytes = bytes_per_sample * channels;
    const std::size_t frames = data.size() / frame_bytes;

    AudioClip clip;
    clip.sample_rate = static_cast<int>(rate);
    clip.samples.resize(frames);

    for (std::size_t f = 0; f < frames; ++f) {
        double acc = 0.0;
        for (std::size_t ch = 0; ch < channels; ++ch) {
            const unsigned char* p = data.data() + f * frame_bytes + ch * bytes_per_sample;
            if (format == kFormatPcm) {
                const auto raw = static_cast<std::int16_t>(p[0] | (p[1] << 8));
                acc += raw / 32768.0;
            } else {
                std::uint32_t u = p[0] | (p[1] << 8) | (p[2] << 16) |
                                  (static_cast<std::uint32_t>(p[3]) << 24);
                float v;
                std::memcpy(&v, &u, 4);
                acc += v;
            }
        }
        clip.samples[f] = clamp_sample(acc / channels);
    }
    return clip;
}

void write_wav(const AudioClip& clip, const std::filesystem::path& path) {
    if (clip.empty()) raise(Errc::empty_clip, "refusing to write an empty clip");

    std::ofstream out(path, std::ios::binary);
    if (!out) raise(Errc::io_error, "cannot open " + path.string() + " for writing");

    const std::uint32_t data_bytes = static_cast<std::uint32_t>(clip.size() * 2);
    out.write("RIFF", 4);
    write_le<std::uint32_t>(out, 36 + data_bytes);
    out.write("WAVE", 4);
    out.write("fmt ", 4);
    write_le<std::uint32_t>(out, 16);
    write_le<std::uint16_t>(out, kFormatPcm);
    write_le<std::uint16_t>(out, 1);  // mono
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(clip.sample_rate));
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(clip.sample_rate) * 2);
    write_le<std::uint16_t>(out, 2);   // block align
    write_le<std::uint16_t>(out, 16);  // bits
    out.write("data", 4);
    write_le<std::uint32_t>(out, data_bytes);

    for (double s : clip.samples) {
        const long q = std::lrint(clamp_sample(s) * 32768.0);
        const auto v = static_cast<std::int16_t>(std::clamp<long>(q, -32768, 32767));
        write_le<std::uint16_t>(out, static_cast<std::uint16_t>(v));
    }
    if (!out) raise(Errc::io_error, "short write to " + path.string());
}

AudioClip resample(const AudioClip& clip, int target_rate) {
    if (clip.empty()) raise(Errc::empty_clip, "cannot resample an empty clip");
    if (target_rate <= 0) raise(Errc::invalid_config, "target rate must be positive");
    if (target_rate == clip.sample_rate) return clip;

    const double ratio = static_cast<double>(clip.sample_rate) / target_rate;
    const auto out_len = static_cast<std::size_t>(
        std::llround(static_cast<double>(clip.size()) * target_rate / clip.sample_rate));

    AudioClip out;
    out.sample_rate = target_rate;
    out.samples.resize(out_len);
    const std::size_t last = clip.size() - 1;
    for (std::size_t i = 0; i < out_len; ++i) {
        const double pos = std::min(i * ratio, static_cast<double>(last));
        const auto i0 = static_cast<std::size_t>(pos);
        const double frac = pos - i0;
        const double a = clip.samples[i0];
        const double b = clip.samples[std::min(i0 + 1, last)];
        out.samples[i] = a + frac * (b - a);
    }
    return out;
}

}  // namespace digitrec

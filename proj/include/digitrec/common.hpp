#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace digitrec {

// Error categories used across the toolkit. The CLI maps them onto exit
// codes: usage errors are handled by the parser, everything below is a
// data/runtime error (exit 2) except diverged_training (exit 3).
enum class Errc {
    file_not_found,
    unsupported_format,
    malformed_header,
    io_error,
    empty_clip,
    too_short,
    profile_length_mismatch,
    shift_out_of_range,
    factor_out_of_range,
    silent_noise,
    rate_mismatch,
    bad_fft_size,
    degenerate_band,
    shape_mismatch,
    degenerate_batch,
    label_out_of_range,
    invalid_config,
    diverged_training,
    insufficient_class_samples,
    empty_matrix,
    unknown_label_directory,
    empty_dataset,
    version_mismatch,
    checksum_mismatch,
};

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

[[noreturn]] inline void raise(Errc code, const std::string& what) { throw Error(code, what); }

// CRC-32 (IEEE 802.3, reflected). Used by the checkpoint format and for
// artifact hashes in run.json.
std::uint32_t crc32(const void* data, std::size_t len, std::uint32_t seed = 0);

// Quantize through IEEE binary32. Persistent model state is kept on the
// float32 grid so checkpoints round-trip bit-exactly.
inline double to_f32(double x) { return static_cast<double>(static_cast<float>(x)); }

}  // namespace digitrec

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "digitrec/common.hpp"

namespace digitrec {

enum class ClipOrigin { original, augmented };

struct ManifestEntry {
    std::string path;  // relative to manifest root
    int label = 0;     // 0..9
    ClipOrigin origin = ClipOrigin::original;
    std::string speaker_id;  // optional metadata, inert
    std::string dialect;     // optional metadata, inert
};

// Display names for the ten classes; labels stay numeric internally.
std::array<std::string, 10> default_label_names();

struct DatasetManifest {
    std::filesystem::path root;
    std::array<std::string, 10> label_names = default_label_names();
    std::vector<ManifestEntry> entries;

    std::filesystem::path resolve(const ManifestEntry& e) const { return root / e.path; }
};

struct ValidationProblem {
    std::size_t entry_index;
    std::string path;
    std::string message;
};

// Walks root/<label>/ directories (0..9) and lists every .wav file.
// Files matching `<stem>.aug<k>.wav` are flagged as augmented copies.
DatasetManifest scan_directory(const std::filesystem::path& root);

// Non-aborting integrity check: missing files, undecodable WAVs,
// out-of-range labels, duplicate paths.
std::vector<ValidationProblem> validate_manifest(const DatasetManifest& manifest);

// JSON persistence; load(save(m)) == m.
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& file);
DatasetManifest load_manifest(const std::filesystem::path& file);

// Writes n_per_class 1-second clips per digit under out_dir/<label>/.
// Class c is a chord of 200+60c Hz and its 1.5x partial with seeded
// amplitude/phase jitter plus noise at 20 dB SNR.
DatasetManifest generate_synthetic_corpus(const std::filesystem::path& out_dir,
                                          std::size_t n_per_class, std::uint64_t seed);

}  // namespace digitrec

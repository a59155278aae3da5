#include "digitrec/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <regex>
#include <unordered_map>

#include "digitrec/audio.hpp"
#include "digitrec/rng.hpp"
#include "json.hpp"

namespace digitrec {

using nlohmann::json;

std::array<std::string, 10> default_label_names() {
    return {"০", "১", "২", "৩", "৪",
            "৫", "৬", "৭", "৮", "৯"};
}

namespace {

bool is_augmented_name(const std::filesystem::path& p) {
    static const std::regex aug(R"(^.*\.aug\d+$)");
    return std::regex_match(p.stem().string(), aug);
}

}  // namespace

DatasetManifest scan_directory(const std::filesystem::path& root) {
    if (!std::filesystem::is_directory(root))
        raise(Errc::file_not_found, "dataset root is not a directory: " + root.string());

    DatasetManifest manifest;
    manifest.root = root;

    for (const auto& entry : std::filesystem::directory_iterator(root)) {
        if (!entry.is_directory()) continue;
        const std::string name = entry.path().filename().string();
        if (name.size() != 1 || name[0] < '0' || name[0] > '9')
            raise(Errc::unknown_label_directory,
                  "unexpected directory in dataset root: " + name);
        const int label = name[0] - '0';

        std::vector<std::filesystem::path> files;
        for (const auto& file : std::filesystem::directory_iterator(entry.path()))
            if (file.is_regular_file() && file.path().extension() == ".wav")
                files.push_back(file.path());
        std::sort(files.begin(), files.end());

        for (const auto& file : files) {
            ManifestEntry e;
            e.path = (std::filesystem::path(name) / file.filename()).generic_string();
            e.label = label;
            e.origin = is_augmented_name(file) ? ClipOrigin::augmented : ClipOrigin::original;
            manifest.entries.push_back(std::move(e));
        }
    }

    std::sort(manifest.entries.begin(), manifest.entries.end(),
              [](const ManifestEntry& a, const ManifestEntry& b) { return a.path < b.path; });
    if (manifest.entries.empty())
        raise(Errc::empty_dataset, "no WAV files under " + root.string());
    return manifest;
}

std::vector<ValidationProblem> validate_manifest(const DatasetManifest& manifest) {
    std::vector<ValidationProblem> problems;
    std::unordered_map<std::string, std::size_t> seen;

    for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
        const ManifestEntry& e = manifest.entries[i];
        if (e.label < 0 || e.label > 9)
            problems.push_back({i, e.path, "label outside 0..9"});

        const auto [it, inserted] = seen.emplace(e.path, i);
        if (!inserted)
            problems.push_back({i, e.path,
                                "duplicate of entry " + std::to_string(it->second)});

        const auto full = manifest.resolve(e);
        if (!std::filesystem::is_regular_file(full)) {
            problems.push_back({i, e.path, "file missing"});
            continue;
        }
        try {
            read_wav(full);
        } catch (const Error& err) {
            problems.push_back({i, e.path, std::string("undecodable: ") + err.what()});
        }
    }
    return problems;
}

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& file) {
    json entries = json::array();
    for (const auto& e : manifest.entries) {
        json j{{"path", e.path},
               {"label", e.label},
               {"origin", e.origin == ClipOrigin::augmented ? "augmented" : "original"}};
        if (!e.speaker_id.empty()) j["speaker_id"] = e.speaker_id;
        if (!e.dialect.empty()) j["dialect"] = e.dialect;
        entries.push_back(std::move(j));
    }
    const json doc{{"version", 1},
                   {"root", manifest.root.generic_string()},
                   {"label_names", manifest.label_names},
                   {"entries", entries}};
    std::ofstream out(file);
    if (!out) raise(Errc::io_error, "cannot open manifest for writing: " + file.string());
    out << doc.dump(2) << '\n';
    if (!out) raise(Errc::io_error, "short write on manifest: " + file.string());
}

DatasetManifest load_manifest(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) raise(Errc::file_not_found, "cannot open manifest: " + file.string());
    json doc;
    try {
        in >> doc;
    } catch (const json::exception&) {
        raise(Errc::malformed_header, "manifest is not valid JSON: " + file.string());
    }

    DatasetManifest manifest;
    try {
        if (doc.at("version").get<int>() != 1)
            raise(Errc::version_mismatch, "unsupported manifest version");
        manifest.root = doc.at("root").get<std::string>();
        const auto names = doc.at("label_names").get<std::vector<std::string>>();
        if (names.size() != manifest.label_names.size())
            raise(Errc::malformed_header, "manifest must name exactly 10 labels");
        std::copy(names.begin(), names.end(), manifest.label_names.begin());
        for (const auto& j : doc.at("entries")) {
            ManifestEntry e;
            e.path = j.at("path").get<std::string>();
            e.label = j.at("label").get<int>();
            e.origin = j.at("origin").get<std::string>() == "augmented"
                           ? ClipOrigin::augmented
                           : ClipOrigin::original;
            if (j.contains("speaker_id")) e.speaker_id = j["speaker_id"].get<std::string>();
            if (j.contains("dialect")) e.dialect = j["dialect"].get<std::string>();
            manifest.entries.push_back(std::move(e));
        }
    } catch (const json::exception&) {
        raise(Errc::malformed_header, "manifest is missing required fields: " + file.string());
    }
    return manifest;
}

DatasetManifest generate_synthetic_corpus(const std::filesystem::path& out_dir,
                                          std::size_t n_per_class, std::uint64_t seed) {
    if (n_per_class < 1) raise(Errc::invalid_config, "n_per_class must be at least 1");

    constexpr int kRate = 44100;
    constexpr double kSnrDb = 20.0;

    DatasetManifest manifest;
    manifest.root = out_dir;

    for (int label = 0; label < 10; ++label) {
        const auto dir = out_dir / std::to_string(label);
        std::filesystem::create_directories(dir);
        const double fundamental = 200.0 + 60.0 * label;

        for (std::size_t i = 0; i < n_per_class; ++i) {
            Rng rng(Rng::derive(seed, static_cast<std::uint64_t>(label) * 1000003 + i));

            // Chord of the fundamental and its 1.5x partial with jittered
            // amplitudes and random phases.
            const double a1 = 0.35 * (1.0 + rng.uniform(-0.2, 0.2));
            const double a2 = 0.25 * (1.0 + rng.uniform(-0.2, 0.2));
            const double p1 = rng.uniform(0.0, 2.0 * M_PI);
            const double p2 = rng.uniform(0.0, 2.0 * M_PI);

            AudioClip clip;
            clip.sample_rate = kRate;
            clip.samples.resize(kRate);
            double signal_power = 0.0;
            for (std::size_t t = 0; t < clip.samples.size(); ++t) {
                const double time = static_cast<double>(t) / kRate;
                const double s = a1 * std::sin(2.0 * M_PI * fundamental * time + p1) +
                                 a2 * std::sin(2.0 * M_PI * fundamental * 1.5 * time + p2);
                clip.samples[t] = s;
                signal_power += s * s;
            }
            signal_power /= static_cast<double>(clip.samples.size());

            // Additive white noise at the target SNR.
            const double noise_std =
                std::sqrt(signal_power / std::pow(10.0, kSnrDb / 10.0));
            for (double& s : clip.samples)
                s = std::clamp(s + noise_std * rng.normal(), -1.0, 1.0);

            const std::string name = "clip" + std::to_string(i) + ".wav";
            write_wav(clip, dir / name);

            ManifestEntry e;
            e.path = (std::filesystem::path(std::to_string(label)) / name).generic_string();
            e.label = label;
            manifest.entries.push_back(std::move(e));
        }
    }
    return manifest;
}

}  // namespace digitrec

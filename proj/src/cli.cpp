#include "digitrec/cli.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "digitrec/audio.hpp"
#include "digitrec/augment.hpp"
#include "digitrec/common.hpp"
#include "digitrec/dataset.hpp"
#include "digitrec/evaluation.hpp"
#include "digitrec/mfcc.hpp"
#include "digitrec/model.hpp"
#include "digitrec/serialize.hpp"

namespace digitrec {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Options shared by every subcommand.
struct Common {
    std::uint64_t seed = 0;
    fs::path config_file;
    fs::path out = "out";
    CLI::Option* seed_opt = nullptr;
};

void add_common(CLI::App* cmd, Common& c) {
    c.seed_opt = cmd->add_option("--seed", c.seed, "Random seed")->capture_default_str();
    cmd->add_option("--config", c.config_file, "Flat JSON config file")
        ->check(CLI::ExistingFile);
    cmd->add_option("--out", c.out, "Directory for artifacts and run.json")
        ->capture_default_str();
}

json load_config(const Common& c) {
    if (c.config_file.empty()) return json::object();
    std::ifstream in(c.config_file);
    if (!in) raise(Errc::file_not_found, "cannot open config: " + c.config_file.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        raise(Errc::invalid_config, "config is not valid JSON: " + std::string(e.what()));
    }
    if (!j.is_object()) raise(Errc::invalid_config, "config must be a flat JSON object");
    const auto unknown = unrecognized_keys(j);
    if (!unknown.empty()) {
        std::string msg = "unrecognized config keys:";
        for (const auto& k : unknown) msg += " " + k;
        raise(Errc::invalid_config, msg);
    }
    return j;
}

// Config keys set the seed unless the --seed flag was given explicitly.
std::uint64_t effective_seed(const Common& c, const json& cfg) {
    if (c.seed_opt && c.seed_opt->count() > 0) return c.seed;
    return cfg.value("seed", c.seed);
}

std::string crc_hex(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) raise(Errc::io_error, "cannot hash artifact: " + file.string());
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    char buf[16];
    std::snprintf(buf, sizeof buf, "%08x", crc32(bytes.data(), bytes.size()));
    return buf;
}

// Accumulates the provenance record each subcommand must leave behind.
class RunRecorder {
public:
    RunRecorder(std::string command, const Common& c, std::uint64_t seed,
                std::vector<std::string> argv)
        : command_(std::move(command)), out_(c.out), seed_(seed), argv_(std::move(argv)) {
        fs::create_directories(out_);
    }

    const fs::path& out() const { return out_; }
    void set_config(json config) { config_ = std::move(config); }
    void artifact(const fs::path& written) { artifacts_.push_back(written); }

    void finish() const {
        json arts = json::object();
        for (const auto& p : artifacts_) {
            const fs::path rel = p.lexically_relative(out_);
            const bool inside = !rel.empty() && rel.begin()->string() != "..";
            arts[inside ? rel.generic_string() : p.generic_string()] = crc_hex(p);
        }
        const json record{{"command", command_},
                          {"argv", argv_},
                          {"seed", seed_},
                          {"config", config_},
                          {"artifacts", arts}};
        const fs::path file = out_ / "run.json";
        std::ofstream out(file);
        out << record.dump(2) << "\n";
        if (!out) raise(Errc::io_error, "cannot write " + file.string());
    }

private:
    std::string command_;
    fs::path out_;
    std::uint64_t seed_;
    std::vector<std::string> argv_;
    json config_ = json::object();
    std::vector<fs::path> artifacts_;
};

void print_label_counts(const DatasetManifest& m) {
    std::array<std::size_t, 10> orig{}, aug{};
    for (const auto& e : m.entries) {
        auto& bucket = e.origin == ClipOrigin::original ? orig : aug;
        if (e.label >= 0 && e.label < 10) ++bucket[e.label];
    }
    std::cout << "per label (original+augmented):";
    for (int l = 0; l < 10; ++l) std::cout << " " << l << ":" << orig[l] << "+" << aug[l];
    std::cout << "\n";
}

FeatureDataset load_records(const DatasetManifest& part) {
    FeatureDataset ds;
    ds.maps.reserve(part.entries.size());
    ds.labels.reserve(part.entries.size());
    for (const auto& e : part.entries) {
        ds.maps.push_back(read_feature_record(part.root / e.path));
        ds.labels.push_back(e.label);
    }
    return ds;
}

DatasetManifest originals_only(const DatasetManifest& m) {
    DatasetManifest r;
    r.root = m.root;
    r.label_names = m.label_names;
    for (const auto& e : m.entries)
        if (e.origin == ClipOrigin::original) r.entries.push_back(e);
    return r;
}

json load_json_file(const fs::path& file, const char* what) {
    std::ifstream in(file);
    if (!in) raise(Errc::file_not_found, std::string("cannot open ") + what + ": " +
                                             file.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        raise(Errc::malformed_header,
              std::string(what) + " is not valid JSON: " + std::string(e.what()));
    }
    return j;
}

void write_json_file(const json& j, const fs::path& file) {
    std::ofstream out(file);
    out << j.dump(2) << "\n";
    if (!out) raise(Errc::io_error, "cannot write " + file.string());
}

// ------------------------------------------------------------- handlers ----

int cmd_scan(const Common& c, const json& cfg, const fs::path& root,
             const std::vector<std::string>& argv) {
    RunRecorder run("scan", c, effective_seed(c, cfg), argv);
    const DatasetManifest m = scan_directory(root);
    const fs::path mpath = run.out() / "manifest.json";
    save_manifest(m, mpath);
    run.artifact(mpath);
    run.set_config(json{{"root", root.generic_string()}});
    run.finish();
    std::cout << "indexed " << m.entries.size() << " clips from " << root.generic_string()
              << " into " << mpath.generic_string() << "\n";
    print_label_counts(m);
    return 0;
}

int cmd_validate(const Common& c, const json& cfg, const fs::path& manifest_file,
                 const std::vector<std::string>& argv) {
    RunRecorder run("validate", c, effective_seed(c, cfg), argv);
    const DatasetManifest m = load_manifest(manifest_file);
    const auto problems = validate_manifest(m);

    json report = json::array();
    for (const auto& p : problems)
        report.push_back(
            json{{"entry_index", p.entry_index}, {"path", p.path}, {"message", p.message}});
    const fs::path rpath = run.out() / "validation.json";
    write_json_file(json{{"manifest", manifest_file.generic_string()},
                         {"entries", m.entries.size()},
                         {"problems", report}},
                    rpath);
    run.artifact(rpath);
    run.set_config(json{{"manifest", manifest_file.generic_string()}});
    run.finish();

    for (const auto& p : problems)
        std::cout << "problem at entry " << p.entry_index << " (" << p.path
                  << "): " << p.message << "\n";
    std::cout << m.entries.size() << " entries, " << problems.size() << " problems\n";
    return 0;
}

int cmd_synth(const Common& c, const json& cfg, fs::path corpus_root, std::size_t n_per_class,
              const std::vector<std::string>& argv) {
    const std::uint64_t seed = effective_seed(c, cfg);
    RunRecorder run("synth", c, seed, argv);
    if (corpus_root.empty()) corpus_root = run.out() / "corpus";

    const DatasetManifest m = generate_synthetic_corpus(corpus_root, n_per_class, seed);
    const fs::path mpath = run.out() / "manifest.json";
    save_manifest(m, mpath);
    run.artifact(mpath);
    for (const auto& e : m.entries) run.artifact(m.resolve(e));
    run.set_config(json{{"corpus_root", corpus_root.generic_string()},
                        {"n_per_class", n_per_class}});
    run.finish();

    std::cout << "wrote " << m.entries.size() << " clips under " << corpus_root.generic_string()
              << "\n";
    print_label_counts(m);
    return 0;
}

int cmd_augment(const Common& c, const json& cfg, const fs::path& manifest_file,
                const fs::path& noise_dir, std::size_t multiplier, bool multiplier_given,
                const std::vector<std::string>& argv) {
    const std::uint64_t seed = effective_seed(c, cfg);
    AugmentConfig ac;
    apply_config(cfg, ac);
    ac.seed = seed;
    if (multiplier_given) ac.multiplier = multiplier;

    RunRecorder run("augment", c, seed, argv);
    const DatasetManifest m = load_manifest(manifest_file);

    std::vector<AudioClip> bank;
    if (!noise_dir.empty()) {
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(noise_dir))
            if (entry.is_regular_file() && entry.path().extension() == ".wav")
                files.push_back(entry.path());
        std::sort(files.begin(), files.end());
        for (const auto& f : files) bank.push_back(read_wav(f));
    }

    const DatasetManifest augmented = augment_dataset(m, ac, bank);
    const fs::path mpath = run.out() / "manifest.json";
    save_manifest(augmented, mpath);
    run.artifact(mpath);
    for (std::size_t i = m.entries.size(); i < augmented.entries.size(); ++i)
        run.artifact(augmented.resolve(augmented.entries[i]));

    json config = to_json(ac);
    config["manifest"] = manifest_file.generic_string();
    config["noise_dir"] = noise_dir.generic_string();
    run.set_config(config);
    run.finish();

    std::cout << "wrote " << augmented.entries.size() - m.entries.size()
              << " augmented copies; manifest now holds " << augmented.entries.size()
              << " entries\n";
    print_label_counts(augmented);
    return 0;
}

int cmd_featurize(const Common& c, const json& cfg, const fs::path& manifest_file,
                  bool denoise_flag, bool denoise_given,
                  const std::vector<std::string>& argv) {
    const std::uint64_t seed = effective_seed(c, cfg);
    FeaturePipeline pipeline;
    apply_config(cfg, pipeline);
    if (denoise_given) pipeline.denoise = denoise_flag;
    pipeline.mfcc.validate();

    RunRecorder run("featurize", c, seed, argv);
    const DatasetManifest m = load_manifest(manifest_file);
    const fs::path fdir = run.out() / "features";

    DatasetManifest index;
    index.root = fdir;
    index.label_names = m.label_names;
    for (const auto& e : m.entries) {
        const AudioClip clip = read_wav(m.resolve(e));
        const FeatureMap fm = featurize_clip(clip, pipeline);
        fs::path rel(e.path);
        rel.replace_extension(".fm");
        const fs::path target = fdir / rel;
        fs::create_directories(target.parent_path());
        write_feature_record(fm, target);
        run.artifact(target);
        index.entries.push_back({rel.generic_string(), e.label, e.origin, e.speaker_id,
                                 e.dialect});
    }

    const fs::path ipath = fdir / "index.json";
    save_manifest(index, ipath);
    run.artifact(ipath);
    const fs::path ppath = fdir / "pipeline.json";
    write_json_file(to_json(pipeline), ppath);
    run.artifact(ppath);

    json config = to_json(pipeline);
    config["manifest"] = manifest_file.generic_string();
    run.set_config(config);
    run.finish();

    std::cout << "extracted " << index.entries.size() << " feature maps ("
              << FeatureMap::kSize << "x" << FeatureMap::kSize << ") into "
              << fdir.generic_string() << "\n";
    return 0;
}

// Training flags that override config-file values only when given.
struct TrainFlags {
    std::size_t epochs = 0;
    std::size_t batch = 0;
    double lr = 0.0;
    std::size_t patience = 0;
    CLI::Option *epochs_opt = nullptr, *batch_opt = nullptr, *lr_opt = nullptr,
                *patience_opt = nullptr;

    void add(CLI::App* cmd) {
        epochs_opt = cmd->add_option("--epochs", epochs, "Training epochs");
        batch_opt = cmd->add_option("--batch-size", batch, "Minibatch size");
        lr_opt = cmd->add_option("--lr", lr, "Adam learning rate");
        patience_opt =
            cmd->add_option("--patience", patience, "Early-stop patience (epochs)");
    }

    void apply(TrainConfig& tc) const {
        if (epochs_opt->count()) tc.epochs = epochs;
        if (batch_opt->count()) tc.batch_size = batch;
        if (lr_opt->count()) tc.lr = lr;
        if (patience_opt->count()) tc.early_stop_patience = patience;
    }
};

struct RatioFlags {
    double train = 0.64, val = 0.16, test = 0.20;

    void add(CLI::App* cmd) {
        cmd->add_option("--train-ratio", train, "Training share")->capture_default_str();
        cmd->add_option("--val-ratio", val, "Validation share")->capture_default_str();
        cmd->add_option("--test-ratio", test, "Test share")->capture_default_str();
    }

    std::array<double, 3> resolve(const json& cfg) const {
        return {cfg.value("train_ratio", train), cfg.value("val_ratio", val),
                cfg.value("test_ratio", test)};
    }
};

FeaturePipeline load_pipeline(const fs::path& fdir) {
    return feature_pipeline_from_json(load_json_file(fdir / "pipeline.json", "pipeline"));
}

int cmd_train(const Common& c, const json& cfg, const fs::path& fdir, const TrainFlags& tf,
              const RatioFlags& rf, const std::vector<std::string>& argv) {
    const std::uint64_t seed = effective_seed(c, cfg);

    ModelConfig mc;
    apply_config(cfg, mc);
    TrainConfig tc;
    apply_config(cfg, tc);
    tf.apply(tc);
    tc.seed = seed;
    const std::array<double, 3> ratios = rf.resolve(cfg);

    RunRecorder run("train", c, seed, argv);
    const DatasetManifest index = load_manifest(fdir / "index.json");
    const FeaturePipeline pipeline = load_pipeline(fdir);

    const ManifestSplit split = split_manifest_with_augments(index, ratios, seed);
    const FeatureDataset train_set = load_records(split.train);
    const FeatureDataset val_set = load_records(split.val);
    FeatureDataset test_set = load_records(split.test);

    std::cout << "training on " << train_set.size() << " maps, validating on "
              << val_set.size() << ", holding out " << test_set.size() << "\n";

    Model model = build_model(mc, seed);
    model.features = pipeline;
    const TrainReport report = train(model, train_set, val_set, tc);

    const fs::path ckpt = run.out() / "model.ckpt";
    save_checkpoint(model, ckpt);
    run.artifact(ckpt);
    const fs::path hist = run.out() / "history.csv";
    write_history_csv(report.history, hist);
    run.artifact(hist);

    auto paths_of = [](const DatasetManifest& part) {
        std::vector<std::string> v;
        for (const auto& e : part.entries) v.push_back(e.path);
        return v;
    };
    const fs::path spath = run.out() / "split.json";
    write_json_file(json{{"train", paths_of(split.train)},
                         {"val", paths_of(split.val)},
                         {"test", paths_of(split.test)}},
                    spath);
    run.artifact(spath);

    const EvalReport eval = evaluate(model, test_set);
    const fs::path mpath = run.out() / "metrics.json";
    write_metrics_json(eval, index.label_names, mpath);
    run.artifact(mpath);
    const fs::path cpath = run.out() / "confusion.csv";
    write_confusion_csv(eval.confusion, index.label_names, cpath);
    run.artifact(cpath);

    run.set_config(json{{"features", fdir.generic_string()},
                        {"model", to_json(mc)},
                        {"train", to_json(tc)},
                        {"pipeline", to_json(pipeline)},
                        {"ratios", ratios}});
    run.finish();

    const std::size_t ran = report.history.train_loss.size();
    std::cout << "trained " << ran << " epochs (best epoch " << report.best_epoch + 1 << " of "
              << ran << (report.early_stopped ? ", early-stopped" : "") << ")\n";
    if (!report.history.val_acc.empty())
        std::printf("val accuracy %.2f%%\n",
                    100.0 * report.history.val_acc[report.best_epoch]);
    std::printf("test accuracy %.2f%% over %zu held-out samples\n", eval.overall_accuracy,
                test_set.size());
    std::cout << "checkpoint: " << ckpt.generic_string() << "\n";
    return 0;
}

int cmd_evaluate(const Common& c, const json& cfg, const fs::path& fdir,
                 const fs::path& model_path, const std::string& split_mode,
                 const RatioFlags& rf, const std::vector<std::string>& argv) {
    const std::uint64_t seed = effective_seed(c, cfg);
    RunRecorder run("evaluate", c, seed, argv);

    Model model = load_checkpoint(model_path);
    const DatasetManifest index = load_manifest(fdir / "index.json");
    if (fs::exists(fdir / "pipeline.json") &&
        to_json(load_pipeline(fdir)) != to_json(model.features))
        std::cerr << "warning: feature pipeline in " << fdir.generic_string()
                  << " differs from the checkpoint's; scores may not be comparable\n";

    DatasetManifest chosen = index;
    const std::array<double, 3> ratios = rf.resolve(cfg);
    if (split_mode == "test")
        chosen = split_manifest_with_augments(index, ratios, seed).test;
    const FeatureDataset ds = load_records(chosen);

    const EvalReport eval = evaluate(model, ds);
    const fs::path mpath = run.out() / "metrics.json";
    write_metrics_json(eval, index.label_names, mpath);
    run.artifact(mpath);
    const fs::path cpath = run.out() / "confusion.csv";
    write_confusion_csv(eval.confusion, index.label_names, cpath);
    run.artifact(cpath);

    run.set_config(json{{"features", fdir.generic_string()},
                        {"model_path", model_path.generic_string()},
                        {"split", split_mode},
                        {"ratios", ratios}});
    run.finish();

    std::printf("accuracy %.2f%% over %zu samples (%s split)\n", eval.overall_accuracy,
                ds.size(), split_mode.c_str());
    return 0;
}

int cmd_crossval(const Common& c, const json& cfg, const fs::path& fdir, std::size_t k,
                 const TrainFlags& tf, const std::vector<std::string>& argv) {
    const std::uint64_t seed = effective_seed(c, cfg);

    ModelConfig mc;
    apply_config(cfg, mc);
    TrainConfig tc;
    apply_config(cfg, tc);
    tf.apply(tc);
    tc.seed = seed;

    RunRecorder run("crossval", c, seed, argv);
    const DatasetManifest index = load_manifest(fdir / "index.json");
    // Folds are built from original clips only, so no fold can hold an
    // augmented copy of another fold's sample.
    const FeatureDataset ds = load_records(originals_only(index));

    std::cout << "running " << k << "-fold cross-validation on " << ds.size()
              << " original clips\n";
    const CrossValReport report = cross_validate(ds, k, mc, tc, seed);

    const fs::path cvpath = run.out() / "crossval.json";
    write_crossval_json(report, cvpath);
    run.artifact(cvpath);

    run.set_config(json{{"features", fdir.generic_string()},
                        {"model", to_json(mc)},
                        {"train", to_json(tc)},
                        {"k", k}});
    run.finish();

    for (std::size_t f = 0; f < report.folds.size(); ++f)
        std::printf("fold %zu accuracy %.2f%%\n", f + 1, report.folds[f].overall_accuracy);
    std::printf("mean accuracy %.2f%% (std %.2f)\n", report.mean_accuracy,
                report.std_accuracy);
    return 0;
}

int cmd_predict(const Common& c, const json& cfg, const fs::path& wav,
                const fs::path& model_path, const std::vector<std::string>& argv) {
    RunRecorder run("predict", c, effective_seed(c, cfg), argv);

    Model model = load_checkpoint(model_path);
    const AudioClip clip = read_wav(wav);
    const FeatureMap fm = featurize_clip(clip, model.features);
    const Prediction pred = predict(model, fm);

    const json result{{"input", wav.generic_string()},
                      {"digit", pred.digit},
                      {"probabilities", pred.probabilities}};
    const fs::path ppath = run.out() / "prediction.json";
    write_json_file(result, ppath);
    run.artifact(ppath);
    run.set_config(json{{"model_path", model_path.generic_string()},
                        {"input", wav.generic_string()}});
    run.finish();

    std::cout << result.dump() << "\n";
    return 0;
}

int cmd_report(const Common& c, const json& cfg, const fs::path& rdir,
               const std::vector<std::string>& argv) {
    std::ostringstream text;
    const auto have = [&rdir](const char* name) { return fs::exists(rdir / name); };

    if (have("run.json")) {
        const json r = load_json_file(rdir / "run.json", "run record");
        text << "run: " << r.value("command", std::string("?")) << " (seed "
             << r.value("seed", 0ULL) << ", " << r.value("artifacts", json::object()).size()
             << " artifacts)\n";
    }
    if (have("manifest.json")) {
        const DatasetManifest m = load_manifest(rdir / "manifest.json");
        std::size_t aug = 0;
        for (const auto& e : m.entries) aug += e.origin == ClipOrigin::augmented ? 1 : 0;
        text << "manifest: " << m.entries.size() << " entries (" << m.entries.size() - aug
             << " original, " << aug << " augmented) under " << m.root.generic_string()
             << "\n";
    }
    if (have("validation.json")) {
        const json v = load_json_file(rdir / "validation.json", "validation report");
        text << "validation: " << v.value("problems", json::array()).size()
             << " problems across " << v.value("entries", 0) << " entries\n";
    }
    if (have("metrics.json")) {
        const json mj = load_json_file(rdir / "metrics.json", "metrics");
        text << "metrics: overall accuracy " << mj.value("overall_accuracy", 0.0) << "%\n";
        if (mj.contains("macro")) {
            const json& mac = mj["macro"];
            text << "  macro precision " << mac.value("precision", 0.0) << "%, recall "
                 << mac.value("recall", 0.0) << "%, f1 " << mac.value("f1", 0.0) << "%\n";
        }
        for (const auto& row : mj.value("per_class", json::array()))
            text << "  class " << row.value("class", 0) << " (" << row.value("name", std::string())
                 << "): precision "
                 << row.value("precision", 0.0) << "%, recall " << row.value("recall", 0.0)
                 << "%, f1 " << row.value("f1", 0.0) << "%\n";
    }
    if (have("crossval.json")) {
        const json cv = load_json_file(rdir / "crossval.json", "cross-validation report");
        text << "cross-validation: mean accuracy " << cv.value("mean_accuracy", 0.0)
             << "% (std " << cv.value("std_accuracy", 0.0) << ") over "
             << cv.value("folds", json::array()).size() << " folds\n";
    }
    if (have("history.csv")) {
        std::ifstream in(rdir / "history.csv");
        std::string line, last;
        std::size_t rows = 0;
        std::getline(in, line);  // header
        while (std::getline(in, line))
            if (!line.empty()) {
                last = line;
                ++rows;
            }
        text << "history: " << rows << " epochs; final row: " << last << "\n";
    }
    if (text.str().empty()) text << "no recognized artifacts in " << rdir.generic_string()
                                 << "\n";

    RunRecorder run("report", c, effective_seed(c, cfg), argv);
    const fs::path rpath = run.out() / "report.txt";
    if (fs::weakly_canonical(rpath.parent_path()) == fs::weakly_canonical(rdir) &&
        fs::exists(rdir / "run.json"))
        raise(Errc::invalid_config,
              "choose an --out different from --run so the original run.json is preserved");
    std::ofstream out(rpath);
    out << text.str();
    if (!out) raise(Errc::io_error, "cannot write " + rpath.string());
    run.artifact(rpath);
    run.set_config(json{{"run", rdir.generic_string()}});
    run.finish();

    std::cout << text.str();
    return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"Spoken-digit recognition pipeline", "digitrec"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "digitrec 1.0.0");

    const std::vector<std::string> args(argv, argv + argc);

    auto* scan = app.add_subcommand("scan", "Index a root/<label>/ corpus into a manifest");
    Common scan_c;
    add_common(scan, scan_c);
    fs::path scan_root;
    scan->add_option("--root", scan_root, "Corpus root directory")
        ->required()
        ->check(CLI::ExistingDirectory);

    auto* validate = app.add_subcommand("validate", "Integrity-check a manifest");
    Common validate_c;
    add_common(validate, validate_c);
    fs::path validate_manifest_file;
    validate->add_option("--manifest", validate_manifest_file, "Manifest JSON file")
        ->required()
        ->check(CLI::ExistingFile);

    auto* synth = app.add_subcommand("synth", "Generate the synthetic tone-chord corpus");
    Common synth_c;
    add_common(synth, synth_c);
    fs::path synth_root;
    std::size_t synth_n = 20;
    synth->add_option("--root", synth_root, "Corpus directory (default <out>/corpus)");
    synth->add_option("--n-per-class", synth_n, "Clips per digit")->capture_default_str();

    auto* augment = app.add_subcommand("augment", "Write augmented copies beside sources");
    Common augment_c;
    add_common(augment, augment_c);
    fs::path augment_manifest_file, augment_noise_dir;
    std::size_t augment_multiplier = 1;
    augment->add_option("--manifest", augment_manifest_file, "Manifest JSON file")
        ->required()
        ->check(CLI::ExistingFile);
    augment->add_option("--noise-dir", augment_noise_dir, "Directory of noise WAVs")
        ->check(CLI::ExistingDirectory);
    auto* multiplier_opt =
        augment->add_option("--multiplier", augment_multiplier, "Copies per source clip");

    auto* featurize = app.add_subcommand("featurize", "Extract feature maps for a manifest");
    Common featurize_c;
    add_common(featurize, featurize_c);
    fs::path featurize_manifest_file;
    bool featurize_denoise = false;
    featurize->add_option("--manifest", featurize_manifest_file, "Manifest JSON file")
        ->required()
        ->check(CLI::ExistingFile);
    auto* denoise_opt =
        featurize->add_flag("--denoise,!--no-denoise", featurize_denoise,
                            "Spectral noise gating before trimming");

    auto* train_cmd = app.add_subcommand("train", "Train a model on extracted features");
    Common train_c;
    add_common(train_cmd, train_c);
    fs::path train_features;
    train_cmd->add_option("--features", train_features, "Featurize output directory")
        ->required()
        ->check(CLI::ExistingDirectory);
    TrainFlags train_tf;
    train_tf.add(train_cmd);
    RatioFlags train_rf;
    train_rf.add(train_cmd);

    auto* evaluate_cmd = app.add_subcommand("evaluate", "Score a checkpoint on features");
    Common evaluate_c;
    add_common(evaluate_cmd, evaluate_c);
    fs::path evaluate_features, evaluate_model;
    std::string evaluate_split = "all";
    evaluate_cmd->add_option("--features", evaluate_features, "Featurize output directory")
        ->required()
        ->check(CLI::ExistingDirectory);
    evaluate_cmd->add_option("--model", evaluate_model, "Checkpoint file")
        ->required()
        ->check(CLI::ExistingFile);
    evaluate_cmd
        ->add_option("--split", evaluate_split,
                     "Which records to score: all, or the seeded test split")
        ->check(CLI::IsMember({"all", "test"}))
        ->capture_default_str();
    RatioFlags evaluate_rf;
    evaluate_rf.add(evaluate_cmd);

    auto* crossval = app.add_subcommand("crossval", "K-fold cross-validation on features");
    Common crossval_c;
    add_common(crossval, crossval_c);
    fs::path crossval_features;
    std::size_t crossval_k = 10;
    crossval->add_option("--features", crossval_features, "Featurize output directory")
        ->required()
        ->check(CLI::ExistingDirectory);
    crossval->add_option("--k", crossval_k, "Number of folds")->capture_default_str();
    TrainFlags crossval_tf;
    crossval_tf.add(crossval);

    auto* predict_cmd = app.add_subcommand("predict", "Classify one WAV with a checkpoint");
    Common predict_c;
    add_common(predict_cmd, predict_c);
    fs::path predict_wav, predict_model;
    predict_cmd->add_option("wav", predict_wav, "Input WAV file")
        ->required()
        ->check(CLI::ExistingFile);
    predict_cmd->add_option("--model", predict_model, "Checkpoint file")
        ->required()
        ->check(CLI::ExistingFile);

    auto* report_cmd = app.add_subcommand("report", "Summarize a run directory's artifacts");
    Common report_c;
    add_common(report_cmd, report_c);
    fs::path report_run;
    report_cmd->add_option("--run", report_run, "Run directory to summarize")
        ->required()
        ->check(CLI::ExistingDirectory);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n\n" << app.help();
        return 1;
    }

    try {
        if (app.got_subcommand(scan))
            return cmd_scan(scan_c, load_config(scan_c), scan_root, args);
        if (app.got_subcommand(validate))
            return cmd_validate(validate_c, load_config(validate_c), validate_manifest_file,
                                args);
        if (app.got_subcommand(synth))
            return cmd_synth(synth_c, load_config(synth_c), synth_root, synth_n, args);
        if (app.got_subcommand(augment))
            return cmd_augment(augment_c, load_config(augment_c), augment_manifest_file,
                               augment_noise_dir, augment_multiplier,
                               multiplier_opt->count() > 0, args);
        if (app.got_subcommand(featurize))
            return cmd_featurize(featurize_c, load_config(featurize_c),
                                 featurize_manifest_file, featurize_denoise,
                                 denoise_opt->count() > 0, args);
        if (app.got_subcommand(train_cmd))
            return cmd_train(train_c, load_config(train_c), train_features, train_tf,
                             train_rf, args);
        if (app.got_subcommand(evaluate_cmd))
            return cmd_evaluate(evaluate_c, load_config(evaluate_c), evaluate_features,
                                evaluate_model, evaluate_split, evaluate_rf, args);
        if (app.got_subcommand(crossval))
            return cmd_crossval(crossval_c, load_config(crossval_c), crossval_features,
                                crossval_k, crossval_tf, args);
        if (app.got_subcommand(predict_cmd))
            return cmd_predict(predict_c, load_config(predict_c), predict_wav, predict_model,
                               args);
        if (app.got_subcommand(report_cmd))
            return cmd_report(report_c, load_config(report_c), report_run, args);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        if (e.code() == Errc::invalid_config) return 1;
        if (e.code() == Errc::diverged_training) return 3;
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}

}  // namespace digitrec

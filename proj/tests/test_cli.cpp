#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "digitrec/cli.hpp"
#include "digitrec/dataset.hpp"
#include "json.hpp"
#include "test_util.hpp"

using namespace digitrec;
namespace fs = std::filesystem;

namespace {

struct CliResult {
    int code;
    std::string out;
};

// Runs the CLI in-process with stdout/stderr captured.
CliResult run(std::vector<std::string> args) {
    args.insert(args.begin(), "digitrec");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());

    std::stringstream captured;
    std::streambuf* old_out = std::cout.rdbuf(captured.rdbuf());
    std::streambuf* old_err = std::cerr.rdbuf(captured.rdbuf());
    int code = -1;
    try {
        code = run_cli(static_cast<int>(argv.size()), argv.data());
    } catch (...) {
        std::cout.rdbuf(old_out);
        std::cerr.rdbuf(old_err);
        throw;
    }
    std::cout.rdbuf(old_out);
    std::cerr.rdbuf(old_err);
    return {code, captured.str()};
}

nlohmann::json slurp_json(const fs::path& file) {
    std::ifstream in(file);
    REQUIRE(in.good());
    return nlohmann::json::parse(in);
}

std::string crc_hex(const fs::path& file) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%08x", testutil::file_crc(file));
    return buf;
}

std::size_t count_lines(const fs::path& file) {
    std::ifstream in(file);
    std::size_t n = 0;
    for (std::string line; std::getline(in, line);) ++n;
    return n;
}

void write_text(const fs::path& file, const std::string& text) {
    std::ofstream out(file);
    out << text;
}

}  // namespace

TEST_CASE("usage errors exit with code 1") {
    CHECK(run({}).code == 1);
    CHECK(run({"frobnicate"}).code == 1);
    CHECK(run({"scan"}).code == 1);  // --root is required
    CHECK(run({"--help"}).code == 0);
    CHECK(run({"--version"}).code == 0);
    CHECK(run({"--help"}).out.find("scan") != std::string::npos);
}

TEST_CASE("config files are checked for unknown keys and valid JSON") {
    testutil::TempDir dir("clicfg");
    const fs::path corpus = dir.path() / "corpus";
    fs::create_directories(corpus / "0");

    const fs::path bad_key = dir.path() / "bad_key.json";
    write_text(bad_key, "{\"frame_len\": 25}");
    CliResult r = run({"synth", "--out", (dir.path() / "o").string(), "--config",
                       bad_key.string()});
    CHECK(r.code == 1);
    CHECK(r.out.find("unrecognized") != std::string::npos);

    const fs::path not_json = dir.path() / "broken.json";
    write_text(not_json, "{{{");
    CHECK(run({"synth", "--out", (dir.path() / "o").string(), "--config",
               not_json.string()}).code == 1);

    const fs::path not_object = dir.path() / "array.json";
    write_text(not_object, "[1, 2]");
    CHECK(run({"synth", "--out", (dir.path() / "o").string(), "--config",
               not_object.string()}).code == 1);
}

TEST_CASE("data errors exit with code 2") {
    testutil::TempDir dir("clidata");
    const fs::path empty_root = dir.path() / "empty";
    fs::create_directories(empty_root);
    CHECK(run({"scan", "--root", empty_root.string(),
               "--out", (dir.path() / "o1").string()}).code == 2);

    // An existing file that is not a decodable WAV.
    const fs::path junk = dir.path() / "junk.wav";
    write_text(junk, "this is not audio");
    const fs::path fake_model = dir.path() / "model.ckpt";
    write_text(fake_model, "nor is this a checkpoint");
    CHECK(run({"predict", junk.string(), "--model", fake_model.string(),
               "--out", (dir.path() / "o2").string()}).code == 2);
}

TEST_CASE("the full pipeline runs end to end") {
    testutil::TempDir dir("clipipe");
    const fs::path synth_out = dir.path() / "synth";
    const fs::path feat_out = dir.path() / "feat";

    // --- synth ------------------------------------------------------------
    CliResult r = run({"synth", "--out", synth_out.string(), "--seed", "9",
                       "--n-per-class", "5"});
    REQUIRE(r.code == 0);
    const fs::path manifest_file = synth_out / "manifest.json";
    REQUIRE(fs::exists(manifest_file));

    const nlohmann::json record = slurp_json(synth_out / "run.json");
    CHECK(record.at("command") == "synth");
    CHECK(record.at("seed").get<std::uint64_t>() == 9);
    CHECK(record.at("artifacts").at("manifest.json").get<std::string>() ==
          crc_hex(manifest_file));

    const DatasetManifest manifest = load_manifest(manifest_file);
    REQUIRE(manifest.entries.size() == 50);

    // --- scan reproduces the same corpus listing ---------------------------
    r = run({"scan", "--root", manifest.root.string(),
             "--out", (dir.path() / "scan").string()});
    REQUIRE(r.code == 0);
    const DatasetManifest scanned = load_manifest(dir.path() / "scan" / "manifest.json");
    CHECK(scanned.entries.size() == 50);

    // --- validate finds nothing wrong with a fresh corpus ------------------
    r = run({"validate", "--manifest", manifest_file.string(),
             "--out", (dir.path() / "val").string()});
    REQUIRE(r.code == 0);
    CHECK(slurp_json(dir.path() / "val" / "validation.json").at("problems").empty());

    // --- augment writes copies beside the sources ---------------------------
    r = run({"augment", "--manifest", manifest_file.string(), "--multiplier", "1",
             "--seed", "4", "--out", (dir.path() / "aug").string()});
    REQUIRE(r.code == 0);
    const DatasetManifest augmented =
        load_manifest(dir.path() / "aug" / "manifest.json");
    CHECK(augmented.entries.size() == 100);

    // --- featurize (from the un-augmented manifest, for small splits) ------
    r = run({"featurize", "--manifest", manifest_file.string(),
             "--out", feat_out.string()});
    REQUIRE(r.code == 0);
    const fs::path fdir = feat_out / "features";
    REQUIRE(fs::exists(fdir / "index.json"));
    REQUIRE(fs::exists(fdir / "pipeline.json"));
    std::size_t records = 0;
    for (const auto& e : fs::recursive_directory_iterator(fdir))
        if (e.is_regular_file() && e.path().extension() == ".fm") ++records;
    CHECK(records == 50);

    // --- train twice with one seed, once with another -----------------------
    const fs::path cfg = dir.path() / "train.json";
    write_text(cfg,
               "{\"conv_filters\": [4, 4], \"dense_units\": 16, \"dropout_rate\": 0.0,"
               " \"epochs\": 3, \"batch_size\": 8, \"lr\": 0.001}");
    const std::vector<std::string> train_args = {
        "train", "--features", fdir.string(), "--config", cfg.string(), "--seed", "3"};

    auto with_out = [&](const fs::path& out) {
        std::vector<std::string> a = train_args;
        a.push_back("--out");
        a.push_back(out.string());
        return a;
    };
    REQUIRE(run(with_out(dir.path() / "t1")).code == 0);
    REQUIRE(run(with_out(dir.path() / "t2")).code == 0);

    for (const char* name : {"model.ckpt", "history.csv", "metrics.json",
                             "confusion.csv", "split.json", "run.json"})
        CHECK(fs::exists(dir.path() / "t1" / name));
    CHECK(count_lines(dir.path() / "t1" / "history.csv") == 4);  // header + 3 epochs

    // Byte-level comparison: checkpoints end with their own CRC32, so the CRC
    // of a whole checkpoint file is a constant and cannot tell files apart.
    CHECK(testutil::file_bytes(dir.path() / "t1" / "model.ckpt") ==
          testutil::file_bytes(dir.path() / "t2" / "model.ckpt"));

    std::vector<std::string> other_seed = with_out(dir.path() / "t3");
    other_seed[6] = "4";  // --seed value
    REQUIRE(run(other_seed).code == 0);
    CHECK(testutil::file_bytes(dir.path() / "t1" / "model.ckpt") !=
          testutil::file_bytes(dir.path() / "t3" / "model.ckpt"));

    const nlohmann::json split = slurp_json(dir.path() / "t1" / "split.json");
    CHECK(split.at("train").size() == 30);
    CHECK(split.at("val").size() == 10);
    CHECK(split.at("test").size() == 10);

    // --- evaluate the checkpoint on every record ----------------------------
    const fs::path ckpt = dir.path() / "t1" / "model.ckpt";
    r = run({"evaluate", "--features", fdir.string(), "--model", ckpt.string(),
             "--split", "all", "--out", (dir.path() / "eval").string()});
    REQUIRE(r.code == 0);
    const nlohmann::json metrics = slurp_json(dir.path() / "eval" / "metrics.json");
    const double acc = metrics.at("overall_accuracy").get<double>();
    CHECK(acc >= 0.0);
    CHECK(acc <= 100.0);
    CHECK(metrics.at("per_class").size() == 10);

    // --- predict one clip ----------------------------------------------------
    const fs::path wav = manifest.resolve(manifest.entries.front());
    r = run({"predict", wav.string(), "--model", ckpt.string(),
             "--out", (dir.path() / "pred").string()});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("\"digit\"") != std::string::npos);
    const nlohmann::json pred = slurp_json(dir.path() / "pred" / "prediction.json");
    const int digit = pred.at("digit").get<int>();
    CHECK(digit >= 0);
    CHECK(digit <= 9);
    const auto probs = pred.at("probabilities").get<std::vector<double>>();
    REQUIRE(probs.size() == 10);
    CHECK(testutil::close(std::accumulate(probs.begin(), probs.end(), 0.0), 1.0, 1e-9));

    // --- cross-validate ------------------------------------------------------
    r = run({"crossval", "--features", fdir.string(), "--k", "5", "--config",
             cfg.string(), "--seed", "11", "--out", (dir.path() / "cv").string()});
    REQUIRE(r.code == 0);
    const nlohmann::json cv = slurp_json(dir.path() / "cv" / "crossval.json");
    CHECK(cv.at("folds").size() == 5);
    CHECK(cv.contains("mean_accuracy"));

    // --- report summarizes a run, but never clobbers it ----------------------
    r = run({"report", "--run", (dir.path() / "t1").string(),
             "--out", (dir.path() / "rep").string()});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("metrics:") != std::string::npos);
    CHECK(fs::exists(dir.path() / "rep" / "report.txt"));

    CHECK(run({"report", "--run", (dir.path() / "t1").string(),
               "--out", (dir.path() / "t1").string()}).code == 1);
}

TEST_CASE("the seed comes from the config file unless the flag overrides it") {
    testutil::TempDir dir("cliseed");
    const fs::path cfg = dir.path() / "cfg.json";
    write_text(cfg, "{\"seed\": 123}");

    REQUIRE(run({"synth", "--n-per-class", "1", "--config", cfg.string(),
                 "--out", (dir.path() / "a").string()}).code == 0);
    CHECK(slurp_json(dir.path() / "a" / "run.json").at("seed").get<std::uint64_t>() == 123);

    REQUIRE(run({"synth", "--n-per-class", "1", "--config", cfg.string(), "--seed", "7",
                 "--out", (dir.path() / "b").string()}).code == 0);
    CHECK(slurp_json(dir.path() / "b" / "run.json").at("seed").get<std::uint64_t>() == 7);
}
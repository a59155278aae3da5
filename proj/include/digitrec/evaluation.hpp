#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "digitrec/dataset.hpp"
#include "digitrec/model.hpp"

namespace digitrec {

struct ConfusionMatrix {
    // counts[true][predicted]
    std::array<std::array<long long, 10>, 10> counts{};

    long long total() const;
    long long trace() const;
    void add(int truth, int predicted);
};

struct ClassMetrics {
    double accuracy = 0.0;  // defined as recall (per-class share of its own samples)
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    bool flagged = false;  // a zero denominator was reported as 0
};

struct EvalReport {
    ConfusionMatrix confusion;
    std::array<ClassMetrics, 10> per_class{};
    ClassMetrics macro;  // unweighted class means
    double overall_accuracy = 0.0;
};

// 100 * trace / total.
double accuracy(const ConfusionMatrix& cm);

// Per-class precision (column), recall (row), F1, and accuracy (= recall).
// Zero denominators yield 0 with the flag set.
std::array<ClassMetrics, 10> per_class_metrics(const ConfusionMatrix& cm);

// Full report (per-class, macro means, overall) from a finished matrix.
EvalReport report_from_confusion(const ConfusionMatrix& cm);

// Predicts every sample once and assembles the report.
EvalReport evaluate(Model& model, const FeatureDataset& test_set);

// ---------------------------------------------------------------- split ----

struct SplitIndices {
    std::vector<std::size_t> train, val, test;
};

// Disjoint, exhaustive train/val/test partition. Stratified mode splits each
// class independently (largest-remainder allocation) and requires at least
// one sample per class per split. Deterministic given the seed.
SplitIndices split_dataset(const std::vector<int>& labels, std::array<double, 3> ratios,
                           std::uint64_t seed, bool stratified = true);

SplitIndices split_dataset(const DatasetManifest& manifest, std::array<double, 3> ratios,
                           std::uint64_t seed, bool stratified = true);

struct ManifestSplit {
    DatasetManifest train, val, test;
};

// Split protocol for augmented corpora: original clips are split; augmented
// copies join the training split only when their source clip trains, and are
// dropped otherwise, so validation and test stay free of augmented audio.
ManifestSplit split_manifest_with_augments(const DatasetManifest& manifest,
                                           std::array<double, 3> ratios, std::uint64_t seed,
                                           bool stratified = true);

// ------------------------------------------------------ cross-validation ----

// Returns predictions for the test fold, given the training fold and the
// fold-specific seed. Injectable so the harness is testable without training.
using FoldTrainer = std::function<std::vector<int>(
    const FeatureDataset& train, const FeatureDataset& test, std::uint64_t fold_seed)>;

struct CrossValReport {
    std::vector<EvalReport> folds;
    double mean_accuracy = 0.0;
    double std_accuracy = 0.0;
};

// k stratified folds; fold i tests on partition i and trains on the rest
// with seed + i. Every sample is tested exactly once.
CrossValReport cross_validate(const FeatureDataset& data, std::size_t k,
                              const FoldTrainer& trainer, std::uint64_t seed);

// Convenience wrapper running the real model per fold.
CrossValReport cross_validate(const FeatureDataset& data, std::size_t k,
                              const ModelConfig& model_config, const TrainConfig& train_config,
                              std::uint64_t seed);

// ------------------------------------------------------------- emission ----

// 11x11 CSV: header row/column of class names around the counts.
void write_confusion_csv(const ConfusionMatrix& cm,
                         const std::array<std::string, 10>& names,
                         const std::filesystem::path& file);

// Per-class + macro + overall metrics, percents rounded to 2 decimals.
void write_metrics_json(const EvalReport& report, const std::array<std::string, 10>& names,
                        const std::filesystem::path& file);

void write_crossval_json(const CrossValReport& report, const std::filesystem::path& file);

// epoch, train_loss, train_acc, val_loss, val_acc rows.
void write_history_csv(const TrainHistory& history, const std::filesystem::path& file);

}  // namespace digitrec

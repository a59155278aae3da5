#include "digitrec/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <regex>
#include <unordered_map>

#include "digitrec/rng.hpp"
#include "json.hpp"

namespace digitrec {

using nlohmann::json;

long long ConfusionMatrix::total() const {
    long long n = 0;
    for (const auto& row : counts)
        for (long long v : row) n += v;
    return n;
}

long long ConfusionMatrix::trace() const {
    long long n = 0;
    for (std::size_t c = 0; c < counts.size(); ++c) n += counts[c][c];
    return n;
}

void ConfusionMatrix::add(int truth, int predicted) {
    if (truth < 0 || truth >= 10 || predicted < 0 || predicted >= 10)
        raise(Errc::label_out_of_range, "confusion matrix labels must lie in 0..9");
    counts[static_cast<std::size_t>(truth)][static_cast<std::size_t>(predicted)] += 1;
}

double accuracy(const ConfusionMatrix& cm) {
    const long long total = cm.total();
    if (total == 0) raise(Errc::empty_matrix, "confusion matrix holds no samples");
    return 100.0 * static_cast<double>(cm.trace()) / static_cast<double>(total);
}

std::array<ClassMetrics, 10> per_class_metrics(const ConfusionMatrix& cm) {
    if (cm.total() == 0) raise(Errc::empty_matrix, "confusion matrix holds no samples");

    std::array<ClassMetrics, 10> metrics{};
    for (std::size_t c = 0; c < 10; ++c) {
        long long row = 0, col = 0;
        for (std::size_t j = 0; j < 10; ++j) {
            row += cm.counts[c][j];
            col += cm.counts[j][c];
        }
        const long long d = cm.counts[c][c];
        ClassMetrics& m = metrics[c];
        if (row > 0) {
            m.recall = 100.0 * static_cast<double>(d) / static_cast<double>(row);
        } else {
            m.flagged = true;
        }
        if (col > 0) {
            m.precision = 100.0 * static_cast<double>(d) / static_cast<double>(col);
        } else {
            m.flagged = true;
        }
        m.accuracy = m.recall;  // per-class accuracy over the class's own samples
        if (m.precision + m.recall > 0.0) {
            m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
        } else {
            m.flagged = true;
        }
    }
    return metrics;
}

EvalReport report_from_confusion(const ConfusionMatrix& cm) {
    EvalReport report;
    report.confusion = cm;
    report.per_class = per_class_metrics(cm);
    report.overall_accuracy = accuracy(cm);
    for (const auto& m : report.per_class) {
        report.macro.accuracy += m.accuracy / 10.0;
        report.macro.precision += m.precision / 10.0;
        report.macro.recall += m.recall / 10.0;
        report.macro.f1 += m.f1 / 10.0;
        report.macro.flagged = report.macro.flagged || m.flagged;
    }
    return report;
}

EvalReport evaluate(Model& model, const FeatureDataset& test_set) {
    if (test_set.empty()) raise(Errc::empty_dataset, "test set is empty");
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < test_set.size(); ++i) {
        const Prediction pred = predict(model, test_set.maps[i]);
        cm.add(test_set.labels[i], pred.digit);
    }
    return report_from_confusion(cm);
}

namespace {

// Largest-remainder allocation of n items across the ratios.
std::array<std::size_t, 3> allocate(std::size_t n, const std::array<double, 3>& ratios) {
    std::array<std::size_t, 3> counts{};
    std::array<double, 3> remainders{};
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < 3; ++i) {
        const double exact = ratios[i] * static_cast<double>(n);
        counts[i] = static_cast<std::size_t>(exact);
        remainders[i] = exact - static_cast<double>(counts[i]);
        assigned += counts[i];
    }
    while (assigned < n) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < 3; ++i)
            if (remainders[i] > remainders[best]) best = i;
        counts[best] += 1;
        remainders[best] = -1.0;
        assigned += 1;
    }
    return counts;
}

}  // namespace

SplitIndices split_dataset(const std::vector<int>& labels, std::array<double, 3> ratios,
                           std::uint64_t seed, bool stratified) {
    const double sum = ratios[0] + ratios[1] + ratios[2];
    if (std::abs(sum - 1.0) > 1e-9) raise(Errc::invalid_config, "split ratios must sum to 1");
    if (labels.empty()) raise(Errc::empty_dataset, "nothing to split");

    SplitIndices split;
    if (!stratified) {
        std::vector<std::size_t> order(labels.size());
        std::iota(order.begin(), order.end(), 0);
        Rng rng(seed);
        rng.shuffle(order);
        const auto counts = allocate(order.size(), ratios);
        auto it = order.begin();
        split.train.assign(it, it + static_cast<long>(counts[0]));
        it += static_cast<long>(counts[0]);
        split.val.assign(it, it + static_cast<long>(counts[1]));
        it += static_cast<long>(counts[1]);
        split.test.assign(it, order.end());
        return split;
    }

    std::array<std::vector<std::size_t>, 10> by_class;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || labels[i] >= 10)
            raise(Errc::label_out_of_range, "split labels must lie in 0..9");
        by_class[static_cast<std::size_t>(labels[i])].push_back(i);
    }

    for (std::size_t c = 0; c < 10; ++c) {
        auto& members = by_class[c];
        if (members.empty()) continue;  // absent classes cannot be represented
        Rng rng(Rng::derive(seed, c));
        rng.shuffle(members);
        const auto counts = allocate(members.size(), ratios);
        for (std::size_t part = 0; part < 3; ++part)
            if (counts[part] == 0)
                raise(Errc::insufficient_class_samples,
                      "class " + std::to_string(c) + " cannot cover every split");
        std::size_t at = 0;
        for (std::size_t i = 0; i < counts[0]; ++i) split.train.push_back(members[at++]);
        for (std::size_t i = 0; i < counts[1]; ++i) split.val.push_back(members[at++]);
        while (at < members.size()) split.test.push_back(members[at++]);
    }
    return split;
}

SplitIndices split_dataset(const DatasetManifest& manifest, std::array<double, 3> ratios,
                           std::uint64_t seed, bool stratified) {
    std::vector<int> labels(manifest.entries.size());
    for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = manifest.entries[i].label;
    return split_dataset(labels, ratios, seed, stratified);
}

ManifestSplit split_manifest_with_augments(const DatasetManifest& manifest,
                                           std::array<double, 3> ratios, std::uint64_t seed,
                                           bool stratified) {
    std::vector<std::size_t> original_idx;
    std::vector<int> original_labels;
    for (std::size_t i = 0; i < manifest.entries.size(); ++i)
        if (manifest.entries[i].origin == ClipOrigin::original) {
            original_idx.push_back(i);
            original_labels.push_back(manifest.entries[i].label);
        }
    if (original_idx.empty()) raise(Errc::empty_dataset, "manifest holds no original clips");

    const SplitIndices split = split_dataset(original_labels, ratios, seed, stratified);

    enum class Part { train, val, test };
    std::unordered_map<std::string, Part> part_of;  // original path -> split
    ManifestSplit out;
    out.train.root = out.val.root = out.test.root = manifest.root;
    out.train.label_names = out.val.label_names = out.test.label_names = manifest.label_names;

    auto place = [&](const std::vector<std::size_t>& members, Part part, DatasetManifest& dest) {
        for (std::size_t local : members) {
            const ManifestEntry& e = manifest.entries[original_idx[local]];
            part_of[e.path] = part;
            dest.entries.push_back(e);
        }
    };
    place(split.train, Part::train, out.train);
    place(split.val, Part::val, out.val);
    place(split.test, Part::test, out.test);

    // Augmented copies train with their source; copies of val/test sources
    // (or of unknown sources) are left out entirely to avoid leakage.
    const std::regex aug_stem(R"(^(.*)\.aug\d+$)");
    for (const ManifestEntry& e : manifest.entries) {
        if (e.origin != ClipOrigin::augmented) continue;
        const std::filesystem::path rel(e.path);
        std::smatch m;
        const std::string stem = rel.stem().string();
        if (!std::regex_match(stem, m, aug_stem)) continue;
        const std::string source =
            (rel.parent_path() / (m[1].str() + rel.extension().string())).generic_string();
        const auto it = part_of.find(source);
        if (it != part_of.end() && it->second == Part::train) out.train.entries.push_back(e);
    }
    return out;
}

CrossValReport cross_validate(const FeatureDataset& data, std::size_t k,
                              const FoldTrainer& trainer, std::uint64_t seed) {
    if (k < 2) raise(Errc::invalid_config, "cross-validation needs k >= 2");
    if (data.empty()) raise(Errc::empty_dataset, "nothing to cross-validate");
    if (data.maps.size() != data.labels.size())
        raise(Errc::shape_mismatch, "dataset maps and labels differ in length");

    // Stratified fold assignment: shuffle within each class, then deal
    // round-robin so folds stay balanced.
    std::vector<std::size_t> fold_of(data.size());
    std::array<std::vector<std::size_t>, 10> by_class;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const int l = data.labels[i];
        if (l < 0 || l >= 10) raise(Errc::label_out_of_range, "labels must lie in 0..9");
        by_class[static_cast<std::size_t>(l)].push_back(i);
    }
    for (std::size_t c = 0; c < 10; ++c) {
        auto& members = by_class[c];
        if (members.empty()) continue;
        if (members.size() < k)
            raise(Errc::insufficient_class_samples,
                  "class " + std::to_string(c) + " has fewer samples than folds");
        Rng rng(Rng::derive(seed, c));
        rng.shuffle(members);
        for (std::size_t i = 0; i < members.size(); ++i) fold_of[members[i]] = i % k;
    }

    CrossValReport report;
    std::vector<double> fold_acc;
    for (std::size_t f = 0; f < k; ++f) {
        FeatureDataset train_set, test_set;
        for (std::size_t i = 0; i < data.size(); ++i) {
            FeatureDataset& dest = fold_of[i] == f ? test_set : train_set;
            dest.maps.push_back(data.maps[i]);
            dest.labels.push_back(data.labels[i]);
        }
        const std::vector<int> preds = trainer(train_set, test_set, seed + f);
        if (preds.size() != test_set.size())
            raise(Errc::shape_mismatch, "fold trainer returned the wrong prediction count");

        ConfusionMatrix cm;
        for (std::size_t i = 0; i < preds.size(); ++i) cm.add(test_set.labels[i], preds[i]);
        report.folds.push_back(report_from_confusion(cm));
        fold_acc.push_back(report.folds.back().overall_accuracy);
    }

    const double mean = std::accumulate(fold_acc.begin(), fold_acc.end(), 0.0) /
                        static_cast<double>(k);
    double var = 0.0;
    for (double a : fold_acc) var += (a - mean) * (a - mean);
    report.mean_accuracy = mean;
    report.std_accuracy = std::sqrt(var / static_cast<double>(k));
    return report;
}

CrossValReport cross_validate(const FeatureDataset& data, std::size_t k,
                              const ModelConfig& model_config, const TrainConfig& train_config,
                              std::uint64_t seed) {
    const FoldTrainer trainer = [&model_config, &train_config](
                                    const FeatureDataset& train_set,
                                    const FeatureDataset& test_set, std::uint64_t fold_seed) {
        Model model = build_model(model_config, fold_seed);
        TrainConfig tc = train_config;
        tc.seed = fold_seed;
        train(model, train_set, FeatureDataset{}, tc);
        std::vector<int> preds;
        preds.reserve(test_set.size());
        for (const auto& fm : test_set.maps) preds.push_back(predict(model, fm).digit);
        return preds;
    };
    return cross_validate(data, k, trainer, seed);
}

namespace {

double round2(double v) { return std::round(v * 100.0) / 100.0; }

json metrics_to_json(const ClassMetrics& m) {
    return json{{"accuracy", round2(m.accuracy)},
                {"precision", round2(m.precision)},
                {"recall", round2(m.recall)},
                {"f1", round2(m.f1)},
                {"flagged", m.flagged}};
}

}  // namespace

void write_confusion_csv(const ConfusionMatrix& cm, const std::array<std::string, 10>& names,
                         const std::filesystem::path& file) {
    std::ofstream out(file);
    if (!out) raise(Errc::io_error, "cannot open for writing: " + file.string());
    out << "true\\pred";
    for (const auto& n : names) out << ',' << n;
    out << '\n';
    for (std::size_t r = 0; r < 10; ++r) {
        out << names[r];
        for (std::size_t c = 0; c < 10; ++c) out << ',' << cm.counts[r][c];
        out << '\n';
    }
    if (!out) raise(Errc::io_error, "short write: " + file.string());
}

void write_metrics_json(const EvalReport& report, const std::array<std::string, 10>& names,
                        const std::filesystem::path& file) {
    json per_class = json::array();
    for (std::size_t c = 0; c < 10; ++c) {
        json m = metrics_to_json(report.per_class[c]);
        m["class"] = c;
        m["name"] = names[c];
        per_class.push_back(std::move(m));
    }
    json confusion = json::array();
    for (const auto& row : report.confusion.counts) confusion.push_back(row);

    const json doc{{"overall_accuracy", round2(report.overall_accuracy)},
                   {"per_class", per_class},
                   {"macro", metrics_to_json(report.macro)},
                   {"confusion", confusion}};
    std::ofstream out(file);
    if (!out) raise(Errc::io_error, "cannot open for writing: " + file.string());
    out << doc.dump(2) << '\n';
    if (!out) raise(Errc::io_error, "short write: " + file.string());
}

void write_crossval_json(const CrossValReport& report, const std::filesystem::path& file) {
    json folds = json::array();
    for (std::size_t f = 0; f < report.folds.size(); ++f) {
        json confusion = json::array();
        for (const auto& row : report.folds[f].confusion.counts) confusion.push_back(row);
        folds.push_back(json{{"fold", f},
                             {"accuracy", round2(report.folds[f].overall_accuracy)},
                             {"macro", metrics_to_json(report.folds[f].macro)},
                             {"confusion", confusion}});
    }
    const json doc{{"folds", folds},
                   {"mean_accuracy", round2(report.mean_accuracy)},
                   {"std_accuracy", round2(report.std_accuracy)}};
    std::ofstream out(file);
    if (!out) raise(Errc::io_error, "cannot open for writing: " + file.string());
    out << doc.dump(2) << '\n';
    if (!out) raise(Errc::io_error, "short write: " + file.string());
}

void write_history_csv(const TrainHistory& history, const std::filesystem::path& file) {
    std::ofstream out(file);
    if (!out) raise(Errc::io_error, "cannot open for writing: " + file.string());
    out << "epoch,train_loss,train_acc,val_loss,val_acc\n";
    for (std::size_t e = 0; e < history.train_loss.size(); ++e) {
        out << e << ',' << history.train_loss[e] << ',' << history.train_acc[e] << ',';
        if (e < history.val_loss.size())
            out << history.val_loss[e] << ',' << history.val_acc[e];
        else
            out << ',';
        out << '\n';
    }
    if (!out) raise(Errc::io_error, "short write: " + file.string());
}

}  // namespace digitrec

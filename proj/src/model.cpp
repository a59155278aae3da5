#include "digitrec/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <string>

#include "digitrec/serialize.hpp"
#include "json.hpp"

namespace digitrec {

using nlohmann::json;

namespace {

constexpr char kCheckpointMagic[4] = {'D', 'G', 'C', 'K'};
constexpr std::uint32_t kCheckpointVersion = 1;

void snap_vec(std::vector<double>& v) {
    for (double& x : v) x = to_f32(x);
}

}  // namespace

void ModelConfig::validate() const {
    if (conv_filters.empty()) raise(Errc::invalid_config, "need at least one conv stage");
    for (std::size_t f : conv_filters)
        if (f == 0) raise(Errc::invalid_config, "conv filter counts must be positive");
    if (kernel == 0 || kernel % 2 == 0)
        raise(Errc::invalid_config, "kernel side must be odd and positive");
    if (pool != 2) raise(Errc::invalid_config, "only 2x2 pooling is supported");
    if (dense_units == 0 || classes == 0 || input_size == 0)
        raise(Errc::invalid_config, "dense_units, classes, and input_size must be positive");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
        raise(Errc::invalid_config, "dropout_rate must lie in [0, 1)");
    if (l2_factor < 0.0) raise(Errc::invalid_config, "l2_factor must be nonnegative");
    std::size_t s = input_size;
    for (std::size_t i = 0; i < conv_filters.size(); ++i) {
        if (s < 2) raise(Errc::invalid_config, "input too small for the pooling stages");
        s /= 2;
    }
}

std::vector<std::size_t> ModelConfig::stage_sizes() const {
    std::vector<std::size_t> sizes{input_size};
    std::size_t s = input_size;
    for (std::size_t i = 0; i < conv_filters.size(); ++i) {
        s /= 2;
        sizes.push_back(s);
    }
    return sizes;
}

std::size_t ModelConfig::flat_dim() const {
    const auto sizes = stage_sizes();
    return sizes.back() * sizes.back() * conv_filters.back();
}

void TrainConfig::validate() const {
    if (batch_size == 0) raise(Errc::invalid_config, "batch_size must be positive");
    if (lr <= 0.0) raise(Errc::invalid_config, "learning rate must be positive");
    if (early_stop_patience && *early_stop_patience == 0)
        raise(Errc::invalid_config, "early_stop_patience must be positive when set");
}

std::size_t Model::parameter_count() const {
    std::size_t n = 0;
    for (const auto& s : stages)
        n += s.conv.kernels.size() + s.conv.bias.size() + s.bn.gamma.size() + s.bn.beta.size();
    n += dense1.weights.size() + dense1.bias.size();
    n += dense2.weights.size() + dense2.bias.size();
    return n;
}

void Model::snap_f32() {
    for (auto& s : stages) {
        s.conv.kernels.snap_f32();
        s.conv.bias.snap_f32();
        snap_vec(s.bn.gamma);
        snap_vec(s.bn.beta);
        snap_vec(s.bn.running_mean);
        snap_vec(s.bn.running_var);
    }
    dense1.weights.snap_f32();
    dense1.bias.snap_f32();
    dense2.weights.snap_f32();
    dense2.bias.snap_f32();
}

Model build_model(const ModelConfig& config, std::uint64_t seed) {
    config.validate();
    Model model;
    model.config = config;
    model.seed = seed;

    Rng rng(seed);
    auto he_normal = [&rng](Tensor& t, std::size_t fan_in) {
        const double std_dev = std::sqrt(2.0 / static_cast<double>(fan_in));
        for (double& w : t.data) w = rng.normal() * std_dev;
    };

    std::size_t in_ch = 1;
    for (std::size_t f : config.conv_filters) {
        ConvStage stage;
        stage.conv.kernels = Tensor({f, in_ch, config.kernel, config.kernel});
        stage.conv.bias = Tensor({f});
        stage.conv.l2_factor = 0.0;
        he_normal(stage.conv.kernels, in_ch * config.kernel * config.kernel);
        stage.bn = BatchNormState(f);
        model.stages.push_back(std::move(stage));
        in_ch = f;
    }
    model.stages.front().conv.l2_factor = config.l2_factor;

    const std::size_t flat = config.flat_dim();
    model.dense1.weights = Tensor({flat, config.dense_units});
    model.dense1.bias = Tensor({config.dense_units});
    he_normal(model.dense1.weights, flat);
    model.dense2.weights = Tensor({config.dense_units, config.classes});
    model.dense2.bias = Tensor({config.classes});
    he_normal(model.dense2.weights, config.dense_units);

    model.snap_f32();
    return model;
}

Tensor forward(Model& model, const Tensor& batch, Mode mode, ForwardCache* cache,
               Rng* dropout_rng) {
    batch.require_rank(4, "model input must be N x S x S x 1");
    if (batch.dim(1) != model.config.input_size || batch.dim(2) != model.config.input_size ||
        batch.dim(3) != 1)
        raise(Errc::shape_mismatch, "model input spatial shape does not match the config");
    if (mode == Mode::train && (!cache || !dropout_rng))
        raise(Errc::invalid_config, "train-mode forward needs a cache and a dropout rng");

    const bool caching = mode == Mode::train && cache;
    Tensor x = batch;
    for (auto& stage : model.stages) {
        if (caching) cache->conv_in.push_back(x);
        Tensor conv_out = conv2d_forward(x, stage.conv);
        BatchNormCache bn_cache;
        Tensor bn_out =
            batchnorm_forward(conv_out, stage.bn, mode, caching ? &bn_cache : nullptr);
        if (caching) {
            cache->bn.push_back(std::move(bn_cache));
            cache->relu_in.push_back(bn_out);
        }
        MaxPoolResult pooled = maxpool_forward(relu(bn_out));
        x = pooled.output;
        if (caching) cache->pool.push_back(std::move(pooled));
    }

    const std::size_t N = x.dim(0);
    Tensor flat({N, model.config.flat_dim()});
    std::memcpy(flat.data.data(), x.data.data(), x.size() * sizeof(double));
    if (caching) cache->flat = flat;

    Tensor fc1 = dense_forward(flat, model.dense1);
    if (caching) cache->fc1_out = fc1;
    Tensor activated = relu(fc1);

    Tensor dropped;
    if (mode == Mode::train) {
        DropoutResult drop = dropout(activated, model.config.dropout_rate, mode, *dropout_rng);
        dropped = drop.output;
        if (caching) {
            cache->drop = std::move(drop);
            cache->fc2_in = dropped;
        }
    } else {
        dropped = std::move(activated);
    }
    return dense_forward(dropped, model.dense2);
}

namespace {

Tensor assemble_batch(const FeatureDataset& set, const std::vector<std::size_t>& order,
                      std::size_t begin, std::size_t end, const Model& model,
                      std::vector<int>* labels) {
    const std::size_t n = end - begin;
    const std::size_t s = FeatureMap::kSize;
    Tensor batch({n, s, s, 1});
    if (labels) labels->resize(n);
    for (std::size_t b = 0; b < n; ++b) {
        const std::size_t idx = order[begin + b];
        const FeatureMap* fm = &set.maps[idx];
        FeatureMap standardized;
        if (model.has_stats) {
            standardized = standardize(*fm, model.stats);
            fm = &standardized;
        }
        std::memcpy(batch.data.data() + b * s * s, fm->values.data(), s * s * sizeof(double));
        if (labels) (*labels)[b] = set.labels[idx];
    }
    return batch;
}

// Parameters in the fixed build order used by the optimizer and checkpoint.
std::vector<std::vector<double>*> parameter_list(Model& model) {
    std::vector<std::vector<double>*> params;
    for (auto& s : model.stages) {
        params.push_back(&s.conv.kernels.data);
        params.push_back(&s.conv.bias.data);
        params.push_back(&s.bn.gamma);
        params.push_back(&s.bn.beta);
    }
    params.push_back(&model.dense1.weights.data);
    params.push_back(&model.dense1.bias.data);
    params.push_back(&model.dense2.weights.data);
    params.push_back(&model.dense2.bias.data);
    return params;
}

struct Snapshot {
    std::vector<ConvStage> stages;
    DenseLayer dense1, dense2;
};

Snapshot take_snapshot(const Model& m) { return {m.stages, m.dense1, m.dense2}; }

void restore_snapshot(Model& m, const Snapshot& s) {
    m.stages = s.stages;
    m.dense1 = s.dense1;
    m.dense2 = s.dense2;
}

}  // namespace

TrainReport train(Model& model, const FeatureDataset& train_set, const FeatureDataset& val_set,
                  const TrainConfig& tc) {
    tc.validate();
    if (train_set.empty()) raise(Errc::empty_dataset, "training set is empty");
    if (train_set.maps.size() != train_set.labels.size() ||
        val_set.maps.size() != val_set.labels.size())
        raise(Errc::shape_mismatch, "dataset maps and labels differ in length");
    if (tc.batch_size > train_set.size())
        raise(Errc::invalid_config, "batch_size exceeds the training-set size");
    for (int l : train_set.labels)
        if (l < 0 || static_cast<std::size_t>(l) >= model.config.classes)
            raise(Errc::label_out_of_range, "training label outside the class range");
    for (int l : val_set.labels)
        if (l < 0 || static_cast<std::size_t>(l) >= model.config.classes)
            raise(Errc::label_out_of_range, "validation label outside the class range");

    // Standardization statistics come from the raw training maps and become
    // part of the model so inference preprocesses identically.
    model.stats = compute_row_stats(train_set.maps);
    model.has_stats = true;

    const std::size_t n = train_set.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;

    Rng shuffle_rng(Rng::derive(tc.seed, 1));
    Rng dropout_rng(Rng::derive(tc.seed, 2));

    std::vector<ConvLayer*> conv_layers;
    for (auto& s : model.stages) conv_layers.push_back(&s.conv);

    AdamState adam;
    adam.lr = tc.lr;

    TrainReport report;
    const bool has_val = !val_set.empty();
    double best_val = std::numeric_limits<double>::infinity();
    Snapshot best_snapshot;

    for (std::size_t epoch = 0; epoch < tc.epochs; ++epoch) {
        shuffle_rng.shuffle(order);

        // Batch boundaries; a trailing singleton merges into the previous
        // batch because train-mode batchnorm needs at least 2 samples.
        std::vector<std::pair<std::size_t, std::size_t>> batches;
        for (std::size_t start = 0; start < n; start += tc.batch_size)
            batches.emplace_back(start, std::min(n, start + tc.batch_size));
        if (batches.size() >= 2 && batches.back().second - batches.back().first == 1) {
            batches[batches.size() - 2].second = n;
            batches.pop_back();
        }

        double epoch_loss = 0.0;
        std::size_t epoch_correct = 0;
        for (const auto& [begin, end] : batches) {
            std::vector<int> labels;
            const Tensor batch = assemble_batch(train_set, order, begin, end, model, &labels);

            ForwardCache cache;
            const Tensor logits = forward(model, batch, Mode::train, &cache, &dropout_rng);
            SoftmaxCeResult ce = softmax_cross_entropy(logits, labels);

            double penalty = 0.0;
            for (const ConvLayer* layer : conv_layers) penalty += l2_penalty(*layer);
            const double total = ce.loss + penalty;
            if (!std::isfinite(total))
                raise(Errc::diverged_training, "training loss became non-finite");
            epoch_loss += total * static_cast<double>(end - begin);

            for (std::size_t b = 0; b < labels.size(); ++b) {
                const double* row = ce.probs.data.data() + b * model.config.classes;
                std::size_t arg = 0;
                for (std::size_t k = 1; k < model.config.classes; ++k)
                    if (row[k] > row[arg]) arg = k;
                if (static_cast<int>(arg) == labels[b]) ++epoch_correct;
            }

            // Backward through the stack in reverse build order.
            DenseGrads g2 = dense_backward(ce.grad_logits, cache.fc2_in, model.dense2);
            Tensor g = dropout_backward(g2.input, cache.drop.mask, model.config.dropout_rate);
            g = relu_backward(g, cache.fc1_out);
            DenseGrads g1 = dense_backward(g, cache.flat, model.dense1);

            const std::size_t n_stages = model.stages.size();
            std::vector<ConvGrads> conv_grads(n_stages);
            std::vector<BatchNormGrads> bn_grads(n_stages);

            Tensor gx(cache.pool.back().output.shape);
            std::memcpy(gx.data.data(), g1.input.data.data(), gx.size() * sizeof(double));
            for (std::size_t s = n_stages; s-- > 0;) {
                Tensor gp = maxpool_backward(gx, cache.pool[s]);
                Tensor gr = relu_backward(gp, cache.relu_in[s]);
                bn_grads[s] = batchnorm_backward(gr, cache.bn[s], model.stages[s].bn);
                conv_grads[s] =
                    conv2d_backward(bn_grads[s].input, cache.conv_in[s], model.stages[s].conv);
                const ConvLayer& layer = model.stages[s].conv;
                if (layer.l2_factor > 0.0)
                    for (std::size_t k = 0; k < layer.kernels.size(); ++k)
                        conv_grads[s].kernels.data[k] +=
                            2.0 * layer.l2_factor * layer.kernels.data[k];
                if (s > 0) gx = std::move(conv_grads[s].input);
            }

            std::vector<std::vector<double>*> params = parameter_list(model);
            std::vector<const std::vector<double>*> grads;
            for (std::size_t s = 0; s < n_stages; ++s) {
                grads.push_back(&conv_grads[s].kernels.data);
                grads.push_back(&conv_grads[s].bias.data);
                grads.push_back(&bn_grads[s].gamma);
                grads.push_back(&bn_grads[s].beta);
            }
            grads.push_back(&g1.weights.data);
            grads.push_back(&g1.bias.data);
            grads.push_back(&g2.weights.data);
            grads.push_back(&g2.bias.data);

            adam_step(params, grads, adam);
            model.snap_f32();
        }

        report.history.train_loss.push_back(epoch_loss / static_cast<double>(n));
        report.history.train_acc.push_back(static_cast<double>(epoch_correct) /
                                           static_cast<double>(n));

        if (has_val) {
            const auto [vloss, vacc] = dataset_loss_accuracy(model, val_set, tc.batch_size);
            if (!std::isfinite(vloss))
                raise(Errc::diverged_training, "validation loss became non-finite");
            report.history.val_loss.push_back(vloss);
            report.history.val_acc.push_back(vacc);
            if (vloss < best_val) {
                best_val = vloss;
                report.best_epoch = epoch;
                best_snapshot = take_snapshot(model);
            }
            if (tc.early_stop_patience &&
                epoch - report.best_epoch >= *tc.early_stop_patience) {
                report.early_stopped = true;
                break;
            }
        } else {
            report.best_epoch = epoch;
        }
    }

    if (has_val && !report.history.val_loss.empty()) restore_snapshot(model, best_snapshot);
    model.history = report.history;
    return report;
}

std::pair<double, double> dataset_loss_accuracy(Model& model, const FeatureDataset& set,
                                                std::size_t batch_size) {
    if (set.empty()) raise(Errc::empty_dataset, "cannot evaluate an empty dataset");
    if (batch_size == 0) raise(Errc::invalid_config, "batch_size must be positive");

    std::vector<std::size_t> order(set.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    double penalty = 0.0;
    for (const auto& s : model.stages) penalty += l2_penalty(s.conv);

    double total_ce = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < set.size(); start += batch_size) {
        const std::size_t end = std::min(set.size(), start + batch_size);
        std::vector<int> labels;
        const Tensor batch = assemble_batch(set, order, start, end, model, &labels);
        const Tensor logits = forward(model, batch, Mode::infer);
        const SoftmaxCeResult ce = softmax_cross_entropy(logits, labels);
        total_ce += ce.loss * static_cast<double>(end - start);
        for (std::size_t b = 0; b < labels.size(); ++b) {
            const double* row = ce.probs.data.data() + b * model.config.classes;
            std::size_t arg = 0;
            for (std::size_t k = 1; k < model.config.classes; ++k)
                if (row[k] > row[arg]) arg = k;
            if (static_cast<int>(arg) == labels[b]) ++correct;
        }
    }
    return {total_ce / static_cast<double>(set.size()) + penalty,
            static_cast<double>(correct) / static_cast<double>(set.size())};
}

Prediction predict(Model& model, const FeatureMap& fm) {
    const FeatureMap standardized = model.has_stats ? standardize(fm, model.stats) : fm;
    const std::size_t s = FeatureMap::kSize;
    Tensor batch({1, s, s, 1});
    std::memcpy(batch.data.data(), standardized.values.data(), s * s * sizeof(double));

    const Tensor logits = forward(model, batch, Mode::infer);
    const std::size_t K = model.config.classes;

    Prediction pred;
    const double mx = *std::max_element(logits.data.begin(), logits.data.end());
    double denom = 0.0;
    std::vector<double> p(K);
    for (std::size_t k = 0; k < K; ++k) {
        p[k] = std::exp(logits.data[k] - mx);
        denom += p[k];
    }
    for (std::size_t k = 0; k < K && k < pred.probabilities.size(); ++k)
        pred.probabilities[k] = p[k] / denom;

    std::size_t arg = 0;
    for (std::size_t k = 1; k < K; ++k)
        if (p[k] > p[arg]) arg = k;  // strict: ties keep the smallest index
    pred.digit = static_cast<int>(arg);
    return pred;
}

namespace {

void append_u32(std::string& buf, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void append_u64(std::string& buf, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint32_t read_u32(const std::string& buf, std::size_t at) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
        v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[at + i])) << (8 * i);
    return v;
}

std::uint64_t read_u64(const std::string& buf, std::size_t at) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[at + i])) << (8 * i);
    return v;
}

void append_blob(std::string& buf, const std::vector<double>& values) {
    for (double x : values) {
        const float f = static_cast<float>(x);
        std::uint32_t bits;
        std::memcpy(&bits, &f, 4);
        append_u32(buf, bits);
    }
}

void read_blob(const std::string& buf, std::size_t& at, std::vector<double>& out) {
    if (at + 4 * out.size() > buf.size())
        raise(Errc::malformed_header, "checkpoint parameter region too short");
    for (double& x : out) {
        const std::uint32_t bits = read_u32(buf, at);
        at += 4;
        float f;
        std::memcpy(&f, &bits, 4);
        x = static_cast<double>(f);
    }
}

// Persistent blob order: per stage kernels, bias, gamma, beta, running mean,
// running variance; then both dense layers' weights and biases.
template <typename Fn>
void for_each_blob(Model& model, Fn&& fn) {
    for (auto& s : model.stages) {
        fn(s.conv.kernels.data);
        fn(s.conv.bias.data);
        fn(s.bn.gamma);
        fn(s.bn.beta);
        fn(s.bn.running_mean);
        fn(s.bn.running_var);
    }
    fn(model.dense1.weights.data);
    fn(model.dense1.bias.data);
    fn(model.dense2.weights.data);
    fn(model.dense2.bias.data);
}

}  // namespace

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
    json meta{{"model_config", to_json(model.config)},
              {"feature_pipeline", to_json(model.features)},
              {"seed", model.seed},
              {"history", to_json(model.history)},
              {"has_stats", model.has_stats}};
    if (model.has_stats)
        meta["stats"] = json{{"mean", model.stats.mean}, {"stddev", model.stats.stddev}};
    const std::string meta_str = meta.dump();

    std::string buf;
    buf.append(kCheckpointMagic, 4);
    append_u32(buf, kCheckpointVersion);
    append_u64(buf, meta_str.size());
    buf += meta_str;
    for_each_blob(const_cast<Model&>(model),
                  [&buf](const std::vector<double>& v) { append_blob(buf, v); });
    append_u32(buf, crc32(buf.data(), buf.size()));

    std::ofstream out(path, std::ios::binary);
    if (!out) raise(Errc::io_error, "cannot open checkpoint for writing: " + path.string());
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) raise(Errc::io_error, "short write on checkpoint: " + path.string());
}

Model load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(Errc::file_not_found, "cannot open checkpoint: " + path.string());
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    if (buf.size() < 8) raise(Errc::checksum_mismatch, "checkpoint truncated");
    if (std::memcmp(buf.data(), kCheckpointMagic, 4) != 0)
        raise(Errc::malformed_header, "not a checkpoint file: " + path.string());
    if (read_u32(buf, 4) != kCheckpointVersion)
        raise(Errc::version_mismatch, "unsupported checkpoint version");
    if (buf.size() < 20) raise(Errc::checksum_mismatch, "checkpoint truncated");

    const std::uint32_t stored_crc = read_u32(buf, buf.size() - 4);
    if (crc32(buf.data(), buf.size() - 4) != stored_crc)
        raise(Errc::checksum_mismatch, "checkpoint checksum mismatch");

    const std::uint64_t meta_len = read_u64(buf, 8);
    if (16 + meta_len > buf.size() - 4)
        raise(Errc::malformed_header, "checkpoint metadata overruns the file");

    json meta;
    try {
        meta = json::parse(buf.substr(16, meta_len));
    } catch (const json::exception&) {
        raise(Errc::malformed_header, "checkpoint metadata is not valid JSON");
    }

    Model model;
    try {
        model.config = model_config_from_json(meta.at("model_config"));
        model.features = feature_pipeline_from_json(meta.at("feature_pipeline"));
        model.seed = meta.at("seed").get<std::uint64_t>();
        model.history = train_history_from_json(meta.at("history"));
        model.has_stats = meta.at("has_stats").get<bool>();
        if (model.has_stats) {
            const auto& s = meta.at("stats");
            const auto mean = s.at("mean").get<std::vector<double>>();
            const auto stddev = s.at("stddev").get<std::vector<double>>();
            if (mean.size() != FeatureMap::kSize || stddev.size() != FeatureMap::kSize)
                raise(Errc::malformed_header, "checkpoint standardization stats malformed");
            std::copy(mean.begin(), mean.end(), model.stats.mean.begin());
            std::copy(stddev.begin(), stddev.end(), model.stats.stddev.begin());
        }
    } catch (const json::exception&) {
        raise(Errc::malformed_header, "checkpoint metadata is missing required fields");
    }
    model.config.validate();

    // Allocate the layer stack, then fill it from the blob region.
    std::size_t in_ch = 1;
    for (std::size_t f : model.config.conv_filters) {
        ConvStage stage;
        stage.conv.kernels = Tensor({f, in_ch, model.config.kernel, model.config.kernel});
        stage.conv.bias = Tensor({f});
        stage.bn = BatchNormState(f);
        model.stages.push_back(std::move(stage));
        in_ch = f;
    }
    model.stages.front().conv.l2_factor = model.config.l2_factor;
    const std::size_t flat = model.config.flat_dim();
    model.dense1.weights = Tensor({flat, model.config.dense_units});
    model.dense1.bias = Tensor({model.config.dense_units});
    model.dense2.weights = Tensor({model.config.dense_units, model.config.classes});
    model.dense2.bias = Tensor({model.config.classes});

    std::size_t at = 16 + meta_len;
    for_each_blob(model, [&buf, &at](std::vector<double>& v) { read_blob(buf, at, v); });
    if (at != buf.size() - 4)
        raise(Errc::malformed_header, "checkpoint parameter region has trailing bytes");
    return model;
}

}  // namespace digitrec

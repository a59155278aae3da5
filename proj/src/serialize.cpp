#include "digitrec/serialize.hpp"

#include <algorithm>
#include <string>
#include <vector>

namespace digitrec {

using nlohmann::json;

namespace {

// Overwrites `field` only when `key` is present, converting through the
// field's own type so json type errors surface as json::exception.
template <typename T>
bool take(const json& j, const char* key, T& field) {
    const auto it = j.find(key);
    if (it == j.end()) return false;
    field = it->get<T>();
    return true;
}

const std::vector<std::string>& known_flat_keys() {
    static const std::vector<std::string> keys = {
        // feature pipeline
        "sample_rate", "denoise", "noise_gate", "noise_nfft", "trim", "trim_threshold_db",
        "trim_frame_ms",
        // mfcc
        "frame_len_ms", "hop_ms", "n_fft", "n_mels", "n_coeffs", "fmin", "fmax", "pre_emphasis",
        "delta_window", "target_frames", "log_floor",
        // model
        "conv_filters", "kernel", "pool", "dense_units", "dropout_rate", "l2_factor", "classes",
        "input_size",
        // training
        "epochs", "batch_size", "lr", "early_stop_patience", "seed",
        // augmentation
        "shift_range_ms", "speed_factors", "snr_db_choices", "gain_db_low", "gain_db_high",
        "multiplier",
        // splitting
        "train_ratio", "val_ratio", "test_ratio"};
    return keys;
}

}  // namespace

json to_json(const MfccConfig& c) {
    return json{{"frame_len_ms", c.frame_len_ms},
                {"hop_ms", c.hop_ms},
                {"n_fft", c.n_fft},
                {"n_mels", c.n_mels},
                {"n_coeffs", c.n_coeffs},
                {"fmin", c.fmin},
                {"fmax", c.fmax},
                {"pre_emphasis", c.pre_emphasis},
                {"delta_window", c.delta_window},
                {"target_frames", c.target_frames},
                {"log_floor", c.log_floor}};
}

MfccConfig mfcc_config_from_json(const json& j) {
    MfccConfig c;
    take(j, "frame_len_ms", c.frame_len_ms);
    take(j, "hop_ms", c.hop_ms);
    take(j, "n_fft", c.n_fft);
    take(j, "n_mels", c.n_mels);
    take(j, "n_coeffs", c.n_coeffs);
    take(j, "fmin", c.fmin);
    take(j, "fmax", c.fmax);
    take(j, "pre_emphasis", c.pre_emphasis);
    take(j, "delta_window", c.delta_window);
    take(j, "target_frames", c.target_frames);
    take(j, "log_floor", c.log_floor);
    return c;
}

json to_json(const FeaturePipeline& p) {
    return json{{"sample_rate", p.sample_rate},
                {"denoise", p.denoise},
                {"noise_gate", p.noise_gate},
                {"noise_nfft", p.noise_nfft},
                {"trim", p.trim},
                {"trim_threshold_db", p.trim_threshold_db},
                {"trim_frame_ms", p.trim_frame_ms},
                {"mfcc", to_json(p.mfcc)}};
}

FeaturePipeline feature_pipeline_from_json(const json& j) {
    FeaturePipeline p;
    take(j, "sample_rate", p.sample_rate);
    take(j, "denoise", p.denoise);
    take(j, "noise_gate", p.noise_gate);
    take(j, "noise_nfft", p.noise_nfft);
    take(j, "trim", p.trim);
    take(j, "trim_threshold_db", p.trim_threshold_db);
    take(j, "trim_frame_ms", p.trim_frame_ms);
    if (j.contains("mfcc")) p.mfcc = mfcc_config_from_json(j.at("mfcc"));
    return p;
}

json to_json(const ModelConfig& c) {
    return json{{"conv_filters", c.conv_filters}, {"kernel", c.kernel},
                {"pool", c.pool},                 {"dense_units", c.dense_units},
                {"dropout_rate", c.dropout_rate}, {"l2_factor", c.l2_factor},
                {"classes", c.classes},           {"input_size", c.input_size}};
}

ModelConfig model_config_from_json(const json& j) {
    ModelConfig c;
    take(j, "conv_filters", c.conv_filters);
    take(j, "kernel", c.kernel);
    take(j, "pool", c.pool);
    take(j, "dense_units", c.dense_units);
    take(j, "dropout_rate", c.dropout_rate);
    take(j, "l2_factor", c.l2_factor);
    take(j, "classes", c.classes);
    take(j, "input_size", c.input_size);
    return c;
}

json to_json(const TrainConfig& c) {
    json j{{"epochs", c.epochs}, {"batch_size", c.batch_size}, {"lr", c.lr}, {"seed", c.seed}};
    j["early_stop_patience"] =
        c.early_stop_patience ? json(*c.early_stop_patience) : json(nullptr);
    return j;
}

TrainConfig train_config_from_json(const json& j) {
    TrainConfig c;
    take(j, "epochs", c.epochs);
    take(j, "batch_size", c.batch_size);
    take(j, "lr", c.lr);
    take(j, "seed", c.seed);
    if (j.contains("early_stop_patience") && !j.at("early_stop_patience").is_null())
        c.early_stop_patience = j.at("early_stop_patience").get<std::size_t>();
    return c;
}

json to_json(const AugmentConfig& c) {
    return json{{"shift_range_ms", c.shift_range_ms},
                {"speed_factors", c.speed_factors},
                {"snr_db_choices", c.snr_db_choices},
                {"gain_db_low", c.gain_db_range.first},
                {"gain_db_high", c.gain_db_range.second},
                {"multiplier", c.multiplier},
                {"seed", c.seed}};
}

AugmentConfig augment_config_from_json(const json& j) {
    AugmentConfig c;
    take(j, "shift_range_ms", c.shift_range_ms);
    take(j, "speed_factors", c.speed_factors);
    take(j, "snr_db_choices", c.snr_db_choices);
    take(j, "gain_db_low", c.gain_db_range.first);
    take(j, "gain_db_high", c.gain_db_range.second);
    take(j, "multiplier", c.multiplier);
    take(j, "seed", c.seed);
    return c;
}

json to_json(const TrainHistory& h) {
    return json{{"train_loss", h.train_loss},
                {"train_acc", h.train_acc},
                {"val_loss", h.val_loss},
                {"val_acc", h.val_acc}};
}

TrainHistory train_history_from_json(const json& j) {
    TrainHistory h;
    take(j, "train_loss", h.train_loss);
    take(j, "train_acc", h.train_acc);
    take(j, "val_loss", h.val_loss);
    take(j, "val_acc", h.val_acc);
    return h;
}

void apply_config(const json& j, FeaturePipeline& p) {
    take(j, "sample_rate", p.sample_rate);
    take(j, "denoise", p.denoise);
    take(j, "noise_gate", p.noise_gate);
    take(j, "noise_nfft", p.noise_nfft);
    take(j, "trim", p.trim);
    take(j, "trim_threshold_db", p.trim_threshold_db);
    take(j, "trim_frame_ms", p.trim_frame_ms);
    take(j, "frame_len_ms", p.mfcc.frame_len_ms);
    take(j, "hop_ms", p.mfcc.hop_ms);
    take(j, "n_fft", p.mfcc.n_fft);
    take(j, "n_mels", p.mfcc.n_mels);
    take(j, "n_coeffs", p.mfcc.n_coeffs);
    take(j, "fmin", p.mfcc.fmin);
    take(j, "fmax", p.mfcc.fmax);
    take(j, "pre_emphasis", p.mfcc.pre_emphasis);
    take(j, "delta_window", p.mfcc.delta_window);
    take(j, "target_frames", p.mfcc.target_frames);
    take(j, "log_floor", p.mfcc.log_floor);
}

void apply_config(const json& j, ModelConfig& c) {
    take(j, "conv_filters", c.conv_filters);
    take(j, "kernel", c.kernel);
    take(j, "pool", c.pool);
    take(j, "dense_units", c.dense_units);
    take(j, "dropout_rate", c.dropout_rate);
    take(j, "l2_factor", c.l2_factor);
    take(j, "classes", c.classes);
    take(j, "input_size", c.input_size);
}

void apply_config(const json& j, TrainConfig& c) {
    take(j, "epochs", c.epochs);
    take(j, "batch_size", c.batch_size);
    take(j, "lr", c.lr);
    take(j, "seed", c.seed);
    if (j.contains("early_stop_patience")) {
        const auto& v = j.at("early_stop_patience");
        if (v.is_null())
            c.early_stop_patience.reset();
        else
            c.early_stop_patience = v.get<std::size_t>();
    }
}

void apply_config(const json& j, AugmentConfig& c) {
    take(j, "shift_range_ms", c.shift_range_ms);
    take(j, "speed_factors", c.speed_factors);
    take(j, "snr_db_choices", c.snr_db_choices);
    take(j, "gain_db_low", c.gain_db_range.first);
    take(j, "gain_db_high", c.gain_db_range.second);
    take(j, "multiplier", c.multiplier);
    take(j, "seed", c.seed);
}

std::vector<std::string> unrecognized_keys(const json& j) {
    std::vector<std::string> unknown;
    const auto& known = known_flat_keys();
    for (auto it = j.begin(); it != j.end(); ++it)
        if (std::find(known.begin(), known.end(), it.key()) == known.end())
            unknown.push_back(it.key());
    return unknown;
}

}  // namespace digitrec

#pragma once

#include "digitrec/augment.hpp"
#include "digitrec/mfcc.hpp"
#include "digitrec/model.hpp"

#include "json.hpp"

namespace digitrec {

// Full round-trip serialization (every field written, every field read).
nlohmann::json to_json(const MfccConfig& c);
nlohmann::json to_json(const FeaturePipeline& p);
nlohmann::json to_json(const ModelConfig& c);
nlohmann::json to_json(const TrainConfig& c);
nlohmann::json to_json(const AugmentConfig& c);
nlohmann::json to_json(const TrainHistory& h);

MfccConfig mfcc_config_from_json(const nlohmann::json& j);
FeaturePipeline feature_pipeline_from_json(const nlohmann::json& j);
ModelConfig model_config_from_json(const nlohmann::json& j);
TrainConfig train_config_from_json(const nlohmann::json& j);
AugmentConfig augment_config_from_json(const nlohmann::json& j);
TrainHistory train_history_from_json(const nlohmann::json& j);

// Flat-config overrides: each applier copies only the keys it recognizes,
// leaving the rest of the struct untouched, so one flat file can configure
// several stages at once. Unknown keys are collected by unrecognized_keys.
void apply_config(const nlohmann::json& j, FeaturePipeline& p);  // incl. mfcc keys
void apply_config(const nlohmann::json& j, ModelConfig& c);
void apply_config(const nlohmann::json& j, TrainConfig& c);
void apply_config(const nlohmann::json& j, AugmentConfig& c);

// Keys in `j` that no applier recognizes (typo guard for config files).
std::vector<std::string> unrecognized_keys(const nlohmann::json& j);

}  // namespace digitrec

#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "timing/data/dataset.hpp"

namespace timing::nets {

// The ten stable model identifiers accepted everywhere a model is named.
const std::vector<std::string>& model_names();
bool is_baseline(const std::string& name);

// Everything needed to rebuild a model with the same shapes. Serialized into
// checkpoints so evaluation can reconstruct the exact architecture.
struct ModelConfig {
    std::string variant = "timing-matters";
    data::Schema schema = data::Schema::kAn;
    int num_devices = 0;
    int num_controls = 0;
    int bins = 96;
    int embed_dim = 50;            // d: width of every per-field embedding
    int actions_per_session = 10;  // n: inputs are the first n-1 actions
    int heads = 2;
    int layers = 2;
    int ff_width = 200;
    double leaky_slope = 0.01;
    bool positional_before = false;  // add P before the sequence transformer
    bool regression = false;         // emit one scalar instead of bin logits

    int steps() const { return actions_per_session - 1; }
    int output_width() const { return regression ? 1 : bins; }

    nlohmann::ordered_json to_json() const;
    static ModelConfig from_json(const nlohmann::json& j);
};

// Throws with a field-naming message if any entry is unusable.
void validate(const ModelConfig& config);

// One forward batch: the first n-1 actions of B sessions, flattened
// session-major, plus per-session targets derived from the final action.
struct FeatureBatch {
    data::Schema schema = data::Schema::kAn;
    int batch = 0;
    int steps = 0;
    std::vector<data::ActionRecord> records;  // batch*steps rows
    std::vector<double> diffs;                // batch*steps gaps, leading zero per session
    std::vector<int> target_bins;             // batch labels
    std::vector<double> target_seconds;       // batch target times in seconds
};

FeatureBatch build_feature_batch(const std::vector<const data::Session*>& sessions,
                                 const data::BinningScheme& scheme);
FeatureBatch build_feature_batch(const std::vector<data::Session>& sessions,
                                 const std::vector<std::size_t>& picks,
                                 const data::BinningScheme& scheme);

}  // namespace timing::nets

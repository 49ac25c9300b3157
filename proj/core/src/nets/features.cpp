#include "timing/nets/features.hpp"

#include <algorithm>
#include <stdexcept>

namespace timing::nets {

const std::vector<std::string>& model_names() {
    static const std::vector<std::string> names{
        "timing-matters", "minus-rbf",  "minus-time-encoder", "minus-sequence-encoder",
        "mlp",            "mlp-2step",  "lstm",               "mlp-lstm",
        "lstm-2step",     "transformer"};
    return names;
}

bool is_baseline(const std::string& name) {
    static const std::vector<std::string> baselines{"mlp",      "mlp-2step",  "lstm",
                                                    "mlp-lstm", "lstm-2step", "transformer"};
    return std::find(baselines.begin(), baselines.end(), name) != baselines.end();
}

nlohmann::ordered_json ModelConfig::to_json() const {
    nlohmann::ordered_json j;
    j["variant"] = variant;
    j["schema"] = data::schema_name(schema);
    j["num_devices"] = num_devices;
    j["num_controls"] = num_controls;
    j["bins"] = bins;
    j["embed_dim"] = embed_dim;
    j["actions_per_session"] = actions_per_session;
    j["heads"] = heads;
    j["layers"] = layers;
    j["ff_width"] = ff_width;
    j["leaky_slope"] = leaky_slope;
    j["positional_before"] = positional_before;
    j["regression"] = regression;
    return j;
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.variant = j.at("variant").get<std::string>();
    c.schema = data::schema_from_name(j.at("schema").get<std::string>());
    c.num_devices = j.at("num_devices").get<int>();
    c.num_controls = j.at("num_controls").get<int>();
    c.bins = j.at("bins").get<int>();
    c.embed_dim = j.at("embed_dim").get<int>();
    c.actions_per_session = j.at("actions_per_session").get<int>();
    c.heads = j.at("heads").get<int>();
    c.layers = j.at("layers").get<int>();
    c.ff_width = j.at("ff_width").get<int>();
    c.leaky_slope = j.at("leaky_slope").get<double>();
    c.positional_before = j.at("positional_before").get<bool>();
    c.regression = j.at("regression").get<bool>();
    return c;
}

void validate(const ModelConfig& config) {
    const auto& names = model_names();
    if (std::find(names.begin(), names.end(), config.variant) == names.end()) {
        std::string known;
        for (const auto& n : names) known += (known.empty() ? "" : ", ") + n;
        throw std::invalid_argument("model config: unknown variant '" + config.variant +
                                    "' (known: " + known + ")");
    }
    if (config.num_devices < 1 || config.num_controls < 1)
        throw std::invalid_argument("model config: vocabulary sizes must be positive");
    data::BinningScheme check(config.bins);  // throws on unsupported counts
    if (config.schema == data::Schema::kSmartSense && config.bins != data::kSmartSenseRanges)
        throw std::invalid_argument(
            "model config: 3-hour-range data supports only 8 bins, got " +
            std::to_string(config.bins));
    if (config.embed_dim < 2)
        throw std::invalid_argument("model config: embed_dim must be at least 2");
    if (config.actions_per_session < 2)
        throw std::invalid_argument("model config: actions_per_session must be at least 2");
    if (config.heads < 1 || config.layers < 1 || config.ff_width < 1)
        throw std::invalid_argument("model config: transformer sizes must be positive");
    if (config.embed_dim % config.heads != 0)
        throw std::invalid_argument("model config: embed_dim " + std::to_string(config.embed_dim) +
                                    " not divisible by " + std::to_string(config.heads) +
                                    " heads");
    if (config.leaky_slope < 0.0 || config.leaky_slope >= 1.0)
        throw std::invalid_argument("model config: leaky slope outside [0, 1)");
}

FeatureBatch build_feature_batch(const std::vector<const data::Session*>& sessions,
                                 const data::BinningScheme& scheme) {
    if (sessions.empty()) throw std::invalid_argument("feature batch: no sessions");
    FeatureBatch out;
    out.schema = sessions.front()->schema;
    out.batch = static_cast<int>(sessions.size());
    out.steps = static_cast<int>(sessions.front()->actions.size()) - 1;
    if (out.steps < 1) throw std::invalid_argument("feature batch: sessions need >= 2 actions");
    if (out.schema == data::Schema::kSmartSense && scheme.num_bins != data::kSmartSenseRanges)
        throw std::invalid_argument("feature batch: 3-hour-range data supports only 8 bins");

    out.records.reserve(static_cast<std::size_t>(out.batch) * out.steps);
    out.diffs.reserve(out.records.capacity());
    out.target_bins.reserve(static_cast<std::size_t>(out.batch));
    out.target_seconds.reserve(static_cast<std::size_t>(out.batch));

    for (const data::Session* s : sessions) {
        if (s->schema != out.schema)
            throw std::invalid_argument("feature batch: mixed schemas in one batch");
        if (static_cast<int>(s->actions.size()) != out.steps + 1)
            throw std::invalid_argument("feature batch: mixed session lengths in one batch");
        for (int t = 0; t < out.steps; ++t)
            out.records.push_back(s->actions[static_cast<std::size_t>(t)]);
        const auto gaps = data::time_diff_feature(*s);
        out.diffs.insert(out.diffs.end(), gaps.begin(), gaps.end());

        const data::ActionRecord& target = s->actions.back();
        if (out.schema == data::Schema::kAn) {
            out.target_bins.push_back(data::time_to_bin(target.time, scheme));
            out.target_seconds.push_back(static_cast<double>(target.time));
        } else {
            out.target_bins.push_back(target.time);
            out.target_seconds.push_back(
                data::bin_to_representative_time(target.time, data::BinningScheme(8)));
        }
    }
    return out;
}

FeatureBatch build_feature_batch(const std::vector<data::Session>& sessions,
                                 const std::vector<std::size_t>& picks,
                                 const data::BinningScheme& scheme) {
    std::vector<const data::Session*> view;
    view.reserve(picks.size());
    for (std::size_t i : picks) {
        if (i >= sessions.size()) throw std::out_of_range("feature batch: session index");
        view.push_back(&sessions[i]);
    }
    return build_feature_batch(view, scheme);
}

}  // namespace timing::nets

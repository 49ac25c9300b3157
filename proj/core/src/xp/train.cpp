#include "timing/xp/train.hpp"

#include <stdexcept>
#include <utility>

#include "timing/diff/adam.hpp"
#include "timing/util/hash.hpp"
#include "timing/util/rng.hpp"

namespace timing::xp {

using diff::Array;

void validate(const TrainConfig& config) {
    if (config.batch_size < 1) throw std::invalid_argument("train config: batch size must be positive");
    if (config.learning_rate <= 0.0)
        throw std::invalid_argument("train config: learning rate must be positive");
    if (config.l2reg < 0.0) throw std::invalid_argument("train config: l2reg must be non-negative");
    if (config.max_epochs < 1) throw std::invalid_argument("train config: max epochs must be positive");
    if (config.patience < 1) throw std::invalid_argument("train config: patience must be positive");
}

namespace {

std::vector<std::vector<double>> snapshot_values(const diff::ParamSet& params) {
    std::vector<std::vector<double>> values;
    values.reserve(params.size());
    for (const auto& p : params.all()) values.push_back(p.array.value());
    return values;
}

void restore_values(diff::ParamSet& params, const std::vector<std::vector<double>>& values) {
    for (std::size_t i = 0; i < values.size(); ++i)
        params.all()[i].array.mutable_value() = values[i];
}

}  // namespace

TrainResult train(nets::Model& model, const data::DatasetSplit& split, const TrainConfig& config) {
    validate(config);
    if (split.train.empty() || split.val.empty())
        throw std::invalid_argument("train: empty split partition");

    const nets::ModelConfig& mc = model.config();
    const data::BinningScheme scheme(mc.bins);
    const int val_bins = mc.bins;

    diff::AdamConfig adam_config;
    adam_config.lr = config.learning_rate;
    adam_config.weight_decay = config.l2reg;
    diff::Adam adam(adam_config);

    util::Rng shuffle_rng(config.seed);
    std::vector<std::size_t> order(split.train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    TrainResult result;
    std::vector<std::vector<double>> best_values = snapshot_values(model.params());
    int epochs_since_best = 0;

    for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[shuffle_rng.below(i)]);

        double loss_total = 0.0;
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t stop =
                std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
            const std::vector<std::size_t> picks(order.begin() + static_cast<std::ptrdiff_t>(start),
                                                 order.begin() + static_cast<std::ptrdiff_t>(stop));
            nets::FeatureBatch batch = nets::build_feature_batch(split.train, picks, scheme);

            Array out = model.forward(batch, /*training=*/true);
            Array loss = mc.regression ? squared_error_day_fraction(out, batch.target_seconds)
                                       : cross_entropy(out, batch.target_bins);
            loss_total += loss.item() * static_cast<double>(picks.size());
            diff::backward(loss);
            adam.step(model.params());
        }

        MetricReport val = evaluate(model, split.val, {val_bins}, config.batch_size);
        EpochStats stats;
        stats.epoch = epoch;
        stats.train_loss = loss_total / static_cast<double>(order.size());
        stats.val_precision = val.precision.at(val_bins);

        if (stats.val_precision > result.best_val_precision || result.best_epoch < 0) {
            result.best_val_precision = stats.val_precision;
            result.best_epoch = epoch;
            best_values = snapshot_values(model.params());
            epochs_since_best = 0;
            stats.is_best = true;
        } else {
            ++epochs_since_best;
        }
        result.history.push_back(stats);
        if (epochs_since_best >= config.patience) break;
    }

    restore_values(model.params(), best_values);
    result.test = evaluate(model, split.test(), default_report_bins(mc.bins), config.batch_size);
    return result;
}

std::uint64_t dataset_fingerprint(const data::Dataset& dataset) {
    std::uint64_t h = util::fnv1a64(data::schema_name(dataset.schema));
    const auto mix = [&h](int v) { h = util::fnv1a64(&v, sizeof(v), h); };
    mix(dataset.num_devices);
    mix(dataset.num_controls);
    mix(dataset.num_users);
    mix(dataset.num_device_controls);
    mix(dataset.actions_per_session);
    mix(static_cast<int>(dataset.sessions.size()));
    for (const auto& session : dataset.sessions) {
        mix(session.user);
        for (const auto& a : session.actions) {
            mix(a.day);
            mix(a.time);
            mix(a.device);
            mix(a.control);
            mix(a.user);
            mix(a.device_control);
        }
    }
    return h;
}

}  // namespace timing::xp

#pragma once

#include <cstdint>
#include <vector>

#include "timing/data/split.hpp"
#include "timing/xp/metrics.hpp"

namespace timing::xp {

struct TrainConfig {
    int batch_size = 64;
    double learning_rate = 1e-4;
    double l2reg = 1e-4;
    int max_epochs = 500;
    int patience = 20;  // epochs without a new validation best before stopping
    std::uint64_t seed = 7;
};

void validate(const TrainConfig& config);

struct EpochStats {
    int epoch = 0;
    double train_loss = 0.0;
    double val_precision = 0.0;
    bool is_best = false;
};

struct TrainResult {
    std::vector<EpochStats> history;
    int best_epoch = -1;
    double best_val_precision = 0.0;
    MetricReport test;  // metrics of the restored best state, evaluated once
};

// Shuffled minibatch epochs with validation-selected early stopping: the
// parameter state with the strictly best validation precision is kept and
// restored before the single test evaluation. Touches split.test() exactly
// once, at the very end.
TrainResult train(nets::Model& model, const data::DatasetSplit& split, const TrainConfig& config);

// Content fingerprint over schema, vocabulary sizes, and every action field;
// stable across runs and platforms for identical datasets.
std::uint64_t dataset_fingerprint(const data::Dataset& dataset);

}  // namespace timing::xp

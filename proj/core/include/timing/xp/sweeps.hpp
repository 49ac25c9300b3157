#pragma once

#include "timing/util/table.hpp"
#include "timing/xp/train.hpp"

namespace timing::xp {

// Shared setup for one sweep: the per-trial training budget, the base model
// shape (variant and widths; per-trial fields are overridden inside each
// sweep), the split seed, and the worker cap for parallel trials.
struct SweepConfig {
    TrainConfig train;
    nets::ModelConfig model;
    std::uint64_t split_seed = 1;
    int jobs = 1;
};

// Reconstructs each user's action stream from the dataset's stride-1 session
// windows and recuts it into sessions of the requested length. Throws if the
// windows do not overlap like stride-1 cuts or if no stream is long enough.
std::vector<data::Session> rewindow(const data::Dataset& dataset, int actions_per_session);

// One retrained trial per (window, layer count) pair, in grid order.
// Columns: window, layers, sessions, precision at the model's bin count,
// precision at 8 bins.
util::Table sweep_context(const data::Dataset& dataset, const SweepConfig& config,
                          const std::vector<int>& windows = {5, 10, 20, 50, 100, 200},
                          const std::vector<int>& layer_counts = {2, 4});

// One retrained trial per bin count. Columns: bins, precision, rmse.
util::Table sweep_bins(const data::Dataset& dataset, const SweepConfig& config,
                       const std::vector<int>& bin_counts = {8, 12, 24, 48, 96, 288});

// Classification head and regression head under identical budgets.
// Columns: head, precision at the model's bins, precision at 8, rmse.
util::Table compare_regression_classification(const data::Dataset& dataset,
                                              const SweepConfig& config);

// Full model plus the three single-component removals.
// Columns: model, precision at the model's bins, precision at 8.
util::Table run_ablations(const data::Dataset& dataset, const SweepConfig& config);

}  // namespace timing::xp

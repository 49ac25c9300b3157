#pragma once

#include <map>
#include <string>
#include <vector>

#include "timing/nets/model.hpp"

namespace timing::xp {

// Mean negative log-probability of the true class. labels must hold one
// entry per logit row, each inside [0, classes).
diff::Array cross_entropy(const diff::Array& logits, const std::vector<int>& labels);

// Squared error against day-fraction targets: regression outputs live on the
// unit scale so optimizer steps stay commensurate with the classifier's.
diff::Array squared_error_day_fraction(const diff::Array& outputs,
                                       const std::vector<double>& target_seconds);

// Row argmax with the lowest index winning ties.
std::vector<int> predicted_bins(const diff::Array& logits);

// Exact-match fraction after mapping both sides from the prediction scheme
// onto the reporting scheme. Equal schemes compare bins directly.
double precision_at_k(const std::vector<int>& predicted, const std::vector<int>& truth,
                      const data::BinningScheme& from, const data::BinningScheme& to);

// Root mean squared error in seconds. The default distance is linear;
// circular measures around the day boundary instead.
double rmse_seconds(const std::vector<double>& predicted, const std::vector<double>& truth,
                    bool circular = false);

struct MetricReport {
    std::map<int, double> precision;  // reporting bin count -> fraction
    double rmse = 0.0;                // seconds
    int num_examples = 0;
    std::string model;
    std::string dataset;

    std::string precision_str() const;  // "p96=0.38 p8=0.80" style summary
};

// Raw model outputs over a session list, batched for evaluation mode.
// Classification rows hold bin predictions in the model's scheme; regression
// rows hold clamped seconds. Used by both evaluate() and the sweep tables.
struct Predictions {
    std::vector<int> bins;              // in the model's scheme
    std::vector<double> seconds;        // representative or clamped times
    std::vector<int> true_bins;
    std::vector<double> true_seconds;
};
Predictions predict(nets::Model& model, const std::vector<data::Session>& sessions,
                    int batch_size = 64);

// Precision at each requested bin count (each must equal or evenly coarsen
// the model's own count for classification heads) plus RMSE over seconds.
MetricReport evaluate(nets::Model& model, const std::vector<data::Session>& sessions,
                      const std::vector<int>& report_bins, int batch_size = 64);

// Reporting grid for a model working at the given granularity: its own bin
// count, plus the 8-bin coarsening whenever the bins nest into it.
std::vector<int> default_report_bins(int bins);

}  // namespace timing::xp

#include "timing/xp/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "timing/util/table.hpp"

namespace timing::xp {

using diff::Array;

Array cross_entropy(const Array& logits, const std::vector<int>& labels) {
    if (logits.ndim() != 2)
        throw std::invalid_argument("cross_entropy: logits must be {batch, classes}");
    const int batch = logits.dim(0);
    const int classes = logits.dim(1);
    if (static_cast<int>(labels.size()) != batch)
        throw std::invalid_argument("cross_entropy: " + std::to_string(labels.size()) +
                                    " labels for " + std::to_string(batch) + " rows");
    for (int label : labels)
        if (label < 0 || label >= classes)
            throw std::out_of_range("cross_entropy: label " + std::to_string(label) +
                                    " outside [0, " + std::to_string(classes) + ")");
    Array picked = diff::gather_cols(diff::log_softmax_last(logits), labels);
    return diff::scale(diff::mean_all(picked), -1.0);
}

Array squared_error_day_fraction(const Array& outputs, const std::vector<double>& target_seconds) {
    if (outputs.ndim() != 2 || outputs.dim(1) != 1)
        throw std::invalid_argument("squared_error: outputs must be {batch, 1}");
    if (static_cast<std::size_t>(outputs.dim(0)) != target_seconds.size())
        throw std::invalid_argument("squared_error: output and target counts differ");
    std::vector<double> fractions(target_seconds.size());
    for (std::size_t i = 0; i < fractions.size(); ++i)
        fractions[i] = target_seconds[i] / data::kSecondsPerDay;
    Array target = Array::from_data({outputs.dim(0), 1}, std::move(fractions));
    Array err = diff::sub(outputs, target);
    return diff::mean_all(diff::mul(err, err));
}

std::vector<int> predicted_bins(const Array& logits) {
    if (logits.ndim() != 2) throw std::invalid_argument("predicted_bins: expected {batch, classes}");
    const int batch = logits.dim(0);
    const int classes = logits.dim(1);
    std::vector<int> bins(static_cast<std::size_t>(batch));
    for (int b = 0; b < batch; ++b) {
        int best = 0;
        for (int k = 1; k < classes; ++k)  // strict comparison: ties keep the lowest bin
            if (logits.value()[static_cast<std::size_t>(b * classes + k)] >
                logits.value()[static_cast<std::size_t>(b * classes + best)])
                best = k;
        bins[static_cast<std::size_t>(b)] = best;
    }
    return bins;
}

double precision_at_k(const std::vector<int>& predicted, const std::vector<int>& truth,
                      const data::BinningScheme& from, const data::BinningScheme& to) {
    if (predicted.size() != truth.size())
        throw std::invalid_argument("precision_at_k: prediction and truth lengths differ");
    if (predicted.empty()) throw std::invalid_argument("precision_at_k: no examples");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i)
        hits += data::coarsen_bin(predicted[i], from, to) == data::coarsen_bin(truth[i], from, to);
    return static_cast<double>(hits) / static_cast<double>(predicted.size());
}

double rmse_seconds(const std::vector<double>& predicted, const std::vector<double>& truth,
                    bool circular) {
    if (predicted.size() != truth.size())
        throw std::invalid_argument("rmse_seconds: prediction and truth lengths differ");
    if (predicted.empty()) throw std::invalid_argument("rmse_seconds: no examples");
    double total = 0.0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        double d = std::fabs(predicted[i] - truth[i]);
        if (circular) d = std::min(d, data::kSecondsPerDay - d);
        total += d * d;
    }
    return std::sqrt(total / static_cast<double>(predicted.size()));
}

std::string MetricReport::precision_str() const {
    std::string out;
    for (auto it = precision.rbegin(); it != precision.rend(); ++it) {
        if (!out.empty()) out += ' ';
        out += "p" + std::to_string(it->first) + "=" + util::Table::fmt(it->second, 4);
    }
    return out;
}

Predictions predict(nets::Model& model, const std::vector<data::Session>& sessions,
                    int batch_size) {
    if (sessions.empty()) throw std::invalid_argument("predict: no sessions");
    if (batch_size < 1) throw std::invalid_argument("predict: batch size must be positive");
    const nets::ModelConfig& config = model.config();
    const data::BinningScheme scheme(config.bins);

    Predictions out;
    out.bins.reserve(sessions.size());
    out.seconds.reserve(sessions.size());

    diff::NoGradGuard eval_only;
    for (std::size_t start = 0; start < sessions.size(); start += static_cast<std::size_t>(batch_size)) {
        const std::size_t stop = std::min(sessions.size(), start + static_cast<std::size_t>(batch_size));
        std::vector<const data::Session*> view;
        view.reserve(stop - start);
        for (std::size_t i = start; i < stop; ++i) view.push_back(&sessions[i]);
        nets::FeatureBatch batch = nets::build_feature_batch(view, scheme);

        Array y = model.forward(batch, /*training=*/false);
        if (config.regression) {
            for (int b = 0; b < batch.batch; ++b) {
                const double raw = y.value()[static_cast<std::size_t>(b)] * data::kSecondsPerDay;
                const double sec = std::clamp(raw, 0.0, static_cast<double>(data::kSecondsPerDay - 1));
                out.seconds.push_back(sec);
                out.bins.push_back(data::time_to_bin(static_cast<int>(sec), scheme));
            }
        } else {
            for (int bin : predicted_bins(y)) {
                out.bins.push_back(bin);
                out.seconds.push_back(data::bin_to_representative_time(bin, scheme));
            }
        }
        out.true_bins.insert(out.true_bins.end(), batch.target_bins.begin(),
                             batch.target_bins.end());
        out.true_seconds.insert(out.true_seconds.end(), batch.target_seconds.begin(),
                                batch.target_seconds.end());
    }
    return out;
}

std::vector<int> default_report_bins(int bins) {
    if (bins != 8 && bins % 8 == 0) return {bins, 8};
    return {bins};
}

MetricReport evaluate(nets::Model& model, const std::vector<data::Session>& sessions,
                      const std::vector<int>& report_bins, int batch_size) {
    const Predictions p = predict(model, sessions, batch_size);
    const data::BinningScheme own(model.config().bins);

    MetricReport report;
    report.model = model.config().variant;
    report.num_examples = static_cast<int>(sessions.size());
    for (int k : report_bins)
        report.precision[k] = precision_at_k(p.bins, p.true_bins, own, data::BinningScheme(k));
    report.rmse = rmse_seconds(p.seconds, p.true_seconds);
    return report;
}

}  // namespace timing::xp

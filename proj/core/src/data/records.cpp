#include "timing/data/records.hpp"

#include <algorithm>
#include <stdexcept>

namespace timing::data {

std::string schema_name(Schema schema) {
    return schema == Schema::kAn ? "an" : "smartsense";
}

Schema schema_from_name(const std::string& name) {
    if (name == "an") return Schema::kAn;
    if (name == "smartsense") return Schema::kSmartSense;
    throw std::invalid_argument("unknown schema '" + name + "' (expected an or smartsense)");
}

std::vector<double> time_diff_feature(const Session& session) {
    if (session.actions.size() < 2)
        throw std::invalid_argument("time_diff_feature: session needs at least two actions");
    const std::size_t inputs = session.actions.size() - 1;
    std::vector<double> diffs(inputs, 0.0);
    for (std::size_t i = 1; i < inputs; ++i) {
        const ActionRecord& prev = session.actions[i - 1];
        const ActionRecord& cur = session.actions[i];
        double gap = 0.0;
        if (session.schema == Schema::kAn) {
            gap = static_cast<double>(cur.day - prev.day) * kSecondsPerDay +
                  static_cast<double>(cur.time - prev.time);
            if (gap < 0.0)
                throw std::invalid_argument("time_diff_feature: actions out of order at position " +
                                            std::to_string(i));
        } else {
            // day-of-week plus 3-hour range index; absolute order is
            // unrecoverable, so take the smallest non-negative gap in range
            // steps around the week
            const int week_ranges = 7 * kSmartSenseRanges;
            const int steps = ((cur.day * kSmartSenseRanges + cur.time) -
                               (prev.day * kSmartSenseRanges + prev.time) + week_ranges) %
                              week_ranges;
            gap = static_cast<double>(steps) * (kSecondsPerDay / kSmartSenseRanges);
        }
        diffs[i] = gap;
    }
    return diffs;
}

const std::vector<int>& BinningScheme::supported() {
    static const std::vector<int> counts{8, 12, 24, 48, 96, 288};
    return counts;
}

BinningScheme::BinningScheme(int bins) : num_bins(bins), bin_width(0) {
    const auto& ok = supported();
    if (std::find(ok.begin(), ok.end(), bins) == ok.end())
        throw std::invalid_argument("BinningScheme: unsupported bin count " + std::to_string(bins));
    bin_width = kSecondsPerDay / bins;
}

int time_to_bin(int time_seconds, const BinningScheme& scheme) {
    if (time_seconds < 0 || time_seconds >= kSecondsPerDay)
        throw std::out_of_range("time_to_bin: time " + std::to_string(time_seconds) +
                                " outside [0, 86400)");
    return time_seconds / scheme.bin_width;
}

double bin_to_representative_time(int bin, const BinningScheme& scheme) {
    if (bin < 0 || bin >= scheme.num_bins)
        throw std::out_of_range("bin_to_representative_time: bin " + std::to_string(bin) +
                                " outside [0, " + std::to_string(scheme.num_bins) + ")");
    return (bin + 0.5) * scheme.bin_width;
}

int coarsen_bin(int bin, const BinningScheme& from, const BinningScheme& to) {
    if (from.num_bins % to.num_bins != 0)
        throw std::invalid_argument("coarsen_bin: " + std::to_string(from.num_bins) +
                                    " bins do not nest into " + std::to_string(to.num_bins));
    if (bin < 0 || bin >= from.num_bins)
        throw std::out_of_range("coarsen_bin: bin " + std::to_string(bin) + " outside source scheme");
    return bin / (from.num_bins / to.num_bins);
}

}  // namespace timing::data

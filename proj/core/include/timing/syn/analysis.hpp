#pragma once

#include <vector>

#include "timing/data/records.hpp"
#include "timing/util/table.hpp"

namespace timing::syn {

// Histogram of gaps between consecutive actions inside sessions.
struct TimeDiffHistogram {
    std::vector<double> edges;    // ascending bucket edges; final bucket is [last, inf)
    std::vector<long long> counts;  // edges.size() buckets
    long long total = 0;

    double max_fraction() const;
    util::Table to_table() const;
};

// Default edges: sub-minute up to overnight-and-beyond.
const std::vector<double>& default_diff_edges();

TimeDiffHistogram analyze_time_diffs(const std::vector<data::Session>& sessions,
                                     const std::vector<double>& edges = default_diff_edges());

// Occurrence counts of the two most frequent devices, broken down by position
// within the session (heatmap-shaped matrix).
struct DeviceFrequencyReport {
    std::vector<int> top_devices;                      // most frequent first
    std::vector<std::vector<long long>> counts;        // [top_device][position]
    long long total_actions = 0;
    double top_share = 0.0;                            // combined share of the top devices

    util::Table to_table() const;
};

DeviceFrequencyReport analyze_device_frequency(const std::vector<data::Session>& sessions,
                                               int top_n = 2);

}  // namespace timing::syn

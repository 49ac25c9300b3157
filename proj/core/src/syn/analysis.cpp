#include "timing/syn/analysis.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>

namespace timing::syn {

const std::vector<double>& default_diff_edges() {
    // seconds: 0, 1 min, 5 min, 15 min, 30 min, 1 h, 2 h, 4 h, 8 h, 1 day
    static const std::vector<double> edges{0, 60, 300, 900, 1800, 3600, 7200, 14400, 28800, 86400};
    return edges;
}

double TimeDiffHistogram::max_fraction() const {
    if (total == 0) return 0.0;
    long long peak = 0;
    for (long long c : counts) peak = std::max(peak, c);
    return static_cast<double>(peak) / static_cast<double>(total);
}

util::Table TimeDiffHistogram::to_table() const {
    util::Table table({"lo_seconds", "hi_seconds", "count", "fraction"});
    for (std::size_t i = 0; i < counts.size(); ++i) {
        const std::string hi = i + 1 < edges.size() ? util::Table::fmt(edges[i + 1], 0) : "inf";
        const double frac = total ? static_cast<double>(counts[i]) / static_cast<double>(total) : 0.0;
        table.add_row({util::Table::fmt(edges[i], 0), hi, util::Table::fmt(counts[i]),
                       util::Table::fmt(frac, 6)});
    }
    return table;
}

TimeDiffHistogram analyze_time_diffs(const std::vector<data::Session>& sessions,
                                     const std::vector<double>& edges) {
    if (edges.empty() || !std::is_sorted(edges.begin(), edges.end()))
        throw std::invalid_argument("analyze_time_diffs: edges must be non-empty and ascending");
    TimeDiffHistogram hist;
    hist.edges = edges;
    hist.counts.assign(edges.size(), 0);
    for (const data::Session& s : sessions) {
        for (std::size_t i = 1; i < s.actions.size(); ++i) {
            const double gap =
                static_cast<double>(s.actions[i].day - s.actions[i - 1].day) * data::kSecondsPerDay +
                static_cast<double>(s.actions[i].time - s.actions[i - 1].time);
            // last bucket catches everything at or above the final edge
            std::size_t bucket = edges.size() - 1;
            for (std::size_t b = 0; b + 1 < edges.size(); ++b) {
                if (gap >= edges[b] && gap < edges[b + 1]) {
                    bucket = b;
                    break;
                }
            }
            if (gap < edges.front()) bucket = 0;  // clamp anything below the first edge
            ++hist.counts[bucket];
            ++hist.total;
        }
    }
    return hist;
}

util::Table DeviceFrequencyReport::to_table() const {
    std::vector<std::string> cols{"device"};
    const std::size_t positions = counts.empty() ? 0 : counts.front().size();
    for (std::size_t p = 0; p < positions; ++p) cols.push_back("pos" + std::to_string(p));
    cols.push_back("total");
    util::Table table(cols);
    for (std::size_t i = 0; i < top_devices.size(); ++i) {
        std::vector<std::string> row{util::Table::fmt(static_cast<long long>(top_devices[i]))};
        long long sum = 0;
        for (long long c : counts[i]) {
            row.push_back(util::Table::fmt(c));
            sum += c;
        }
        row.push_back(util::Table::fmt(sum));
        table.add_row(std::move(row));
    }
    return table;
}

DeviceFrequencyReport analyze_device_frequency(const std::vector<data::Session>& sessions,
                                               int top_n) {
    if (top_n <= 0) throw std::invalid_argument("analyze_device_frequency: top_n must be positive");
    DeviceFrequencyReport report;
    if (sessions.empty()) return report;

    std::map<int, long long> totals;
    std::size_t positions = 0;
    for (const data::Session& s : sessions) {
        positions = std::max(positions, s.actions.size());
        for (const data::ActionRecord& a : s.actions) {
            ++totals[a.device];
            ++report.total_actions;
        }
    }
    std::vector<std::pair<long long, int>> ranked;
    for (const auto& [device, count] : totals) ranked.emplace_back(count, device);
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    ranked.resize(std::min<std::size_t>(ranked.size(), static_cast<std::size_t>(top_n)));

    long long top_total = 0;
    for (const auto& [count, device] : ranked) {
        report.top_devices.push_back(device);
        top_total += count;
    }
    report.top_share = report.total_actions
                           ? static_cast<double>(top_total) / static_cast<double>(report.total_actions)
                           : 0.0;
    report.counts.assign(report.top_devices.size(), std::vector<long long>(positions, 0));
    for (const data::Session& s : sessions)
        for (std::size_t p = 0; p < s.actions.size(); ++p)
            for (std::size_t i = 0; i < report.top_devices.size(); ++i)
                if (s.actions[p].device == report.top_devices[i]) ++report.counts[i][p];
    return report;
}

}  // namespace timing::syn

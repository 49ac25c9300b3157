#pragma once

#include <string>
#include <vector>

namespace timing::data {

enum class Schema { kAn, kSmartSense };

std::string schema_name(Schema schema);
Schema schema_from_name(const std::string& name);

// One logged device action. Field meaning depends on the schema:
//   an:          day = day of year (0..365), time = seconds after midnight,
//                user set, device_control unused (-1)
//   smartsense:  day = day of week (0..6), time = 3-hour range index (0..7),
//                device_control set, user unused (-1)
struct ActionRecord {
    int day = 0;
    int time = 0;
    int device = 0;
    int control = 0;
    int user = -1;
    int device_control = -1;
};

// A fixed-length window of consecutive actions by one user. The first
// actions_per_session - 1 actions are model input; the last one provides the
// target time.
struct Session {
    int user = -1;
    Schema schema = Schema::kAn;
    std::vector<ActionRecord> actions;
};

inline constexpr int kActionsPerSession = 10;
inline constexpr int kSecondsPerDay = 86400;
inline constexpr int kSmartSenseRanges = 8;  // 3-hour ranges per day

// Consecutive time gaps in seconds, one per input action: a leading zero
// followed by the n-2 gaps between inputs. Length = actions - 1 (the target
// action contributes nothing).
std::vector<double> time_diff_feature(const Session& session);

// Uniform partition of the day into k bins.
struct BinningScheme {
    explicit BinningScheme(int num_bins);
    int num_bins;
    int bin_width;  // seconds, 86400 / num_bins

    static const std::vector<int>& supported();
};

int time_to_bin(int time_seconds, const BinningScheme& scheme);
double bin_to_representative_time(int bin, const BinningScheme& scheme);  // bin midpoint
// Maps a fine bin index onto a coarser scheme; from must be divisible by to.
int coarsen_bin(int bin, const BinningScheme& from, const BinningScheme& to);

}  // namespace timing::data

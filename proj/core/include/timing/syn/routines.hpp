#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace timing::syn {

// One recurring habit: a device action anchored at a time of day, jittered,
// fired on masked weekdays with the given probability.
struct RoutineTemplate {
    int device = 0;
    int control = 0;
    int anchor_mean = 0;   // seconds after midnight, [0, 86400)
    int anchor_sigma = 0;  // seconds, > 0
    std::array<bool, 7> day_mask{true, true, true, true, true, true, true};
    double probability = 1.0;
};

// A user's full behavioural profile plus a background rate of unstructured
// actions (uniform over day and vocabulary).
struct RoutineSpec {
    int user = 0;
    std::vector<RoutineTemplate> routines;
    double noise_rate = 0.0;  // expected non-routine actions per day
};

struct GeneratorConfig {
    int num_users = 39;
    int num_devices = 16;
    int num_controls = 121;
    int target_instances = 11665;
    int start_day = 90;   // day-of-year, 0-based: April 1 of a non-leap year
    int end_day = 364;    // inclusive: December 31
    std::uint64_t seed = 7;
};

// The shipped 39-user bank. Procedurally built from fixed internal constants
// (independent of GeneratorConfig::seed), so the file written by
// save_routine_bank is stable. Guarantees every device and control id below
// the config vocabulary appears in some routine.
std::vector<RoutineSpec> default_routine_bank(const GeneratorConfig& config);

void save_routine_bank(const std::vector<RoutineSpec>& bank, const std::string& path);
std::vector<RoutineSpec> load_routine_bank(const std::string& path);

void validate_bank(const std::vector<RoutineSpec>& bank, const GeneratorConfig& config);

}  // namespace timing::syn

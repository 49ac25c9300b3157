#pragma once

#include "timing/data/dataset.hpp"
#include "timing/syn/routines.hpp"

namespace timing::syn {

// Samples per-user event streams from the routine bank, windows each stream
// into overlapping sessions (stride 1), and trims to exactly
// config.target_instances sessions by largest-remainder quotas per user,
// keeping each user's earliest windows. Deterministic in config.seed.
//
// Throws if the sampled streams cannot supply target_instances sessions or
// if the trimmed output fails to touch every device or control id.
data::Dataset generate(const GeneratorConfig& config, const std::vector<RoutineSpec>& bank);

}  // namespace timing::syn

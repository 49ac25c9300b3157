#pragma once

#include <cstdint>
#include <vector>

#include "timing/data/records.hpp"

namespace timing::data {

struct SplitRatios {
    int train = 7;
    int val = 1;
    int test = 2;
};

// Train and validation parts are freely readable; the test part is behind an
// access-counting getter so the training loop can prove it never touched the
// test set before final evaluation.
class DatasetSplit {
public:
    std::vector<Session> train;
    std::vector<Session> val;

    const std::vector<Session>& test() const {
        ++test_accesses_;
        return test_;
    }
    std::size_t test_access_count() const { return test_accesses_; }
    std::vector<Session>& mutable_test() { return test_; }

private:
    std::vector<Session> test_;
    mutable std::size_t test_accesses_ = 0;
};

// Deterministic shuffle by seed, then partition. Train and val sizes round
// down; test takes the remainder, so the three parts always cover the input
// exactly once.
DatasetSplit split_sessions(const std::vector<Session>& sessions, SplitRatios ratios,
                            std::uint64_t seed);

}  // namespace timing::data

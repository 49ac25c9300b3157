#pragma once

#include <cstdint>
#include <unordered_map>
#include <vector>

#include "timing/diff/parameter.hpp"

namespace timing::diff {

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1e-4;  // decoupled, applied directly to the weights
};

// Adam with decoupled weight decay. Every trainable parameter must have a
// gradient when step() runs; a missing gradient means part of the model fell
// out of the loss graph, which is treated as a bug, not silently skipped.
class Adam {
public:
    explicit Adam(AdamConfig config) : config_(config) {}

    const AdamConfig& config() const { return config_; }
    std::uint64_t steps_taken() const { return step_; }

    void step(ParamSet& params);

private:
    struct Moments {
        std::vector<double> m;
        std::vector<double> v;
    };

    AdamConfig config_;
    std::unordered_map<std::string, Moments> state_;
    std::uint64_t step_ = 0;
};

}  // namespace timing::diff

#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "timing/diff/array.hpp"
#include "timing/util/rng.hpp"

namespace timing::diff {

// A named leaf. Non-trainable entries carry persistent state that is saved
// with checkpoints but never touched by the optimizer (e.g. running batch
// statistics).
struct Parameter {
    std::string name;
    Array array;
    bool trainable = true;
};

// Registry of every leaf a model owns, in registration order. Names are
// unique, slash-separated paths without whitespace.
class ParamSet {
public:
    Array add(const std::string& name, Array array, bool trainable = true);

    // Common initializers; all draw from the caller's Rng so model setup is
    // a pure function of the seed.
    Array add_uniform(const std::string& name, Shape shape, util::Rng& rng, double lo, double hi,
                      bool trainable = true);
    Array add_normal(const std::string& name, Shape shape, util::Rng& rng, double stddev,
                     bool trainable = true);
    Array add_zeros(const std::string& name, Shape shape, bool trainable = true);
    Array add_full(const std::string& name, Shape shape, double fill, bool trainable = true);

    bool contains(const std::string& name) const;
    Parameter& at(const std::string& name);
    const Parameter& at(const std::string& name) const;

    std::vector<Parameter>& all() { return params_; }
    const std::vector<Parameter>& all() const { return params_; }
    std::size_t size() const { return params_.size(); }
    std::int64_t trainable_count() const;

    void zero_grads();

private:
    std::vector<Parameter> params_;
    std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace timing::diff

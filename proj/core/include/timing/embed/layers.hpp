#pragma once

#include <optional>
#include <string>
#include <vector>

#include "timing/data/records.hpp"
#include "timing/diff/parameter.hpp"

namespace timing::embed {

// Scalar inputs are squashed into [0, 1) before embedding so the learnable
// frequencies and widths operate on a bounded domain regardless of schema.
double normalize_time(int time, data::Schema schema);
double normalize_date(int day, data::Schema schema);

// Learnable periodic embedding of a scalar. Output element 0 is the linear
// term omega[0] * tau + psi[0]; elements 1..k-1 are sin(omega[i] * tau +
// psi[i]) and therefore bounded in [-1, 1].
class Time2VecLayer {
public:
    Time2VecLayer(diff::ParamSet& params, const std::string& prefix, int k, util::Rng& rng);

    // tau: 1-D batch of scalars {N} -> {N, k}.
    diff::Array forward(const diff::Array& tau) const;

    int size() const { return k_; }

private:
    int k_ = 0;
    diff::Array omega_, psi_;
};

// Learnable radial embedding of a scalar: element i is
// exp(-|tau - mu[i]| / sigma[i]), bounded in (0, 1] and equal to 1 exactly at
// the reference point. Widths stay positive through a softplus
// reparameterization of the stored raw values.
class RbfLayer {
public:
    RbfLayer(diff::ParamSet& params, const std::string& prefix, int k, util::Rng& rng);

    // tau: 1-D batch of scalars {N} -> {N, k}.
    diff::Array forward(const diff::Array& tau) const;

    int size() const { return k_; }

private:
    int k_ = 0;
    diff::Array mu_, sigma_raw_;
};

// Table of learnable vectors indexed by categorical id.
class LookupEmbedding {
public:
    LookupEmbedding(diff::ParamSet& params, const std::string& prefix, int vocabulary, int dim,
                    util::Rng& rng);

    diff::Array forward(const std::vector<int>& ids) const;  // {N, dim}

    int vocabulary() const { return vocabulary_; }
    int dim() const { return dim_; }

private:
    int vocabulary_ = 0;
    int dim_ = 0;
    diff::Array table_;
};

// Single trainable factor applied to raw-second time differences before they
// reach a Time2VecLayer. Initialized to 1/86400 so day-scale gaps start out
// inside the unit interval.
class DiffScale {
public:
    DiffScale(diff::ParamSet& params, const std::string& prefix);

    diff::Array apply(const diff::Array& diffs) const;  // {N} -> {N}

private:
    diff::Array factor_;
};

// The second scalar-embedding slot next to each Time2Vec. Ordinarily radial;
// the rbf ablation swaps in another Time2Vec without touching any caller.
class RadialSlot {
public:
    static RadialSlot make_rbf(diff::ParamSet& params, const std::string& prefix, int k,
                               util::Rng& rng);
    static RadialSlot make_time2vec(diff::ParamSet& params, const std::string& prefix, int k,
                                    util::Rng& rng);

    diff::Array forward(const diff::Array& tau) const;
    int size() const;
    bool is_radial() const { return rbf_.has_value(); }

private:
    RadialSlot() = default;
    std::optional<RbfLayer> rbf_;
    std::optional<Time2VecLayer> t2v_;
};

// The embedding layers one action touches, in six-tuple order.
struct ActionFieldLayers {
    const LookupEmbedding* device = nullptr;
    const LookupEmbedding* control = nullptr;
    const Time2VecLayer* time_periodic = nullptr;
    const RadialSlot* time_radial = nullptr;
    const Time2VecLayer* date_periodic = nullptr;
    const RadialSlot* date_radial = nullptr;
};

// One embedding per action field, batched over N actions. All six are
// {N, d} with a shared d so a downstream concat of the four date/categorical
// parts is exactly {N, 4d}.
struct FieldEmbeddings {
    diff::Array device;         // from the device id
    diff::Array control;        // from the control id
    diff::Array time_periodic;  // Time2Vec of normalized time of day
    diff::Array time_radial;    // radial slot of normalized time of day
    diff::Array date_periodic;  // Time2Vec of normalized date
    diff::Array date_radial;    // radial slot of normalized date
};

FieldEmbeddings embed_action_fields(const std::vector<data::ActionRecord>& records,
                                    data::Schema schema, const ActionFieldLayers& layers);

// Time2Vec of trainably rescaled raw-second gaps: {N} diffs -> {N, k}.
diff::Array embed_time_diff(const diff::Array& diffs, const DiffScale& scale,
                            const Time2VecLayer& t2v);

}  // namespace timing::embed

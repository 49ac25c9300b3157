#pragma once

#include <memory>
#include <string>

#include "timing/embed/layers.hpp"
#include "timing/nets/features.hpp"
#include "timing/nets/layers.hpp"

namespace timing::nets {

// Common contract for the main model, its ablations, and the baselines:
// a batch of sessions in, one row of outputs per session out ({B, bins}
// logits, or {B, 1} in regression mode).
class Model {
public:
    virtual ~Model() = default;

    virtual diff::Array forward(const FeatureBatch& batch, bool training) = 0;

    const ModelConfig& config() const { return config_; }
    diff::ParamSet& params() { return params_; }
    const diff::ParamSet& params() const { return params_; }

protected:
    explicit Model(ModelConfig config) : config_(std::move(config)) {}
    ModelConfig config_;
    diff::ParamSet params_;
};

// Builds any of the ten variants named by config.variant, with parameters
// drawn deterministically from rng. Throws on unknown names.
std::unique_ptr<Model> build_model(const ModelConfig& config, util::Rng& rng);

// Fuses the four non-time fields of one action (device, control, date
// periodic, date radial) into a single d-wide vector: the four embeddings
// become a 4-token group, pass through a transformer, and the flattened 4d
// result is projected down to d.
class ActionEncoder {
public:
    ActionEncoder(diff::ParamSet& params, const ModelConfig& config, util::Rng& rng,
                  bool identity_transformer = false);

    // fields: four arrays {N, d} -> H {N, d}
    diff::Array forward(const diff::Array& device, const diff::Array& control,
                        const diff::Array& date_periodic, const diff::Array& date_radial) const;

private:
    int dim_ = 0;
    TransformerEncoder transformer_;
    Linear projection_;
};

// Combines the time-of-day embeddings with the convolved gap sequence:
// width d each, concatenated to 3d per position, then batch-normalized.
class TimeEncoder {
public:
    TimeEncoder(diff::ParamSet& params, const ModelConfig& config, util::Rng& rng,
                bool identity_tcn = false);

    // z3, time_periodic, time_radial: {B, T, d} -> {B, T, 3d}
    diff::Array forward(const diff::Array& z3, const diff::Array& time_periodic,
                        const diff::Array& time_radial, bool training);

private:
    int dim_ = 0;
    Tcn tcn_;
    BatchNormLayer norm_;
};

// Sequence transformer plus the trainable positional matrix (added after the
// transformer by default), a second convolution stack, average pooling, and
// the classification head.
class SequenceEncoder {
public:
    SequenceEncoder(diff::ParamSet& params, const ModelConfig& config, util::Rng& rng,
                    bool identity_transformer = false);

    // s {B, T, 4d} -> {B, output_width}
    diff::Array forward(const diff::Array& s) const;

private:
    int width_ = 0;
    bool positional_before_ = false;
    double slope_ = 0.01;
    TransformerEncoder transformer_;
    diff::Array positional_;  // {T, 4d}
    Tcn tcn_;
    Linear hidden_, out_;
};

// The assembled architecture. config.variant selects between the full model
// and its three ablations; build_model also accepts the baseline names.
class TimingMattersModel : public Model {
public:
    TimingMattersModel(ModelConfig config, util::Rng& rng);

    diff::Array forward(const FeatureBatch& batch, bool training) override;

private:
    embed::LookupEmbedding device_, control_;
    embed::Time2VecLayer time_periodic_, date_periodic_, diff_t2v_;
    embed::RadialSlot time_radial_, date_radial_;
    embed::DiffScale diff_scale_;
    ActionEncoder action_;
    TimeEncoder time_;
    SequenceEncoder sequence_;
};

}  // namespace timing::nets

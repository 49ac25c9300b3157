#pragma once

#include <memory>

#include "timing/nets/model.hpp"

namespace timing::nets {

// Shared front end of every baseline: all six per-field embeddings of each
// action, concatenated to one 6d-wide vector per action.
class SixPartEmbedder {
public:
    SixPartEmbedder(diff::ParamSet& params, const ModelConfig& config, util::Rng& rng);

    embed::FieldEmbeddings fields(const FeatureBatch& batch) const;
    diff::Array concat_fields(const embed::FieldEmbeddings& fields) const;  // {B*T, 6d}

    int dim() const { return dim_; }
    int width() const { return 6 * dim_; }

private:
    int dim_ = 0;
    embed::LookupEmbedding device_, control_;
    embed::Time2VecLayer time_periodic_, date_periodic_;
    embed::RadialSlot time_radial_, date_radial_;
};

// config.variant must be one of the six baseline names.
std::unique_ptr<Model> build_baseline(const ModelConfig& config, util::Rng& rng);

}  // namespace timing::nets

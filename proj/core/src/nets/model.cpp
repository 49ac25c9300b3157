#include "timing/nets/model.hpp"

#include <stdexcept>

#include "timing/nets/baselines.hpp"

namespace timing::nets {

using diff::Array;

namespace {

TransformerConfig transformer_config(const ModelConfig& c, int dim, bool identity) {
    TransformerConfig t;
    t.dim = dim;
    t.heads = c.heads;
    t.layers = c.layers;
    t.ff_width = c.ff_width;
    t.slope = c.leaky_slope;
    t.identity = identity;
    return t;
}

embed::RadialSlot make_radial(diff::ParamSet& params, const ModelConfig& c,
                              const std::string& prefix, util::Rng& rng) {
    if (c.variant == "minus-rbf")
        return embed::RadialSlot::make_time2vec(params, prefix, c.embed_dim, rng);
    return embed::RadialSlot::make_rbf(params, prefix, c.embed_dim, rng);
}

}  // namespace

ActionEncoder::ActionEncoder(diff::ParamSet& params, const ModelConfig& config, util::Rng& rng,
                             bool identity_transformer)
    : dim_(config.embed_dim),
      transformer_(params, "action/transformer",
                   transformer_config(config, config.embed_dim, identity_transformer), rng),
      projection_(params, "action/projection", 4 * config.embed_dim, config.embed_dim, rng) {}

Array ActionEncoder::forward(const Array& device, const Array& control,
                             const Array& date_periodic, const Array& date_radial) const {
    for (const Array* part : {&device, &control, &date_periodic, &date_radial})
        if (part->ndim() != 2 || part->dim(1) != dim_)
            throw std::invalid_argument("action encoder: every field must be {N, " +
                                        std::to_string(dim_) + "}, got " +
                                        diff::shape_str(part->shape()));
    const int n = device.dim(0);
    Array x = diff::concat({device, control, date_periodic, date_radial}, 1);  // {N, 4d}
    Array tokens = diff::reshape(x, {n, 4, dim_});
    Array encoded = transformer_.forward(tokens);
    Array flat = diff::reshape(encoded, {n, 4 * dim_});
    return projection_.forward(flat);
}

TimeEncoder::TimeEncoder(diff::ParamSet& params, const ModelConfig& config, util::Rng& rng,
                         bool identity_tcn)
    : dim_(config.embed_dim),
      tcn_(params, "time/tcn", config.embed_dim, 4, config.leaky_slope, rng, identity_tcn),
      norm_(params, "time/norm", 3 * config.embed_dim) {}

Array TimeEncoder::forward(const Array& z3, const Array& time_periodic, const Array& time_radial,
                           bool training) {
    for (const Array* part : {&z3, &time_periodic, &time_radial})
        if (part->ndim() != 3 || part->dim(2) != dim_)
            throw std::invalid_argument("time encoder: every input must be {B, T, " +
                                        std::to_string(dim_) + "}, got " +
                                        diff::shape_str(part->shape()));
    Array convolved = tcn_.forward(z3);
    Array joined = diff::concat({time_periodic, time_radial, convolved}, 2);  // {B, T, 3d}
    const int rows = joined.dim(0) * joined.dim(1);
    Array flat = diff::reshape(joined, {rows, 3 * dim_});
    Array normed = norm_.forward(flat, training);
    return diff::reshape(normed, joined.shape());
}

SequenceEncoder::SequenceEncoder(diff::ParamSet& params, const ModelConfig& config, util::Rng& rng,
                                 bool identity_transformer)
    : width_(4 * config.embed_dim),
      positional_before_(config.positional_before),
      slope_(config.leaky_slope),
      transformer_(params, "seq/transformer",
                   transformer_config(config, 4 * config.embed_dim, identity_transformer), rng),
      positional_(params.add_normal("seq/positional", {config.steps(), 4 * config.embed_dim}, rng,
                                    0.02)),
      tcn_(params, "seq/tcn", 4 * config.embed_dim, 4, config.leaky_slope, rng),
      hidden_(params, "seq/hidden", 4 * config.embed_dim, 2 * config.embed_dim, rng),
      out_(params, "seq/out", 2 * config.embed_dim, config.output_width(), rng) {}

Array SequenceEncoder::forward(const Array& s) const {
    if (s.ndim() != 3 || s.dim(2) != width_ || s.dim(1) != positional_.dim(0))
        throw std::invalid_argument("sequence encoder: expected {B, " +
                                    std::to_string(positional_.dim(0)) + ", " +
                                    std::to_string(width_) + "}, got " +
                                    diff::shape_str(s.shape()));
    Array mixed;
    if (positional_before_) {
        mixed = transformer_.forward(diff::add_mat_bcast(s, positional_));
    } else {
        mixed = diff::add_mat_bcast(transformer_.forward(s), positional_);
    }
    Array convolved = tcn_.forward(mixed);
    Array pooled = diff::avg_pool_time(convolved);  // {B, 4d}
    Array h = diff::leaky_relu(hidden_.forward(pooled), slope_);
    return out_.forward(h);
}

TimingMattersModel::TimingMattersModel(ModelConfig config, util::Rng& rng)
    : Model(std::move(config)),
      device_(params_, "embed/device", config_.num_devices, config_.embed_dim, rng),
      control_(params_, "embed/control", config_.num_controls, config_.embed_dim, rng),
      time_periodic_(params_, "embed/time_periodic", config_.embed_dim, rng),
      date_periodic_(params_, "embed/date_periodic", config_.embed_dim, rng),
      diff_t2v_(params_, "embed/diff_t2v", config_.embed_dim, rng),
      time_radial_(make_radial(params_, config_, "embed/time_radial", rng)),
      date_radial_(make_radial(params_, config_, "embed/date_radial", rng)),
      diff_scale_(params_, "embed/diff_scale"),
      action_(params_, config_, rng),
      time_(params_, config_, rng, config_.variant == "minus-time-encoder"),
      sequence_(params_, config_, rng, config_.variant == "minus-sequence-encoder") {}

Array TimingMattersModel::forward(const FeatureBatch& batch, bool training) {
    if (batch.steps != config_.steps())
        throw std::invalid_argument("model: batch has " + std::to_string(batch.steps) +
                                    " steps, config expects " + std::to_string(config_.steps()));
    if (batch.schema != config_.schema)
        throw std::invalid_argument("model: batch schema differs from config schema");
    const int b = batch.batch;
    const int t = batch.steps;
    const int d = config_.embed_dim;

    embed::ActionFieldLayers layers{&device_,      &control_,     &time_periodic_,
                                    &time_radial_, &date_periodic_, &date_radial_};
    embed::FieldEmbeddings fields = embed::embed_action_fields(batch.records, batch.schema, layers);

    Array h = action_.forward(fields.device, fields.control, fields.date_periodic,
                              fields.date_radial);  // {b*t, d}

    Array gaps = Array::from_data({b * t}, batch.diffs);
    Array z3 = embed::embed_time_diff(gaps, diff_scale_, diff_t2v_);  // {b*t, d}
    Array time_part = time_.forward(diff::reshape(z3, {b, t, d}),
                                    diff::reshape(fields.time_periodic, {b, t, d}),
                                    diff::reshape(fields.time_radial, {b, t, d}),
                                    training);  // {b, t, 3d}

    Array s = diff::concat({diff::reshape(h, {b, t, d}), time_part}, 2);  // {b, t, 4d}
    return sequence_.forward(s);
}

std::unique_ptr<Model> build_model(const ModelConfig& config, util::Rng& rng) {
    validate(config);
    if (is_baseline(config.variant)) return build_baseline(config, rng);
    return std::make_unique<TimingMattersModel>(config, rng);
}

}  // namespace timing::nets

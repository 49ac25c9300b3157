#include "timing/nets/baselines.hpp"

#include <stdexcept>

namespace timing::nets {

using diff::Array;

SixPartEmbedder::SixPartEmbedder(diff::ParamSet& params, const ModelConfig& config, util::Rng& rng)
    : dim_(config.embed_dim),
      device_(params, "embed/device", config.num_devices, config.embed_dim, rng),
      control_(params, "embed/control", config.num_controls, config.embed_dim, rng),
      time_periodic_(params, "embed/time_periodic", config.embed_dim, rng),
      date_periodic_(params, "embed/date_periodic", config.embed_dim, rng),
      time_radial_(embed::RadialSlot::make_rbf(params, "embed/time_radial", config.embed_dim, rng)),
      date_radial_(
          embed::RadialSlot::make_rbf(params, "embed/date_radial", config.embed_dim, rng)) {}

embed::FieldEmbeddings SixPartEmbedder::fields(const FeatureBatch& batch) const {
    embed::ActionFieldLayers layers{&device_,      &control_,       &time_periodic_,
                                    &time_radial_, &date_periodic_, &date_radial_};
    return embed::embed_action_fields(batch.records, batch.schema, layers);
}

Array SixPartEmbedder::concat_fields(const embed::FieldEmbeddings& fields) const {
    return diff::concat({fields.device, fields.control, fields.time_periodic, fields.time_radial,
                         fields.date_periodic, fields.date_radial},
                        1);
}

namespace {

void check_batch(const ModelConfig& config, const FeatureBatch& batch) {
    if (batch.steps != config.steps())
        throw std::invalid_argument("model: batch has " + std::to_string(batch.steps) +
                                    " steps, config expects " + std::to_string(config.steps()));
    if (batch.schema != config.schema)
        throw std::invalid_argument("model: batch schema differs from config schema");
}

TransformerConfig encoder_config(const ModelConfig& c, int dim) {
    TransformerConfig t;
    t.dim = dim;
    t.heads = c.heads;
    t.layers = c.layers;
    t.ff_width = c.ff_width;
    t.slope = c.leaky_slope;
    return t;
}

// Every session's actions flattened into one wide vector, then a plain
// four-layer feed-forward stack. Order-sensitive by construction.
class MlpBaseline : public Model {
public:
    MlpBaseline(ModelConfig config, util::Rng& rng)
        : Model(std::move(config)),
          embed_(params_, config_, rng),
          fc1_(params_, "net/fc1", config_.steps() * embed_.width(), 8 * config_.embed_dim, rng),
          fc2_(params_, "net/fc2", 8 * config_.embed_dim, 4 * config_.embed_dim, rng),
          fc3_(params_, "net/fc3", 4 * config_.embed_dim, 2 * config_.embed_dim, rng),
          fc4_(params_, "net/fc4", 2 * config_.embed_dim, config_.output_width(), rng) {}

    Array forward(const FeatureBatch& batch, bool /*training*/) override {
        check_batch(config_, batch);
        Array per_action = embed_.concat_fields(embed_.fields(batch));  // {B*T, 6d}
        Array flat = diff::reshape(per_action, {batch.batch, batch.steps * embed_.width()});
        Array h = diff::leaky_relu(fc1_.forward(flat), config_.leaky_slope);
        h = diff::leaky_relu(fc2_.forward(h), config_.leaky_slope);
        h = diff::leaky_relu(fc3_.forward(h), config_.leaky_slope);
        return fc4_.forward(h);
    }

private:
    SixPartEmbedder embed_;
    Linear fc1_, fc2_, fc3_, fc4_;
};

// First squeezes each action separately, then mixes the squeezed vectors.
class Mlp2StepBaseline : public Model {
public:
    Mlp2StepBaseline(ModelConfig config, util::Rng& rng)
        : Model(std::move(config)),
          embed_(params_, config_, rng),
          a1_(params_, "net/action1", embed_.width(), 3 * config_.embed_dim, rng),
          a2_(params_, "net/action2", 3 * config_.embed_dim, 2 * config_.embed_dim, rng),
          m1_(params_, "net/mix1", config_.steps() * 2 * config_.embed_dim,
              4 * config_.embed_dim, rng),
          m2_(params_, "net/mix2", 4 * config_.embed_dim, 2 * config_.embed_dim, rng),
          out_(params_, "net/out", 2 * config_.embed_dim, config_.output_width(), rng) {}

    Array forward(const FeatureBatch& batch, bool /*training*/) override {
        check_batch(config_, batch);
        Array per_action = embed_.concat_fields(embed_.fields(batch));  // {B*T, 6d}
        Array a = diff::leaky_relu(a1_.forward(per_action), config_.leaky_slope);
        a = diff::leaky_relu(a2_.forward(a), config_.leaky_slope);  // {B*T, 2d}
        Array flat = diff::reshape(a, {batch.batch, batch.steps * 2 * config_.embed_dim});
        Array h = diff::leaky_relu(m1_.forward(flat), config_.leaky_slope);
        h = diff::leaky_relu(m2_.forward(h), config_.leaky_slope);
        return out_.forward(h);
    }

private:
    SixPartEmbedder embed_;
    Linear a1_, a2_, m1_, m2_, out_;
};

// Recurrent pass over the raw per-action embeddings; the final hidden state
// feeds the output layer.
class LstmBaseline : public Model {
public:
    LstmBaseline(ModelConfig config, util::Rng& rng)
        : Model(std::move(config)),
          embed_(params_, config_, rng),
          lstm_(params_, "net/lstm", embed_.width(), 2 * config_.embed_dim, 2, rng),
          out_(params_, "net/out", 2 * config_.embed_dim, config_.output_width(), rng) {}

    Array forward(const FeatureBatch& batch, bool /*training*/) override {
        check_batch(config_, batch);
        Array per_action = embed_.concat_fields(embed_.fields(batch));
        Array seq = diff::reshape(per_action, {batch.batch, batch.steps, embed_.width()});
        Array states = lstm_.forward(seq);  // {B, T, 2d}
        return out_.forward(last_step(states));
    }

private:
    SixPartEmbedder embed_;
    Lstm lstm_;
    Linear out_;
};

// Per-action squeeze first, recurrence over the squeezed vectors second.
class MlpLstmBaseline : public Model {
public:
    MlpLstmBaseline(ModelConfig config, util::Rng& rng)
        : Model(std::move(config)),
          embed_(params_, config_, rng),
          a1_(params_, "net/action1", embed_.width(), 3 * config_.embed_dim, rng),
          a2_(params_, "net/action2", 3 * config_.embed_dim, 2 * config_.embed_dim, rng),
          lstm_(params_, "net/lstm", 2 * config_.embed_dim, 2 * config_.embed_dim, 2, rng),
          out_(params_, "net/out", 2 * config_.embed_dim, config_.output_width(), rng) {}

    Array forward(const FeatureBatch& batch, bool /*training*/) override {
        check_batch(config_, batch);
        Array per_action = embed_.concat_fields(embed_.fields(batch));
        Array a = diff::leaky_relu(a1_.forward(per_action), config_.leaky_slope);
        a = diff::leaky_relu(a2_.forward(a), config_.leaky_slope);
        Array seq = diff::reshape(a, {batch.batch, batch.steps, 2 * config_.embed_dim});
        Array states = lstm_.forward(seq);
        return out_.forward(last_step(states));
    }

private:
    SixPartEmbedder embed_;
    Linear a1_, a2_;
    Lstm lstm_;
    Linear out_;
};

// One recurrent stream per field family (device, control, time, date), then a
// second recurrence over the concatenated stream outputs.
class Lstm2StepBaseline : public Model {
public:
    Lstm2StepBaseline(ModelConfig config, util::Rng& rng)
        : Model(std::move(config)),
          embed_(params_, config_, rng),
          device_lstm_(params_, "net/device_lstm", config_.embed_dim, config_.embed_dim, 1, rng),
          control_lstm_(params_, "net/control_lstm", config_.embed_dim, config_.embed_dim, 1, rng),
          time_lstm_(params_, "net/time_lstm", 2 * config_.embed_dim, config_.embed_dim, 1, rng),
          date_lstm_(params_, "net/date_lstm", 2 * config_.embed_dim, config_.embed_dim, 1, rng),
          mix_lstm_(params_, "net/mix_lstm", 4 * config_.embed_dim, 2 * config_.embed_dim, 1, rng),
          out_(params_, "net/out", 2 * config_.embed_dim, config_.output_width(), rng) {}

    Array forward(const FeatureBatch& batch, bool /*training*/) override {
        check_batch(config_, batch);
        embed::FieldEmbeddings fields = embed_.fields(batch);
        const int b = batch.batch;
        const int t = batch.steps;
        const int d = config_.embed_dim;
        Array device = diff::reshape(fields.device, {b, t, d});
        Array control = diff::reshape(fields.control, {b, t, d});
        Array time = diff::reshape(diff::concat({fields.time_periodic, fields.time_radial}, 1),
                                   {b, t, 2 * d});
        Array date = diff::reshape(diff::concat({fields.date_periodic, fields.date_radial}, 1),
                                   {b, t, 2 * d});
        Array mixed = diff::concat({device_lstm_.forward(device), control_lstm_.forward(control),
                                    time_lstm_.forward(time), date_lstm_.forward(date)},
                                   2);  // {B, T, 4d}
        Array states = mix_lstm_.forward(mixed);
        return out_.forward(last_step(states));
    }

private:
    SixPartEmbedder embed_;
    Lstm device_lstm_, control_lstm_, time_lstm_, date_lstm_, mix_lstm_;
    Linear out_;
};

// Plain encoder over projected per-action vectors, position added up front,
// mean-pooled into the head.
class TransformerBaseline : public Model {
public:
    TransformerBaseline(ModelConfig config, util::Rng& rng)
        : Model(std::move(config)),
          embed_(params_, config_, rng),
          projection_(params_, "net/projection", embed_.width(), 4 * config_.embed_dim, rng),
          positional_(params_.add_normal("net/positional",
                                         {config_.steps(), 4 * config_.embed_dim}, rng, 0.02)),
          encoder_(params_, "net/transformer",
                   encoder_config(config_, 4 * config_.embed_dim), rng),
          hidden_(params_, "net/hidden", 4 * config_.embed_dim, 2 * config_.embed_dim, rng),
          out_(params_, "net/out", 2 * config_.embed_dim, config_.output_width(), rng) {}

    Array forward(const FeatureBatch& batch, bool /*training*/) override {
        check_batch(config_, batch);
        Array per_action = embed_.concat_fields(embed_.fields(batch));
        Array projected = projection_.forward(per_action);  // {B*T, 4d}
        Array seq =
            diff::reshape(projected, {batch.batch, batch.steps, 4 * config_.embed_dim});
        Array encoded = encoder_.forward(diff::add_mat_bcast(seq, positional_));
        Array pooled = diff::avg_pool_time(encoded);  // {B, 4d}
        Array h = diff::leaky_relu(hidden_.forward(pooled), config_.leaky_slope);
        return out_.forward(h);
    }

private:
    SixPartEmbedder embed_;
    Linear projection_;
    diff::Array positional_;  // {T, 4d}
    TransformerEncoder encoder_;
    Linear hidden_, out_;
};

}  // namespace

std::unique_ptr<Model> build_baseline(const ModelConfig& config, util::Rng& rng) {
    if (config.variant == "mlp") return std::make_unique<MlpBaseline>(config, rng);
    if (config.variant == "mlp-2step") return std::make_unique<Mlp2StepBaseline>(config, rng);
    if (config.variant == "lstm") return std::make_unique<LstmBaseline>(config, rng);
    if (config.variant == "mlp-lstm") return std::make_unique<MlpLstmBaseline>(config, rng);
    if (config.variant == "lstm-2step") return std::make_unique<Lstm2StepBaseline>(config, rng);
    if (config.variant == "transformer") return std::make_unique<TransformerBaseline>(config, rng);
    throw std::invalid_argument("build_baseline: '" + config.variant + "' is not a baseline");
}

}  // namespace timing::nets

#include "timing/nets/layers.hpp"

#include <cmath>
#include <stdexcept>

namespace timing::nets {

using diff::Array;

namespace {

double fan_in_bound(int fan_in) { return 1.0 / std::sqrt(static_cast<double>(fan_in)); }

}  // namespace

Linear::Linear(diff::ParamSet& params, const std::string& prefix, int in, int out, util::Rng& rng)
    : in_(in), out_(out) {
    if (in < 1 || out < 1) throw std::invalid_argument("linear: sizes must be positive");
    const double bound = fan_in_bound(in);
    weight_ = params.add_uniform(prefix + "/weight", {in, out}, rng, -bound, bound);
    bias_ = params.add_uniform(prefix + "/bias", {out}, rng, -bound, bound);
}

Array Linear::forward(const Array& x) const {
    if (x.dim(-1) != in_)
        throw std::invalid_argument("linear: input width " + std::to_string(x.dim(-1)) +
                                    ", expected " + std::to_string(in_));
    return diff::add_bias(diff::matmul(x, weight_), bias_);
}

TransformerEncoder::TransformerEncoder(diff::ParamSet& params, const std::string& prefix,
                                       TransformerConfig config, util::Rng& rng)
    : config_(config) {
    if (config_.identity) return;
    if (config_.dim < 1 || config_.heads < 1 || config_.layers < 1 || config_.ff_width < 1)
        throw std::invalid_argument("transformer: sizes must be positive");
    if (config_.dim % config_.heads != 0)
        throw std::invalid_argument("transformer: width " + std::to_string(config_.dim) +
                                    " not divisible by " + std::to_string(config_.heads) +
                                    " heads");
    head_dim_ = config_.dim / config_.heads;
    const double qkv_bound = fan_in_bound(config_.dim);
    const double ff1_bound = fan_in_bound(config_.dim);
    const double ff2_bound = fan_in_bound(config_.ff_width);

    blocks_.resize(static_cast<std::size_t>(config_.layers));
    for (int l = 0; l < config_.layers; ++l) {
        Block& b = blocks_[static_cast<std::size_t>(l)];
        const std::string base = prefix + "/block" + std::to_string(l);
        for (int h = 0; h < config_.heads; ++h) {
            const std::string hb = base + "/head" + std::to_string(h);
            b.wq.push_back(params.add_uniform(hb + "/wq", {config_.dim, head_dim_}, rng,
                                              -qkv_bound, qkv_bound));
            b.bq.push_back(params.add_zeros(hb + "/bq", {head_dim_}));
            b.wk.push_back(params.add_uniform(hb + "/wk", {config_.dim, head_dim_}, rng,
                                              -qkv_bound, qkv_bound));
            b.bk.push_back(params.add_zeros(hb + "/bk", {head_dim_}));
            b.wv.push_back(params.add_uniform(hb + "/wv", {config_.dim, head_dim_}, rng,
                                              -qkv_bound, qkv_bound));
            b.bv.push_back(params.add_zeros(hb + "/bv", {head_dim_}));
        }
        b.wo = params.add_uniform(base + "/wo", {config_.dim, config_.dim}, rng, -qkv_bound,
                                  qkv_bound);
        b.bo = params.add_zeros(base + "/bo", {config_.dim});
        b.ln1_gain = params.add_full(base + "/ln1_gain", {config_.dim}, 1.0);
        b.ln1_bias = params.add_zeros(base + "/ln1_bias", {config_.dim});
        b.ln2_gain = params.add_full(base + "/ln2_gain", {config_.dim}, 1.0);
        b.ln2_bias = params.add_zeros(base + "/ln2_bias", {config_.dim});
        b.ff1_w = params.add_uniform(base + "/ff1_w", {config_.dim, config_.ff_width}, rng,
                                     -ff1_bound, ff1_bound);
        b.ff1_b = params.add_zeros(base + "/ff1_b", {config_.ff_width});
        b.ff2_w = params.add_uniform(base + "/ff2_w", {config_.ff_width, config_.dim}, rng,
                                     -ff2_bound, ff2_bound);
        b.ff2_b = params.add_zeros(base + "/ff2_b", {config_.dim});
    }
    final_gain = params.add_full(prefix + "/final_gain", {config_.dim}, 1.0);
    final_bias = params.add_zeros(prefix + "/final_bias", {config_.dim});
}

Array TransformerEncoder::forward(const Array& x) const {
    if (config_.identity) return x;
    if (x.ndim() != 3 || x.dim(2) != config_.dim)
        throw std::invalid_argument("transformer: expected {groups, tokens, " +
                                    std::to_string(config_.dim) + "}, got " +
                                    diff::shape_str(x.shape()));
    const double attn_scale = 1.0 / std::sqrt(static_cast<double>(head_dim_));
    Array h = x;
    for (const Block& b : blocks_) {
        Array normed = diff::layer_norm(h, b.ln1_gain, b.ln1_bias);
        std::vector<Array> parts;
        parts.reserve(b.wq.size());
        for (std::size_t i = 0; i < b.wq.size(); ++i) {
            Array q = diff::add_bias(diff::matmul(normed, b.wq[i]), b.bq[i]);
            Array k = diff::add_bias(diff::matmul(normed, b.wk[i]), b.bk[i]);
            Array v = diff::add_bias(diff::matmul(normed, b.wv[i]), b.bv[i]);
            Array scores = diff::scale(diff::bmm(q, diff::transpose2(k)), attn_scale);
            parts.push_back(diff::bmm(diff::softmax_last(scores), v));
        }
        Array ctx = parts.size() == 1 ? parts[0] : diff::concat(parts, 2);
        h = diff::add(h, diff::add_bias(diff::matmul(ctx, b.wo), b.bo));

        Array normed2 = diff::layer_norm(h, b.ln2_gain, b.ln2_bias);
        Array ff = diff::add_bias(diff::matmul(normed2, b.ff1_w), b.ff1_b);
        ff = diff::leaky_relu(ff, config_.slope);
        ff = diff::add_bias(diff::matmul(ff, b.ff2_w), b.ff2_b);
        h = diff::add(h, ff);
    }
    return diff::layer_norm(h, final_gain, final_bias);
}

Tcn::Tcn(diff::ParamSet& params, const std::string& prefix, int channels, int units, double slope,
         util::Rng& rng, bool identity)
    : channels_(channels), slope_(slope), identity_(identity) {
    if (identity_) return;
    if (channels < 1 || units < 1) throw std::invalid_argument("tcn: sizes must be positive");
    const double bound = fan_in_bound(2 * channels);
    for (int u = 0; u < units; ++u) {
        const std::string base = prefix + "/conv" + std::to_string(u);
        weights_.push_back(
            params.add_uniform(base + "/weight", {2, channels, channels}, rng, -bound, bound));
        biases_.push_back(params.add_uniform(base + "/bias", {channels}, rng, -bound, bound));
    }
}

Array Tcn::forward(const Array& x) const {
    if (identity_) return x;
    if (x.ndim() != 3 || x.dim(2) != channels_)
        throw std::invalid_argument("tcn: expected {batch, steps, " + std::to_string(channels_) +
                                    "}, got " + diff::shape_str(x.shape()));
    Array h = x;
    for (std::size_t u = 0; u < weights_.size(); ++u) {
        if (u > 0) h = diff::leaky_relu(h, slope_);
        h = diff::conv1d_causal(h, weights_[u], biases_[u]);
    }
    return h;
}

BatchNormLayer::BatchNormLayer(diff::ParamSet& params, const std::string& prefix, int channels,
                               double momentum)
    : channels_(channels), momentum_(momentum) {
    if (channels < 1) throw std::invalid_argument("batch norm: channels must be positive");
    gain_ = params.add_full(prefix + "/gain", {channels}, 1.0);
    bias_ = params.add_zeros(prefix + "/bias", {channels});
    running_mean_ = params.add_zeros(prefix + "/running_mean", {channels}, /*trainable=*/false);
    running_var_ = params.add_full(prefix + "/running_var", {channels}, 1.0, /*trainable=*/false);
}

Array BatchNormLayer::forward(const Array& x, bool training) {
    if (x.ndim() != 2 || x.dim(1) != channels_)
        throw std::invalid_argument("batch norm: expected {rows, " + std::to_string(channels_) +
                                    "}, got " + diff::shape_str(x.shape()));
    if (!training)
        return diff::batch_norm_eval(x, gain_, bias_, running_mean_.value(), running_var_.value());

    std::vector<double> mean, var;
    Array out = diff::batch_norm_train(x, gain_, bias_, &mean, &var);
    const double rows = static_cast<double>(x.dim(0));
    const double unbias = rows > 1.5 ? rows / (rows - 1.0) : 1.0;
    auto& rm = running_mean_.mutable_value();
    auto& rv = running_var_.mutable_value();
    for (int c = 0; c < channels_; ++c) {
        const auto i = static_cast<std::size_t>(c);
        rm[i] = (1.0 - momentum_) * rm[i] + momentum_ * mean[i];
        rv[i] = (1.0 - momentum_) * rv[i] + momentum_ * var[i] * unbias;
    }
    return out;
}

Lstm::Lstm(diff::ParamSet& params, const std::string& prefix, int in, int hidden, int layers,
           util::Rng& rng)
    : in_(in), hidden_(hidden) {
    if (in < 1 || hidden < 1 || layers < 1)
        throw std::invalid_argument("lstm: sizes must be positive");
    const double bound = fan_in_bound(hidden);
    for (int l = 0; l < layers; ++l) {
        const std::string base = prefix + "/layer" + std::to_string(l);
        const int width = l == 0 ? in : hidden;
        Cell cell;
        cell.wx = params.add_uniform(base + "/wx", {width, 4 * hidden}, rng, -bound, bound);
        cell.wh = params.add_uniform(base + "/wh", {hidden, 4 * hidden}, rng, -bound, bound);
        cell.bias = params.add_uniform(base + "/bias", {4 * hidden}, rng, -bound, bound);
        cells_.push_back(std::move(cell));
    }
}

Array Lstm::forward(const Array& x) const {
    if (x.ndim() != 3 || x.dim(2) != in_)
        throw std::invalid_argument("lstm: expected {batch, steps, " + std::to_string(in_) +
                                    "}, got " + diff::shape_str(x.shape()));
    const int batch = x.dim(0);
    const int steps = x.dim(1);
    Array sequence = x;
    for (const Cell& cell : cells_) {
        Array h = Array::zeros({batch, hidden_});
        Array c = Array::zeros({batch, hidden_});
        std::vector<Array> outputs;
        outputs.reserve(static_cast<std::size_t>(steps));
        for (int t = 0; t < steps; ++t) {
            Array xt = diff::reshape(diff::narrow(sequence, 1, t, 1), {batch, sequence.dim(2)});
            Array gates = diff::add_bias(
                diff::add(diff::matmul(xt, cell.wx), diff::matmul(h, cell.wh)), cell.bias);
            Array input_g = diff::sigmoid(diff::narrow(gates, 1, 0, hidden_));
            Array forget_g = diff::sigmoid(diff::narrow(gates, 1, hidden_, hidden_));
            Array cell_g = diff::tanh_(diff::narrow(gates, 1, 2 * hidden_, hidden_));
            Array out_g = diff::sigmoid(diff::narrow(gates, 1, 3 * hidden_, hidden_));
            c = diff::add(diff::mul(forget_g, c), diff::mul(input_g, cell_g));
            h = diff::mul(out_g, diff::tanh_(c));
            outputs.push_back(diff::reshape(h, {batch, 1, hidden_}));
        }
        sequence = diff::concat(outputs, 1);
    }
    return sequence;
}

Array last_step(const Array& x) {
    if (x.ndim() != 3) throw std::invalid_argument("last_step: expected {batch, steps, width}");
    return diff::reshape(diff::narrow(x, 1, x.dim(1) - 1, 1), {x.dim(0), x.dim(2)});
}

}  // namespace timing::nets

#pragma once

#include <string>
#include <vector>

#include "timing/diff/parameter.hpp"

namespace timing::nets {

// Fully connected layer, y = x W + b. Accepts {N, in} or {G, N, in} inputs.
class Linear {
public:
    Linear(diff::ParamSet& params, const std::string& prefix, int in, int out, util::Rng& rng);

    diff::Array forward(const diff::Array& x) const;

    int in() const { return in_; }
    int out() const { return out_; }

private:
    int in_ = 0, out_ = 0;
    diff::Array weight_, bias_;
};

struct TransformerConfig {
    int dim = 0;        // token width
    int heads = 2;
    int layers = 2;
    int ff_width = 200;
    double slope = 0.01;    // leaky-relu slope inside the feed-forward
    bool identity = false;  // ablation hook: no parameters, forward passes through
};

// Pre-norm transformer encoder stack over {G, T, dim} token groups.
// Attention mixes only within a group, never across groups. In identity mode
// the stack registers no parameters and returns its input unchanged.
class TransformerEncoder {
public:
    TransformerEncoder(diff::ParamSet& params, const std::string& prefix, TransformerConfig config,
                       util::Rng& rng);

    diff::Array forward(const diff::Array& x) const;

    bool identity() const { return config_.identity; }

private:
    struct Block {
        std::vector<diff::Array> wq, bq, wk, bk, wv, bv;  // per head
        diff::Array wo, bo;
        diff::Array ln1_gain, ln1_bias, ln2_gain, ln2_bias;
        diff::Array ff1_w, ff1_b, ff2_w, ff2_b;
    };
    TransformerConfig config_;
    int head_dim_ = 0;
    std::vector<Block> blocks_;
    diff::Array final_gain, final_bias;
};

// Stack of causal kernel-2 convolutions with leaky-relu between units;
// channel width is preserved so the output shape equals the input shape.
// Identity mode registers nothing and passes through.
class Tcn {
public:
    Tcn(diff::ParamSet& params, const std::string& prefix, int channels, int units, double slope,
        util::Rng& rng, bool identity = false);

    diff::Array forward(const diff::Array& x) const;  // {B, T, C} -> {B, T, C}

    bool identity() const { return identity_; }

private:
    int channels_ = 0;
    double slope_ = 0.01;
    bool identity_ = false;
    std::vector<diff::Array> weights_, biases_;
};

// Batch normalization over {N, C} rows with running statistics kept as
// non-trainable parameters so they persist through checkpoints.
class BatchNormLayer {
public:
    BatchNormLayer(diff::ParamSet& params, const std::string& prefix, int channels,
                   double momentum = 0.1);

    // Training mode normalizes by batch moments and folds them into the
    // running estimates; evaluation mode uses the stored estimates.
    diff::Array forward(const diff::Array& x, bool training);

private:
    int channels_ = 0;
    double momentum_ = 0.1;
    diff::Array gain_, bias_, running_mean_, running_var_;
};

// Multi-layer LSTM over {B, T, in}; returns the top layer's hidden state at
// every step as {B, T, hidden}. Gate layout follows the usual
// input/forget/cell/output order.
class Lstm {
public:
    Lstm(diff::ParamSet& params, const std::string& prefix, int in, int hidden, int layers,
         util::Rng& rng);

    diff::Array forward(const diff::Array& x) const;

    int hidden() const { return hidden_; }

private:
    int in_ = 0, hidden_ = 0;
    struct Cell {
        diff::Array wx, wh, bias;
    };
    std::vector<Cell> cells_;
};

// {B, T, C} -> {B, C}: the last step of a sequence output.
diff::Array last_step(const diff::Array& x);

}  // namespace timing::nets

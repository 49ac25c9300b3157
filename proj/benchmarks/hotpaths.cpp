// Microbenchmarks for the training hot paths: dense matmul, causal
// convolution, the attention encoder, and a full optimiser step on the
// default network. Forward-only variants run under a no-grad guard so they
// measure the kernels, not graph bookkeeping.

#include <benchmark/benchmark.h>

#include <cstdint>
#include <vector>

#include "timing/diff/adam.hpp"
#include "timing/diff/array.hpp"
#include "timing/nets/layers.hpp"
#include "timing/nets/model.hpp"
#include "timing/util/rng.hpp"
#include "timing/xp/metrics.hpp"

namespace {

using namespace timing;
using diff::Array;

std::vector<double> random_values(std::int64_t count, util::Rng& rng) {
    std::vector<double> data(static_cast<std::size_t>(count));
    for (double& v : data) v = rng.uniform(-1.0, 1.0);
    return data;
}

Array random_leaf(diff::Shape shape, util::Rng& rng) {
    const std::int64_t n = diff::shape_numel(shape);
    return Array::leaf(std::move(shape), random_values(n, rng));
}

void bm_matmul_forward(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    util::Rng rng(1);
    Array a = random_leaf({n, n}, rng);
    Array b = random_leaf({n, n}, rng);
    for (auto _ : state) {
        diff::NoGradGuard guard;
        Array c = diff::matmul(a, b);
        benchmark::DoNotOptimize(c.value().data());
    }
    state.SetItemsProcessed(state.iterations() * 2 * n * n * n);  // multiply-adds
}
BENCHMARK(bm_matmul_forward)->Arg(64)->Arg(128)->Arg(256);

void bm_matmul_backward(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    util::Rng rng(2);
    Array a = random_leaf({n, n}, rng);
    Array b = random_leaf({n, n}, rng);
    for (auto _ : state) {
        Array loss = diff::sum_all(diff::matmul(a, b));
        diff::backward(loss);
        benchmark::DoNotOptimize(a.grad().data());
        a.zero_grad();
        b.zero_grad();
    }
    state.SetItemsProcessed(state.iterations() * 2 * n * n * n);
}
BENCHMARK(bm_matmul_backward)->Arg(64)->Arg(128)->Arg(256);

// The deployed widths: 50 channels in the per-step path, 200 in the
// sequence path, kernel 2 as everywhere in the encoders.
void bm_conv1d_forward(benchmark::State& state) {
    const int channels = static_cast<int>(state.range(0));
    util::Rng rng(3);
    Array x = random_leaf({8, 64, channels}, rng);
    Array w = random_leaf({2, channels, channels}, rng);
    Array b = random_leaf({channels}, rng);
    for (auto _ : state) {
        diff::NoGradGuard guard;
        Array y = diff::conv1d_causal(x, w, b);
        benchmark::DoNotOptimize(y.value().data());
    }
}
BENCHMARK(bm_conv1d_forward)->Arg(50)->Arg(200);

void bm_conv1d_backward(benchmark::State& state) {
    const int channels = static_cast<int>(state.range(0));
    util::Rng rng(4);
    Array x = random_leaf({8, 64, channels}, rng);
    Array w = random_leaf({2, channels, channels}, rng);
    Array b = random_leaf({channels}, rng);
    for (auto _ : state) {
        Array loss = diff::sum_all(diff::conv1d_causal(x, w, b));
        diff::backward(loss);
        benchmark::DoNotOptimize(w.grad().data());
        x.zero_grad();
        w.zero_grad();
        b.zero_grad();
    }
}
BENCHMARK(bm_conv1d_backward)->Arg(50)->Arg(200);

// Sequence-encoder geometry: width 200, two heads, nine steps per session.
void bm_attention_forward(benchmark::State& state) {
    const int batch = static_cast<int>(state.range(0));
    diff::ParamSet params;
    util::Rng rng(5);
    nets::TransformerConfig cfg;
    cfg.dim = 200;
    cfg.heads = 2;
    cfg.layers = 1;
    cfg.ff_width = 200;
    nets::TransformerEncoder encoder(params, "enc", cfg, rng);
    Array x = random_leaf({batch, 9, 200}, rng);
    for (auto _ : state) {
        diff::NoGradGuard guard;
        Array y = encoder.forward(x);
        benchmark::DoNotOptimize(y.value().data());
    }
    state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(bm_attention_forward)->Arg(16)->Arg(64);

void bm_attention_backward(benchmark::State& state) {
    const int batch = static_cast<int>(state.range(0));
    diff::ParamSet params;
    util::Rng rng(6);
    nets::TransformerConfig cfg;
    cfg.dim = 200;
    cfg.heads = 2;
    cfg.layers = 1;
    cfg.ff_width = 200;
    nets::TransformerEncoder encoder(params, "enc", cfg, rng);
    Array x = random_leaf({batch, 9, 200}, rng);
    for (auto _ : state) {
        Array loss = diff::sum_all(encoder.forward(x));
        diff::backward(loss);
        benchmark::DoNotOptimize(x.grad().data());
        x.zero_grad();
        for (auto& p : params.all())
            if (p.trainable) p.array.zero_grad();
    }
    state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(bm_attention_backward)->Arg(16)->Arg(64);

// One full optimiser step of the default network on a 64-session batch:
// forward in training mode, cross entropy, backward, Adam. Items are
// sessions, so items/s is training throughput.
void bm_model_step(benchmark::State& state) {
    nets::ModelConfig config;
    config.variant = "timing-matters";
    config.num_devices = 16;
    config.num_controls = 121;
    util::Rng rng(7);
    auto model = nets::build_model(config, rng);
    diff::Adam adam(diff::AdamConfig{});

    std::vector<data::Session> sessions;
    for (int u = 0; u < 64; ++u) {
        data::Session s;
        s.user = u % 39;
        s.schema = data::Schema::kAn;
        for (int i = 0; i < 10; ++i) {
            data::ActionRecord r;
            r.day = (u * 37 + 5) % 366;
            r.time = 3600 + 900 * u + 600 * i;
            r.device = (u + i) % 16;
            r.control = (u * 3 + i) % 121;
            r.user = s.user;
            s.actions.push_back(r);
        }
        sessions.push_back(std::move(s));
    }
    std::vector<const data::Session*> view;
    for (const auto& s : sessions) view.push_back(&s);
    const nets::FeatureBatch batch = nets::build_feature_batch(view, data::BinningScheme(96));

    for (auto _ : state) {
        Array loss = xp::cross_entropy(model->forward(batch, true), batch.target_bins);
        diff::backward(loss);
        adam.step(model->params());
        benchmark::DoNotOptimize(loss.item());
    }
    state.SetItemsProcessed(state.iterations() * 64);
}
BENCHMARK(bm_model_step)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

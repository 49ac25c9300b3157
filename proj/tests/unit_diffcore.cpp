#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "testutil.hpp"
#include "timing/diff/adam.hpp"
#include "timing/diff/array.hpp"
#include "timing/diff/checkpoint.hpp"

using namespace timing::diff;
using timing::util::Rng;

namespace {

constexpr double kGradTol = 1e-4;

}  // namespace

TEST_CASE("array construction and accessors") {
    Array a = Array::from_data({2, 3}, {1, 2, 3, 4, 5, 6});
    CHECK(a.numel() == 6);
    CHECK(a.dim(0) == 2);
    CHECK(a.dim(-1) == 3);
    CHECK_FALSE(a.requires_grad());

    CHECK_THROWS(Array::from_data({2, 2}, {1.0}));
    CHECK_THROWS(Array::from_data({0, 2}, {}));
    CHECK_THROWS(a.item());
    CHECK(Array::full({1}, 7.5).item() == 7.5);
}

TEST_CASE("mutation is restricted to leaves") {
    Array a = Array::leaf({2}, {1, 2});
    Array b = scale(a, 2.0);
    CHECK_NOTHROW(a.mutable_value());
    CHECK_THROWS(b.mutable_value());
    CHECK_THROWS(b.set_requires_grad(false));
}

TEST_CASE("elementwise forward values") {
    Array a = Array::leaf({3}, {1, -2, 3});
    Array b = Array::leaf({3}, {4, 5, -6});
    CHECK(add(a, b).value() == std::vector<double>{5, 3, -3});
    CHECK(sub(a, b).value() == std::vector<double>{-3, -7, 9});
    CHECK(mul(a, b).value() == std::vector<double>{4, -10, -18});
    CHECK(affine(a, 2.0, 1.0).value() == std::vector<double>{3, -3, 7});
    CHECK(neg_abs(a).value() == std::vector<double>{-1, -2, -3});
    CHECK(leaky_relu(a, 0.01).value() == std::vector<double>{1, -0.02, 3});
    CHECK(sigmoid(Array::leaf({1}, {0.0})).item() == doctest::Approx(0.5));
    CHECK(tanh_(Array::leaf({1}, {0.0})).item() == 0.0);
    CHECK(softplus(Array::leaf({1}, {100.0})).item() == 100.0);
    CHECK(recip(Array::leaf({1}, {4.0})).item() == 0.25);
    CHECK_THROWS(add(a, Array::leaf({2}, {1, 2})));
}

TEST_CASE("elementwise gradients match finite differences") {
    Rng rng(11);
    Array a = testutil::random_leaf({4, 3}, rng, -2.0, 2.0, 0.05);
    Array b = testutil::random_leaf({4, 3}, rng, 0.2, 2.0);

    auto check_unary = [&](const char* tag, auto&& op) {
        
        auto report = testutil::gradcheck({a}, [&] { return testutil::project(op(a)); });
        INFO(tag << ": " << report.worst);
        CHECK(report.max_rel_err < kGradTol);
    };
    check_unary("sin", [](const Array& x) { return sin_(x); });
    check_unary("exp", [](const Array& x) { return exp_(x); });
    check_unary("neg_abs", [](const Array& x) { return neg_abs(x); });
    check_unary("leaky_relu", [](const Array& x) { return leaky_relu(x, 0.01); });
    check_unary("sigmoid", [](const Array& x) { return sigmoid(x); });
    check_unary("tanh", [](const Array& x) { return tanh_(x); });
    check_unary("softplus", [](const Array& x) { return softplus(x); });
    check_unary("affine", [](const Array& x) { return affine(x, -1.7, 0.3); });

    {
        
        auto report = testutil::gradcheck({b}, [&] { return testutil::project(log_(b)); });
        CHECK(report.max_rel_err < kGradTol);
    }
    {
        
        auto report = testutil::gradcheck({b}, [&] { return testutil::project(recip(b)); });
        CHECK(report.max_rel_err < kGradTol);
    }
    {
        
        auto report = testutil::gradcheck(
            {a, b}, [&] { return testutil::project(mul(sub(a, b), add(a, b))); });
        CHECK(report.max_rel_err < kGradTol);
    }
}

TEST_CASE("gradient accumulates when an input is used twice") {
    Array a = Array::leaf({1}, {3.0});
    Array loss = mul(a, a);
    backward(loss);
    CHECK(a.grad()[0] == doctest::Approx(6.0));
}

TEST_CASE("broadcast ops") {
    Rng rng(5);
    Array s = Array::leaf({1}, {2.5});
    Array big = broadcast_scalar(s, {2, 3});
    CHECK(big.value() == std::vector<double>(6, 2.5));
    {
        
        auto report =
            testutil::gradcheck({s}, [&] { return testutil::project(broadcast_scalar(s, {2, 3})); });
        CHECK(report.max_rel_err < kGradTol);
    }

    Array x = testutil::random_leaf({3, 4}, rng);
    Array bias = testutil::random_leaf({4}, rng);
    Array biased = add_bias(x, bias);
    CHECK(biased.value()[5] == doctest::Approx(x.value()[5] + bias.value()[1]));
    {
        
        auto report = testutil::gradcheck(
            {x, bias}, [&] { return testutil::project(add_bias(x, bias)); });
        CHECK(report.max_rel_err < kGradTol);
    }
    {
        
        auto report = testutil::gradcheck(
            {x, bias}, [&] { return testutil::project(mul_last(x, bias)); });
        CHECK(report.max_rel_err < kGradTol);
    }

    Array cube = testutil::random_leaf({2, 3, 4}, rng);
    Array plane = testutil::random_leaf({3, 4}, rng);
    Array summed = add_mat_bcast(cube, plane);
    CHECK(summed.value()[12 + 7] == doctest::Approx(cube.value()[19] + plane.value()[7]));
    {
        
        auto report = testutil::gradcheck(
            {cube, plane}, [&] { return testutil::project(add_mat_bcast(cube, plane)); });
        CHECK(report.max_rel_err < kGradTol);
    }

    Array u = testutil::random_leaf({3}, rng);
    Array w = testutil::random_leaf({5}, rng);
    CHECK(outer_mul(u, w).value()[1 * 5 + 3] == doctest::Approx(u.value()[1] * w.value()[3]));
    CHECK(outer_sub(u, w).value()[2 * 5 + 4] == doctest::Approx(u.value()[2] - w.value()[4]));
    {
        
        auto report =
            testutil::gradcheck({u, w}, [&] { return testutil::project(outer_mul(u, w)); });
        CHECK(report.max_rel_err < kGradTol);
    }
    {
        
        auto report =
            testutil::gradcheck({u, w}, [&] { return testutil::project(outer_sub(u, w)); });
        CHECK(report.max_rel_err < kGradTol);
    }
}

TEST_CASE("structural ops") {
    Rng rng(17);

    SUBCASE("reshape round trips values and gradients") {
        Array x = testutil::random_leaf({2, 6}, rng);
        Array y = reshape(x, {3, 4});
        CHECK(y.value() == x.value());
        CHECK_THROWS(reshape(x, {5, 2}));
        
        auto report =
            testutil::gradcheck({x}, [&] { return testutil::project(reshape(x, {4, 3})); });
        CHECK(report.max_rel_err < kGradTol);
    }

    SUBCASE("concat along each axis") {
        Array a = Array::leaf({1, 2}, {1, 2});
        Array b = Array::leaf({1, 2}, {3, 4});
        CHECK(concat({a, b}, 0).value() == std::vector<double>{1, 2, 3, 4});
        CHECK(concat({a, b}, 1).value() == std::vector<double>{1, 2, 3, 4});
        CHECK(concat({a, b}, 0).shape() == Shape{2, 2});
        CHECK(concat({a, b}, 1).shape() == Shape{1, 4});

        Array p = testutil::random_leaf({2, 2, 3}, rng);
        Array q = testutil::random_leaf({2, 1, 3}, rng);
        Array r = concat({p, q}, 1);
        CHECK(r.shape() == Shape{2, 3, 3});
        CHECK(r.value()[2 * 3 * 3 - 1] == q.value()[5]);
        CHECK_THROWS(concat({p, testutil::random_leaf({2, 1, 4}, rng)}, 1));

        
        auto report =
            testutil::gradcheck({p, q}, [&] { return testutil::project(concat({p, q}, 1)); });
        CHECK(report.max_rel_err < kGradTol);
    }

    SUBCASE("narrow slices and scatters back") {
        Array x = Array::leaf({2, 4}, {0, 1, 2, 3, 10, 11, 12, 13});
        Array mid = narrow(x, 1, 1, 2);
        CHECK(mid.value() == std::vector<double>{1, 2, 11, 12});
        CHECK_THROWS(narrow(x, 1, 3, 2));
        CHECK_THROWS(narrow(x, 1, 0, 0));
        
        auto report =
            testutil::gradcheck({x}, [&] { return testutil::project(narrow(x, 1, 1, 3)); });
        CHECK(report.max_rel_err < kGradTol);
    }

    SUBCASE("transpose2 swaps the trailing axes") {
        Array x = Array::leaf({2, 3}, {1, 2, 3, 4, 5, 6});
        CHECK(transpose2(x).shape() == Shape{3, 2});
        CHECK(transpose2(x).value() == std::vector<double>{1, 4, 2, 5, 3, 6});
        Array c = testutil::random_leaf({2, 2, 3}, rng);
        CHECK(transpose2(c).shape() == Shape{2, 3, 2});
        
        auto report =
            testutil::gradcheck({c}, [&] { return testutil::project(transpose2(c)); });
        CHECK(report.max_rel_err < kGradTol);
    }

    SUBCASE("lookup gathers rows and accumulates repeated ids") {
        Array table = Array::leaf({3, 2}, {0, 1, 10, 11, 20, 21});
        Array rows = lookup(table, {2, 0, 2});
        CHECK(rows.value() == std::vector<double>{20, 21, 0, 1, 20, 21});
        CHECK_THROWS(lookup(table, {3}));
        CHECK_THROWS(lookup(table, {-1}));
        backward(sum_all(rows));
        CHECK(table.grad() == std::vector<double>{1, 1, 0, 0, 2, 2});
    }

    SUBCASE("gather_cols picks one entry per row") {
        Array x = Array::leaf({2, 3}, {1, 2, 3, 4, 5, 6});
        Array picked = gather_cols(x, {2, 0});
        CHECK(picked.value() == std::vector<double>{3, 4});
        CHECK_THROWS(gather_cols(x, {3, 0}));
        CHECK_THROWS(gather_cols(x, {0}));
        backward(sum_all(picked));
        CHECK(x.grad() == std::vector<double>{0, 0, 1, 1, 0, 0});
    }
}

TEST_CASE("reductions") {
    Array x = Array::leaf({2, 2}, {1, 2, 3, 4});
    CHECK(sum_all(x).item() == 10.0);
    CHECK(mean_all(x).item() == 2.5);

    Array seq = Array::leaf({1, 2, 3}, {0, 1, 2, 4, 5, 6});
    Array pooled = avg_pool_time(seq);
    CHECK(pooled.shape() == Shape{1, 3});
    CHECK(pooled.value() == std::vector<double>{2, 3, 4});

    Rng rng(29);
    Array c = testutil::random_leaf({2, 4, 3}, rng);
    auto report = testutil::gradcheck({c}, [&] { return testutil::project(avg_pool_time(c)); });
    CHECK(report.max_rel_err < kGradTol);
}

TEST_CASE("matmul variants agree with manual products") {
    Array a = Array::leaf({2, 3}, {1, 2, 3, 4, 5, 6});
    Array b = Array::leaf({3, 2}, {7, 8, 9, 10, 11, 12});
    Array c = matmul(a, b);
    CHECK(c.value() == std::vector<double>{58, 64, 139, 154});
    CHECK_THROWS(matmul(a, a));

    Rng rng(31);
    Array stack = testutil::random_leaf({4, 2, 3}, rng);
    Array shared = testutil::random_leaf({3, 5}, rng);
    Array folded = matmul(stack, shared);
    CHECK(folded.shape() == Shape{4, 2, 5});
    // group 2, row 1 against column 3 by hand
    double want = 0.0;
    for (int k = 0; k < 3; ++k)
        want += stack.value()[2 * 6 + 1 * 3 + k] * shared.value()[k * 5 + 3];
    CHECK(folded.value()[2 * 10 + 1 * 5 + 3] == doctest::Approx(want));

    Array rhs = testutil::random_leaf({4, 3, 5}, rng);
    Array grouped = bmm(stack, rhs);
    CHECK(grouped.shape() == Shape{4, 2, 5});
    want = 0.0;
    for (int k = 0; k < 3; ++k)
        want += stack.value()[3 * 6 + 0 * 3 + k] * rhs.value()[3 * 15 + k * 5 + 2];
    CHECK(grouped.value()[3 * 10 + 0 * 5 + 2] == doctest::Approx(want));
    CHECK_THROWS(bmm(stack, testutil::random_leaf({3, 3, 5}, rng)));

    
    auto report = testutil::gradcheck(
        {a, b}, [&] { return testutil::project(matmul(a, b)); });
    CHECK(report.max_rel_err < kGradTol);
    report = testutil::gradcheck(
        {stack, shared}, [&] { return testutil::project(matmul(stack, shared)); });
    CHECK(report.max_rel_err < kGradTol);
    report = testutil::gradcheck(
        {stack, rhs}, [&] { return testutil::project(bmm(stack, rhs)); });
    CHECK(report.max_rel_err < kGradTol);
}

TEST_CASE("causal convolution") {
    // Single channel, two taps: out[t] = w0 * x[t-1] + w1 * x[t] + b.
    Array x = Array::leaf({1, 3, 1}, {1, 2, 3});
    Array w = Array::leaf({2, 1, 1}, {10, 100});
    Array b = Array::leaf({1}, {0.5});
    Array out = conv1d_causal(x, w, b);
    CHECK(out.shape() == Shape{1, 3, 1});
    CHECK(out.value()[0] == doctest::Approx(100.5));        // pad * 10 + 1 * 100 + 0.5
    CHECK(out.value()[1] == doctest::Approx(210.5));
    CHECK(out.value()[2] == doctest::Approx(320.5));

    Rng rng(37);
    Array xs = testutil::random_leaf({2, 5, 3}, rng);
    Array ws = testutil::random_leaf({2, 3, 4}, rng);
    Array bs = testutil::random_leaf({4}, rng);
    auto report = testutil::gradcheck(
        {xs, ws, bs}, [&] { return testutil::project(conv1d_causal(xs, ws, bs)); });
    CHECK(report.max_rel_err < kGradTol);
}

TEST_CASE("softmax family") {
    Array x = Array::leaf({2, 3}, {1, 2, 3, -1, 0, 1});
    Array sm = softmax_last(x);
    double row0 = sm.value()[0] + sm.value()[1] + sm.value()[2];
    CHECK(row0 == doctest::Approx(1.0));
    Array lsm = log_softmax_last(x);
    for (int i = 0; i < 6; ++i) CHECK(std::exp(lsm.value()[i]) == doctest::Approx(sm.value()[i]));

    Rng rng(41);
    Array y = testutil::random_leaf({3, 5}, rng, -3.0, 3.0);
    auto report = testutil::gradcheck({y}, [&] { return testutil::project(softmax_last(y)); });
    CHECK(report.max_rel_err < kGradTol);
    report = testutil::gradcheck({y}, [&] { return testutil::project(log_softmax_last(y)); });
    CHECK(report.max_rel_err < kGradTol);
}

TEST_CASE("layer norm normalizes rows") {
    Rng rng(43);
    Array x = testutil::random_leaf({4, 6}, rng, -2.0, 2.0);
    Array gain = Array::leaf({6}, std::vector<double>(6, 1.0));
    Array bias = Array::leaf({6}, std::vector<double>(6, 0.0));
    Array y = layer_norm(x, gain, bias);
    for (int r = 0; r < 4; ++r) {
        double mean = 0.0, var = 0.0;
        for (int c = 0; c < 6; ++c) mean += y.value()[r * 6 + c];
        mean /= 6.0;
        for (int c = 0; c < 6; ++c) {
            double d = y.value()[r * 6 + c] - mean;
            var += d * d;
        }
        CHECK(mean == doctest::Approx(0.0).epsilon(1e-9));
        CHECK(var / 6.0 == doctest::Approx(1.0).epsilon(1e-3));
    }
    
    Array g2 = testutil::random_leaf({6}, rng, 0.5, 1.5);
    Array b2 = testutil::random_leaf({6}, rng);
    auto report = testutil::gradcheck(
        {x, g2, b2}, [&] { return testutil::project(layer_norm(x, g2, b2)); });
    CHECK(report.max_rel_err < kGradTol);
}

TEST_CASE("batch norm train and eval modes") {
    Rng rng(47);
    Array x = testutil::random_leaf({8, 3}, rng, -2.0, 2.0);
    Array gain = testutil::random_leaf({3}, rng, 0.5, 1.5);
    Array bias = testutil::random_leaf({3}, rng);
    std::vector<double> mean, var;
    Array y = batch_norm_train(x, gain, bias, &mean, &var);
    REQUIRE(mean.size() == 3);
    // column statistics of the normalized output: mean 0 before affine
    for (int c = 0; c < 3; ++c) {
        double m = 0.0;
        for (int r = 0; r < 8; ++r) m += (y.value()[r * 3 + c] - bias.value()[c]) / gain.value()[c];
        CHECK(m / 8.0 == doctest::Approx(0.0).epsilon(1e-9));
    }
    
    auto report = testutil::gradcheck({x, gain, bias}, [&] {
        return testutil::project(batch_norm_train(x, gain, bias, nullptr, nullptr));
    });
    CHECK(report.max_rel_err < kGradTol);

    auto report_eval = testutil::gradcheck({x, gain, bias}, [&] {
        return testutil::project(batch_norm_eval(x, gain, bias, mean, var));
    });
    CHECK(report_eval.max_rel_err < kGradTol);
    CHECK_THROWS(batch_norm_train(narrow(x, 0, 0, 1), gain, bias, nullptr, nullptr));
}

TEST_CASE("backward protocol") {
    Array a = Array::leaf({2}, {1, 2});
    Array loss = sum_all(mul(a, a));
    CHECK_THROWS(backward(mul(a, a)));  // not scalar
    backward(loss);
    CHECK(a.grad() == std::vector<double>{2, 4});
    CHECK_THROWS(backward(loss));  // graph consumed

    {
        NoGradGuard ng;
        Array quiet = mul(a, a);
        CHECK_FALSE(quiet.requires_grad());
        CHECK_THROWS(backward(sum_all(quiet)));
    }

    Array frozen = Array::from_data({2}, {1, 2});
    Array out = sum_all(mul(frozen, frozen));
    CHECK_FALSE(out.requires_grad());
}

TEST_CASE("adam requires gradients and optimizes") {
    ParamSet params;
    Rng rng(53);
    Array w = params.add("fit/w", Array::from_data({1}, {0.0}));
    Array unused = params.add("fit/unused", Array::from_data({1}, {1.0}));

    AdamConfig cfg;
    cfg.lr = 0.1;
    cfg.weight_decay = 0.0;
    Adam opt(cfg);

    Array loss = mean_all(mul(sub(w, Array::full({1}, 3.0)), sub(w, Array::full({1}, 3.0))));
    backward(loss);
    CHECK_THROWS_WITH_AS(opt.step(params), doctest::Contains("fit/unused"), std::runtime_error);

    ParamSet only;
    Array w2 = only.add("w", Array::from_data({1}, {0.0}));
    Adam opt2(cfg);
    for (int i = 0; i < 400; ++i) {
        Array target = Array::full({1}, 3.0);
        Array diff = sub(w2, target);
        Array l = mean_all(mul(diff, diff));
        backward(l);
        opt2.step(only);
    }
    CHECK(w2.value()[0] == doctest::Approx(3.0).epsilon(1e-3));
    CHECK(opt2.steps_taken() == 400);
}

TEST_CASE("non-trainable parameters are persisted but not optimized") {
    ParamSet params;
    Array w = params.add("w", Array::from_data({1}, {1.0}));
    Array stat = params.add("stat", Array::from_data({2}, {5.0, 6.0}), false);
    CHECK(params.trainable_count() == 1);

    Adam opt(AdamConfig{});
    Array l = mean_all(mul(w, w));
    backward(l);
    CHECK_NOTHROW(opt.step(params));
    CHECK(stat.value() == std::vector<double>{5.0, 6.0});
}

TEST_CASE("checkpoint round trip is exact and tamper evident") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "timing_ckpt_test";
    fs::create_directories(dir);
    const std::string path = (dir / "model.ckpt").string();

    ParamSet params;
    Rng rng(59);
    params.add_uniform("enc/w", {3, 4}, rng, -1.0, 1.0);
    params.add("enc/odd", Array::from_data({3}, {1.0 / 3.0, -0.0, 1e-300}));
    params.add("bn/running_mean", Array::from_data({2}, {0.25, -0.75}), false);

    save_checkpoint(path, R"({"embed_dim":50})", params.all());
    Checkpoint loaded = load_checkpoint(path);
    CHECK(loaded.config_json == R"({"embed_dim":50})");
    REQUIRE(loaded.entries.size() == 3);
    CHECK(loaded.entries[1].second.value()[0] == 1.0 / 3.0);  // bit exact
    CHECK(loaded.entries[1].second.value()[2] == 1e-300);

    ParamSet fresh;
    fresh.add_zeros("enc/w", {3, 4});
    fresh.add_zeros("enc/odd", {3});
    fresh.add_zeros("bn/running_mean", {2}, false);
    assign_from_checkpoint(loaded, fresh);
    CHECK(fresh.at("enc/w").array.value() == params.at("enc/w").array.value());

    ParamSet wrong_shape;
    wrong_shape.add_zeros("enc/w", {4, 3});
    wrong_shape.add_zeros("enc/odd", {3});
    wrong_shape.add_zeros("bn/running_mean", {2}, false);
    CHECK_THROWS_WITH_AS(assign_from_checkpoint(loaded, wrong_shape),
                         doctest::Contains("shape mismatch"), std::runtime_error);

    ParamSet missing;
    missing.add_zeros("enc/w", {3, 4});
    missing.add_zeros("enc/odd", {3});
    CHECK_THROWS(assign_from_checkpoint(loaded, missing));

    ParamSet extra;
    extra.add_zeros("enc/w", {3, 4});
    extra.add_zeros("enc/odd", {3});
    extra.add_zeros("bn/running_mean", {2}, false);
    extra.add_zeros("left/behind", {1});
    CHECK_THROWS_WITH_AS(assign_from_checkpoint(loaded, extra), doctest::Contains("left/behind"),
                         std::runtime_error);

    // flip one byte in the middle of the file
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(120);
    f.put('Z');
    f.close();
    CHECK_THROWS_WITH_AS(load_checkpoint(path), doctest::Contains("integrity"), std::runtime_error);
    fs::remove_all(dir);
}

TEST_CASE("parameter names are validated") {
    ParamSet params;
    params.add_zeros("ok/name", {1});
    CHECK_THROWS(params.add_zeros("ok/name", {1}));   // duplicate
    CHECK_THROWS(params.add_zeros("bad name", {1}));  // whitespace
    CHECK_THROWS(params.add_zeros("", {1}));
}

#include <cmath>
#include <numbers>

#include "doctest.h"
#include "testutil.hpp"
#include "timing/embed/layers.hpp"

using namespace timing;
using diff::Array;

namespace {

// builds a layer whose parameters are overwritten with chosen values
template <typename Layer, typename... Args>
Layer with_values(diff::ParamSet& params, const std::string& prefix,
                  const std::vector<std::pair<std::string, std::vector<double>>>& values,
                  Args&&... args) {
    util::Rng rng(11);
    Layer layer(params, prefix, std::forward<Args>(args)..., rng);
    for (const auto& [name, v] : values) params.at(prefix + "/" + name).array.mutable_value() = v;
    return layer;
}

}  // namespace

TEST_CASE("normalization maps both schemas into the unit interval") {
    CHECK(embed::normalize_time(0, data::Schema::kAn) == 0.0);
    CHECK(embed::normalize_time(43200, data::Schema::kAn) == 0.5);
    CHECK(embed::normalize_time(86399, data::Schema::kAn) < 1.0);
    CHECK(embed::normalize_date(0, data::Schema::kAn) == 0.0);
    CHECK(embed::normalize_date(365, data::Schema::kAn) < 1.0);

    // 3-hour ranges use the midpoint
    CHECK(embed::normalize_time(0, data::Schema::kSmartSense) == doctest::Approx(0.0625));
    CHECK(embed::normalize_time(7, data::Schema::kSmartSense) == doctest::Approx(0.9375));
    CHECK(embed::normalize_date(6, data::Schema::kSmartSense) == doctest::Approx(6.0 / 7.0));
}

TEST_CASE("time2vec closed forms") {
    diff::ParamSet params;

    SUBCASE("zero input with zero phase gives the zero vector") {
        auto layer = with_values<embed::Time2VecLayer>(params, "t",
                                                       {{"omega", {1, 1}}, {"psi", {0, 0}}}, 2);
        Array out = layer.forward(Array::from_data({1}, {0.0}));
        CHECK(out.value()[0] == 0.0);
        CHECK(out.value()[1] == 0.0);
    }

    SUBCASE("direct evaluation of linear and sine elements") {
        auto layer = with_values<embed::Time2VecLayer>(params, "t",
                                                       {{"omega", {2, 3}}, {"psi", {1, 0.5}}}, 2);
        Array out = layer.forward(Array::from_data({1}, {2.0}));
        CHECK(out.value()[0] == doctest::Approx(5.0));
        CHECK(out.value()[1] == doctest::Approx(std::sin(6.5)));
    }

    SUBCASE("sine elements repeat with period 2 pi over omega") {
        auto layer = with_values<embed::Time2VecLayer>(
            params, "t", {{"omega", {0.7, 1.3, 2.9}}, {"psi", {0.2, -0.4, 1.0}}}, 3);
        const double tau = 0.37;
        for (int i = 1; i < 3; ++i) {
            const double w = params.at("t/omega").array.value()[static_cast<std::size_t>(i)];
            Array a = layer.forward(Array::from_data({1}, {tau}));
            Array b = layer.forward(Array::from_data({1}, {tau + 2.0 * std::numbers::pi / w}));
            const std::size_t idx = static_cast<std::size_t>(i);
            CHECK(std::abs(a.value()[idx] - b.value()[idx]) < 1e-9);
        }
    }

    SUBCASE("periodic elements stay inside [-1, 1] for random parameters") {
        util::Rng rng(5);
        embed::Time2VecLayer layer(params, "r", 8, rng);
        for (int trial = 0; trial < 200; ++trial) {
            Array out = layer.forward(Array::from_data({1}, {rng.uniform() * 100 - 50}));
            for (std::size_t i = 1; i < out.value().size(); ++i) {
                CHECK(out.value()[i] >= -1.0);
                CHECK(out.value()[i] <= 1.0);
            }
        }
    }

    SUBCASE("sizes below two are rejected") {
        util::Rng rng(1);
        CHECK_THROWS_AS(embed::Time2VecLayer(params, "bad", 1, rng), std::invalid_argument);
    }

    SUBCASE("batched forward matches per-element forward") {
        util::Rng rng(9);
        embed::Time2VecLayer layer(params, "b", 4, rng);
        Array batch = layer.forward(Array::from_data({3}, {0.1, 0.5, 0.9}));
        for (int i = 0; i < 3; ++i) {
            Array single = layer.forward(Array::from_data({1}, {0.1 + 0.4 * i}));
            for (int j = 0; j < 4; ++j)
                CHECK(batch.value()[static_cast<std::size_t>(i * 4 + j)] ==
                      doctest::Approx(single.value()[static_cast<std::size_t>(j)]));
        }
    }
}

TEST_CASE("rbf closed forms") {
    diff::ParamSet params;
    // raw widths chosen so softplus gives sigma = [0.5, 0.25]
    const double raw_half = std::log(std::expm1(0.5));
    const double raw_quarter = std::log(std::expm1(0.25));
    auto layer = with_values<embed::RbfLayer>(
        params, "r", {{"mu", {0.2, 0.8}}, {"sigma_raw", {raw_half, raw_quarter}}}, 2);

    SUBCASE("unit response exactly at the reference point") {
        Array out = layer.forward(Array::from_data({1}, {0.2}));
        CHECK(out.value()[0] == doctest::Approx(1.0));
        Array out2 = layer.forward(Array::from_data({1}, {0.8}));
        CHECK(out2.value()[1] == doctest::Approx(1.0));
    }

    SUBCASE("one width away decays to 1/e") {
        Array out = layer.forward(Array::from_data({1}, {0.2 + 0.5}));
        CHECK(out.value()[0] == doctest::Approx(std::exp(-1.0)));
    }

    SUBCASE("response is symmetric around the reference point") {
        Array lo = layer.forward(Array::from_data({1}, {0.2 - 0.13}));
        Array hi = layer.forward(Array::from_data({1}, {0.2 + 0.13}));
        CHECK(lo.value()[0] == doctest::Approx(hi.value()[0]));
    }

    SUBCASE("outputs stay inside (0, 1] for random inputs and parameters") {
        util::Rng rng(17);
        for (int trial = 0; trial < 50; ++trial) {
            diff::ParamSet p;
            embed::RbfLayer random_layer(p, "q", 5, rng);
            p.at("q/mu").array.mutable_value() = {rng.uniform(), rng.uniform(), rng.uniform(),
                                                  rng.uniform(), rng.uniform()};
            p.at("q/sigma_raw").array.mutable_value() = {
                rng.uniform() * 4 - 2, rng.uniform() * 4 - 2, rng.uniform() * 4 - 2,
                rng.uniform() * 4 - 2, rng.uniform() * 4 - 2};
            Array out = random_layer.forward(Array::from_data({1}, {rng.uniform() * 20 - 10}));
            for (double v : out.value()) {
                CHECK(v > 0.0);
                CHECK(v <= 1.0);
            }
        }
    }

    SUBCASE("reference points start evenly spaced with softplus width twice the spacing") {
        diff::ParamSet p;
        util::Rng rng(3);
        embed::RbfLayer fresh(p, "init", 4, rng);
        const auto& mu = p.at("init/mu").array.value();
        CHECK(mu == std::vector<double>{0.0, 0.25, 0.5, 0.75});
        const double sigma = std::log1p(std::exp(p.at("init/sigma_raw").array.value()[0]));
        CHECK(sigma == doctest::Approx(0.5));
    }
}

TEST_CASE("lookup embedding returns table rows and rejects bad ids") {
    diff::ParamSet params;
    util::Rng rng(2);
    embed::LookupEmbedding table(params, "emb", 3, 2, rng);
    params.at("emb/table").array.mutable_value() = {1, 2, 3, 4, 5, 6};

    Array out = table.forward({2, 0});
    CHECK(out.shape() == diff::Shape{2, 2});
    CHECK(out.value() == std::vector<double>{5, 6, 1, 2});
    CHECK_THROWS_AS(table.forward({3}), std::out_of_range);
    CHECK_THROWS_AS(table.forward({-1}), std::out_of_range);
}

TEST_CASE("diff scale and the time difference path") {
    diff::ParamSet params;
    util::Rng rng(4);
    embed::DiffScale scale(params, "scale");
    embed::Time2VecLayer t2v(params, "t2v", 5, rng);

    SUBCASE("factor starts at one over a day of seconds") {
        Array out = scale.apply(Array::from_data({2}, {86400.0, 43200.0}));
        CHECK(out.value()[0] == doctest::Approx(1.0));
        CHECK(out.value()[1] == doctest::Approx(0.5));
    }

    SUBCASE("all-zero diffs embed to time2vec of zero") {
        Array zeros = embed::embed_time_diff(Array::from_data({3}, {0, 0, 0}), scale, t2v);
        Array reference = t2v.forward(Array::from_data({1}, {0.0}));
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 5; ++j)
                CHECK(zeros.value()[static_cast<std::size_t>(i * 5 + j)] ==
                      doctest::Approx(reference.value()[static_cast<std::size_t>(j)]));
    }

    SUBCASE("zero factor annihilates arbitrary diffs") {
        params.at("scale/factor").array.mutable_value() = {0.0};
        Array out = embed::embed_time_diff(Array::from_data({2}, {1234.0, 77777.0}), scale, t2v);
        Array reference = t2v.forward(Array::from_data({1}, {0.0}));
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 5; ++j)
                CHECK(out.value()[static_cast<std::size_t>(i * 5 + j)] ==
                      doctest::Approx(reference.value()[static_cast<std::size_t>(j)]));
    }

    SUBCASE("doubling the factor equals doubling the diffs") {
        Array diffs = Array::from_data({3}, {100.0, 2000.0, 30000.0});
        Array doubled_diffs = Array::from_data({3}, {200.0, 4000.0, 60000.0});
        Array via_data = embed::embed_time_diff(doubled_diffs, scale, t2v);
        params.at("scale/factor").array.mutable_value() = {2.0 / 86400.0};
        Array via_factor = embed::embed_time_diff(diffs, scale, t2v);
        for (std::size_t i = 0; i < via_data.value().size(); ++i)
            CHECK(via_factor.value()[i] == doctest::Approx(via_data.value()[i]));
    }
}

TEST_CASE("six-tuple action embedding") {
    diff::ParamSet params;
    util::Rng rng(21);
    const int d = 6;
    embed::LookupEmbedding device(params, "embed/device", 4, d, rng);
    embed::LookupEmbedding control(params, "embed/control", 5, d, rng);
    embed::Time2VecLayer time_t2v(params, "embed/time_t2v", d, rng);
    embed::Time2VecLayer date_t2v(params, "embed/date_t2v", d, rng);
    auto time_rbf = embed::RadialSlot::make_rbf(params, "embed/time_rbf", d, rng);
    auto date_rbf = embed::RadialSlot::make_rbf(params, "embed/date_rbf", d, rng);
    embed::ActionFieldLayers layers{&device, &control, &time_t2v, &time_rbf, &date_t2v, &date_rbf};

    data::ActionRecord base;
    base.day = 120;
    base.time = 30000;
    base.device = 1;
    base.control = 3;
    base.user = 0;

    SUBCASE("all six embeddings share the model dimension") {
        auto fields = embed::embed_action_fields({base, base}, data::Schema::kAn, layers);
        for (const Array* a : {&fields.device, &fields.control, &fields.time_periodic,
                               &fields.time_radial, &fields.date_periodic, &fields.date_radial})
            CHECK(a->shape() == diff::Shape{2, d});
    }

    SUBCASE("identical records embed identically") {
        auto fields = embed::embed_action_fields({base, base}, data::Schema::kAn, layers);
        for (const Array* a : {&fields.device, &fields.control, &fields.time_periodic,
                               &fields.time_radial, &fields.date_periodic, &fields.date_radial})
            for (int j = 0; j < d; ++j)
                CHECK(a->value()[static_cast<std::size_t>(j)] ==
                      a->value()[static_cast<std::size_t>(d + j)]);
    }

    SUBCASE("changing only the control changes only the control embedding") {
        data::ActionRecord other = base;
        other.control = 4;
        auto fields = embed::embed_action_fields({base, other}, data::Schema::kAn, layers);
        auto same = [d](const Array& a) {
            for (int j = 0; j < d; ++j)
                if (a.value()[static_cast<std::size_t>(j)] !=
                    a.value()[static_cast<std::size_t>(d + j)])
                    return false;
            return true;
        };
        CHECK(same(fields.device));
        CHECK_FALSE(same(fields.control));
        CHECK(same(fields.time_periodic));
        CHECK(same(fields.time_radial));
        CHECK(same(fields.date_periodic));
        CHECK(same(fields.date_radial));
    }

    SUBCASE("vocabulary overflow is rejected") {
        data::ActionRecord bad = base;
        bad.device = 4;
        CHECK_THROWS_AS(embed::embed_action_fields({bad}, data::Schema::kAn, layers),
                        std::out_of_range);
    }

    SUBCASE("the radial slot swaps to a second time2vec for the rbf ablation") {
        diff::ParamSet p2;
        util::Rng rng2(8);
        auto slot = embed::RadialSlot::make_time2vec(p2, "alt", 4, rng2);
        CHECK_FALSE(slot.is_radial());
        CHECK(p2.contains("alt/omega"));
        CHECK(p2.contains("alt/psi"));
        CHECK_FALSE(p2.contains("alt/mu"));
        Array out = slot.forward(Array::from_data({1}, {0.25}));
        CHECK(out.shape() == diff::Shape{1, 4});
    }
}

TEST_CASE("embedding gradients match finite differences") {
    diff::ParamSet params;
    util::Rng rng(33);
    const int d = 4;
    embed::LookupEmbedding device(params, "g/device", 3, d, rng);
    embed::LookupEmbedding control(params, "g/control", 3, d, rng);
    embed::Time2VecLayer time_t2v(params, "g/time_t2v", d, rng);
    embed::Time2VecLayer date_t2v(params, "g/date_t2v", d, rng);
    auto time_rbf = embed::RadialSlot::make_rbf(params, "g/time_rbf", d, rng);
    auto date_rbf = embed::RadialSlot::make_rbf(params, "g/date_rbf", d, rng);
    embed::DiffScale scale(params, "g/scale");
    embed::Time2VecLayer diff_t2v(params, "g/diff_t2v", d, rng);
    embed::ActionFieldLayers layers{&device, &control, &time_t2v, &time_rbf, &date_t2v, &date_rbf};

    // times chosen so no normalized value sits on an rbf reference point,
    // where the distance kink makes finite differences disagree
    std::vector<data::ActionRecord> records(3);
    records[0] = {100, 21950, 0, 1, 0, -1};
    records[1] = {100, 46800, 1, 2, 0, -1};
    records[2] = {101, 7300, 2, 0, 0, -1};

    std::vector<Array> leaves;
    for (auto& p : params.all()) leaves.push_back(p.array);

    auto build = [&] {
        auto fields = embed::embed_action_fields(records, data::Schema::kAn, layers);
        // minutes-scale gaps: the scale factor's derivative grows with the
        // raw gap size, and hour-scale gaps push central differences past
        // the tolerance through truncation error alone
        Array diffs = Array::from_data({2}, {300.0, 1500.0});
        Array z3 = embed::embed_time_diff(diffs, scale, diff_t2v);
        Array all = diff::concat({fields.device, fields.control, fields.time_periodic,
                                  fields.time_radial, fields.date_periodic, fields.date_radial},
                                 1);
        return diff::add(testutil::project(all, 5),
                         testutil::project(z3, 6));
    };

    auto report = testutil::gradcheck(leaves, build);
    INFO(report.worst);
    CHECK(report.max_rel_err < 1e-4);
}

#include "timing/embed/layers.hpp"

#include <cmath>
#include <stdexcept>

namespace timing::embed {

using diff::Array;

double normalize_time(int time, data::Schema schema) {
    if (schema == data::Schema::kAn) return static_cast<double>(time) / data::kSecondsPerDay;
    // 3-hour range index; use the midpoint of the range
    return (static_cast<double>(time) + 0.5) / data::kSmartSenseRanges;
}

double normalize_date(int day, data::Schema schema) {
    if (schema == data::Schema::kAn) return static_cast<double>(day) / 366.0;
    return static_cast<double>(day) / 7.0;
}

Time2VecLayer::Time2VecLayer(diff::ParamSet& params, const std::string& prefix, int k,
                             util::Rng& rng)
    : k_(k) {
    if (k < 2)
        throw std::invalid_argument("time2vec: size " + std::to_string(k) +
                                    " too small, needs the linear term plus at least one sine");
    omega_ = params.add_uniform(prefix + "/omega", {k}, rng, -1.0, 1.0);
    psi_ = params.add_uniform(prefix + "/psi", {k}, rng, -1.0, 1.0);
}

Array Time2VecLayer::forward(const Array& tau) const {
    if (tau.ndim() != 1)
        throw std::invalid_argument("time2vec: expected a 1-D batch of scalars, got " +
                                    diff::shape_str(tau.shape()));
    Array pre = diff::add_bias(diff::outer_mul(tau, omega_), psi_);  // {N, k}
    Array linear = diff::narrow(pre, 1, 0, 1);
    Array periodic = diff::sin_(diff::narrow(pre, 1, 1, k_ - 1));
    return diff::concat({linear, periodic}, 1);
}

RbfLayer::RbfLayer(diff::ParamSet& params, const std::string& prefix, int k, util::Rng&)
    : k_(k) {
    if (k < 1) throw std::invalid_argument("rbf: size must be positive");
    std::vector<double> centers(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) centers[static_cast<std::size_t>(i)] = static_cast<double>(i) / k;
    mu_ = params.add(prefix + "/mu", Array::leaf({k}, std::move(centers)));
    // raw value whose softplus is twice the center spacing, so neighbouring
    // bumps overlap at initialization
    const double width = 2.0 / k;
    const double raw = std::log(std::expm1(width));
    sigma_raw_ = params.add_full(prefix + "/sigma_raw", {k}, raw);
}

Array RbfLayer::forward(const Array& tau) const {
    if (tau.ndim() != 1)
        throw std::invalid_argument("rbf: expected a 1-D batch of scalars, got " +
                                    diff::shape_str(tau.shape()));
    Array inv_sigma = diff::recip(diff::softplus(sigma_raw_));           // {k}
    Array neg_dist = diff::neg_abs(diff::outer_sub(tau, mu_));           // {N, k}
    return diff::exp_(diff::mul_last(neg_dist, inv_sigma));
}

LookupEmbedding::LookupEmbedding(diff::ParamSet& params, const std::string& prefix,
                                 int vocabulary, int dim, util::Rng& rng)
    : vocabulary_(vocabulary), dim_(dim) {
    if (vocabulary < 1 || dim < 1)
        throw std::invalid_argument("lookup embedding: vocabulary and dimension must be positive");
    table_ = params.add_uniform(prefix + "/table", {vocabulary, dim}, rng, -0.05, 0.05);
}

Array LookupEmbedding::forward(const std::vector<int>& ids) const {
    return diff::lookup(table_, ids);
}

DiffScale::DiffScale(diff::ParamSet& params, const std::string& prefix) {
    factor_ = params.add_full(prefix + "/factor", {1}, 1.0 / data::kSecondsPerDay);
}

Array DiffScale::apply(const Array& diffs) const {
    return diff::mul(diffs, diff::broadcast_scalar(factor_, diffs.shape()));
}

RadialSlot RadialSlot::make_rbf(diff::ParamSet& params, const std::string& prefix, int k,
                                util::Rng& rng) {
    RadialSlot slot;
    slot.rbf_.emplace(params, prefix, k, rng);
    return slot;
}

RadialSlot RadialSlot::make_time2vec(diff::ParamSet& params, const std::string& prefix, int k,
                                     util::Rng& rng) {
    RadialSlot slot;
    slot.t2v_.emplace(params, prefix, k, rng);
    return slot;
}

Array RadialSlot::forward(const Array& tau) const {
    return rbf_ ? rbf_->forward(tau) : t2v_->forward(tau);
}

int RadialSlot::size() const { return rbf_ ? rbf_->size() : t2v_->size(); }

FieldEmbeddings embed_action_fields(const std::vector<data::ActionRecord>& records,
                                    data::Schema schema, const ActionFieldLayers& layers) {
    const std::size_t n = records.size();
    if (n == 0) throw std::invalid_argument("embed_action_fields: empty batch");
    std::vector<int> devices(n), controls(n);
    std::vector<double> times(n), dates(n);
    for (std::size_t i = 0; i < n; ++i) {
        devices[i] = records[i].device;
        controls[i] = records[i].control;
        times[i] = normalize_time(records[i].time, schema);
        dates[i] = normalize_date(records[i].day, schema);
    }
    Array tau_time = Array::from_data({static_cast<int>(n)}, std::move(times));
    Array tau_date = Array::from_data({static_cast<int>(n)}, std::move(dates));

    FieldEmbeddings out;
    out.device = layers.device->forward(devices);
    out.control = layers.control->forward(controls);
    out.time_periodic = layers.time_periodic->forward(tau_time);
    out.time_radial = layers.time_radial->forward(tau_time);
    out.date_periodic = layers.date_periodic->forward(tau_date);
    out.date_radial = layers.date_radial->forward(tau_date);
    return out;
}

Array embed_time_diff(const Array& diffs, const DiffScale& scale, const Time2VecLayer& t2v) {
    return t2v.forward(scale.apply(diffs));
}

}  // namespace timing::embed

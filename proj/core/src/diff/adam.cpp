#include "timing/diff/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace timing::diff {

Array ParamSet::add(const std::string& name, Array array, bool trainable) {
    if (name.empty() || name.find_first_of(" \t\n") != std::string::npos)
        throw std::invalid_argument("ParamSet: bad parameter name '" + name + "'");
    if (index_.count(name))
        throw std::invalid_argument("ParamSet: duplicate parameter '" + name + "'");
    array.set_requires_grad(trainable);
    index_[name] = params_.size();
    params_.push_back(Parameter{name, array, trainable});
    return array;
}

Array ParamSet::add_uniform(const std::string& name, Shape shape, util::Rng& rng, double lo,
                            double hi, bool trainable) {
    std::vector<double> data(static_cast<std::size_t>(shape_numel(shape)));
    for (double& d : data) d = rng.uniform(lo, hi);
    return add(name, Array::from_data(std::move(shape), std::move(data)), trainable);
}

Array ParamSet::add_normal(const std::string& name, Shape shape, util::Rng& rng, double stddev,
                           bool trainable) {
    std::vector<double> data(static_cast<std::size_t>(shape_numel(shape)));
    for (double& d : data) d = rng.normal(0.0, stddev);
    return add(name, Array::from_data(std::move(shape), std::move(data)), trainable);
}

Array ParamSet::add_zeros(const std::string& name, Shape shape, bool trainable) {
    return add(name, Array::zeros(std::move(shape)), trainable);
}

Array ParamSet::add_full(const std::string& name, Shape shape, double fill, bool trainable) {
    return add(name, Array::full(std::move(shape), fill), trainable);
}

bool ParamSet::contains(const std::string& name) const { return index_.count(name) != 0; }

Parameter& ParamSet::at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("ParamSet: no parameter '" + name + "'");
    return params_[it->second];
}

const Parameter& ParamSet::at(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("ParamSet: no parameter '" + name + "'");
    return params_[it->second];
}

std::int64_t ParamSet::trainable_count() const {
    std::int64_t n = 0;
    for (const auto& p : params_)
        if (p.trainable) n += p.array.numel();
    return n;
}

void ParamSet::zero_grads() {
    for (auto& p : params_) p.array.zero_grad();
}

void Adam::step(ParamSet& params) {
    ++step_;
    const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_));

    for (auto& p : params.all()) {
        if (!p.trainable) continue;
        if (!p.array.has_grad())
            throw std::runtime_error("Adam: parameter '" + p.name +
                                     "' received no gradient; the loss graph must reach every "
                                     "trainable parameter");
        auto& moments = state_[p.name];
        auto& value = p.array.mutable_value();
        const auto& grad = p.array.grad();
        if (moments.m.empty()) {
            moments.m.assign(value.size(), 0.0);
            moments.v.assign(value.size(), 0.0);
        }
        for (std::size_t i = 0; i < value.size(); ++i) {
            const double g = grad[i];
            moments.m[i] = config_.beta1 * moments.m[i] + (1.0 - config_.beta1) * g;
            moments.v[i] = config_.beta2 * moments.v[i] + (1.0 - config_.beta2) * g * g;
            const double m_hat = moments.m[i] / bc1;
            const double v_hat = moments.v[i] / bc2;
            value[i] -= config_.lr * (m_hat / (std::sqrt(v_hat) + config_.eps) +
                                      config_.weight_decay * value[i]);
        }
        p.array.zero_grad();
    }
}

}  // namespace timing::diff

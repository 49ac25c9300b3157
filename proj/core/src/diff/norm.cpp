#include <cmath>
#include <stdexcept>

#include "timing/diff/array.hpp"

namespace timing::diff {

namespace {

using detail::Node;

std::int64_t row_count(const Array& x) { return x.numel() / x.dim(-1); }

}  // namespace

Array softmax_last(const Array& x) {
    const std::int64_t width = x.dim(-1);
    const std::int64_t rows = row_count(x);
    std::vector<double> v(x.value().size());
    const auto& xv = x.value();
    for (std::int64_t r = 0; r < rows; ++r) {
        const double* in = xv.data() + r * width;
        double* outp = v.data() + r * width;
        double peak = in[0];
        for (std::int64_t i = 1; i < width; ++i) peak = std::max(peak, in[i]);
        double total = 0.0;
        for (std::int64_t i = 0; i < width; ++i) {
            outp[i] = std::exp(in[i] - peak);
            total += outp[i];
        }
        const double inv = 1.0 / total;
        for (std::int64_t i = 0; i < width; ++i) outp[i] *= inv;
    }
    Array out = make_op(x.shape(), std::move(v), {x});
    Node* on = out.node().get();
    Node* xn = x.node().get();
    set_backward(out, [on, xn, rows, width] {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        for (std::int64_t r = 0; r < rows; ++r) {
            const double* y = on->value.data() + r * width;
            const double* g = on->grad.data() + r * width;
            double dot = 0.0;
            for (std::int64_t i = 0; i < width; ++i) dot += g[i] * y[i];
            double* dst = xn->grad.data() + r * width;
            for (std::int64_t i = 0; i < width; ++i) dst[i] += y[i] * (g[i] - dot);
        }
    });
    return out;
}

Array log_softmax_last(const Array& x) {
    const std::int64_t width = x.dim(-1);
    const std::int64_t rows = row_count(x);
    std::vector<double> v(x.value().size());
    const auto& xv = x.value();
    for (std::int64_t r = 0; r < rows; ++r) {
        const double* in = xv.data() + r * width;
        double* outp = v.data() + r * width;
        double peak = in[0];
        for (std::int64_t i = 1; i < width; ++i) peak = std::max(peak, in[i]);
        double total = 0.0;
        for (std::int64_t i = 0; i < width; ++i) total += std::exp(in[i] - peak);
        const double log_norm = peak + std::log(total);
        for (std::int64_t i = 0; i < width; ++i) outp[i] = in[i] - log_norm;
    }
    Array out = make_op(x.shape(), std::move(v), {x});
    Node* on = out.node().get();
    Node* xn = x.node().get();
    set_backward(out, [on, xn, rows, width] {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        for (std::int64_t r = 0; r < rows; ++r) {
            const double* y = on->value.data() + r * width;
            const double* g = on->grad.data() + r * width;
            double total = 0.0;
            for (std::int64_t i = 0; i < width; ++i) total += g[i];
            double* dst = xn->grad.data() + r * width;
            for (std::int64_t i = 0; i < width; ++i) dst[i] += g[i] - std::exp(y[i]) * total;
        }
    });
    return out;
}

Array layer_norm(const Array& x, const Array& gain, const Array& bias, double eps) {
    const std::int64_t width = x.dim(-1);
    if (gain.ndim() != 1 || bias.ndim() != 1 || gain.dim(0) != width || bias.dim(0) != width)
        throw std::invalid_argument("layer_norm: gain/bias must match last axis of " +
                                    shape_str(x.shape()));
    const std::int64_t rows = row_count(x);
    std::vector<double> v(x.value().size());
    std::vector<double> inv_std(static_cast<std::size_t>(rows));
    std::vector<double> normed(x.value().size());  // kept for backward
    const auto& xv = x.value();
    const auto& gv = gain.value();
    const auto& bv = bias.value();
    for (std::int64_t r = 0; r < rows; ++r) {
        const double* in = xv.data() + r * width;
        double mean = 0.0;
        for (std::int64_t i = 0; i < width; ++i) mean += in[i];
        mean /= static_cast<double>(width);
        double var = 0.0;
        for (std::int64_t i = 0; i < width; ++i) {
            const double d = in[i] - mean;
            var += d * d;
        }
        var /= static_cast<double>(width);
        const double is = 1.0 / std::sqrt(var + eps);
        inv_std[static_cast<std::size_t>(r)] = is;
        for (std::int64_t i = 0; i < width; ++i) {
            const double nh = (in[i] - mean) * is;
            normed[static_cast<std::size_t>(r * width + i)] = nh;
            v[static_cast<std::size_t>(r * width + i)] = gv[static_cast<std::size_t>(i)] * nh + bv[static_cast<std::size_t>(i)];
        }
    }
    Array out = make_op(x.shape(), std::move(v), {x, gain, bias});
    Node* on = out.node().get();
    Node* xn = x.node().get();
    Node* gn = gain.node().get();
    Node* bn = bias.node().get();
    set_backward(out, [on, xn, gn, bn, rows, width, inv_std = std::move(inv_std),
                       normed = std::move(normed)] {
        for (std::int64_t r = 0; r < rows; ++r) {
            const double* g = on->grad.data() + r * width;
            const double* nh = normed.data() + r * width;
            if (gn->requires_grad) {
                gn->ensure_grad();
                for (std::int64_t i = 0; i < width; ++i) gn->grad[static_cast<std::size_t>(i)] += g[i] * nh[i];
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                for (std::int64_t i = 0; i < width; ++i) bn->grad[static_cast<std::size_t>(i)] += g[i];
            }
            if (xn->requires_grad) {
                xn->ensure_grad();
                // d/dx of (x - mean)/std with both statistics depending on x.
                double sum_gh = 0.0, sum_gh_nh = 0.0;
                for (std::int64_t i = 0; i < width; ++i) {
                    const double gh = g[i] * gn->value[static_cast<std::size_t>(i)];
                    sum_gh += gh;
                    sum_gh_nh += gh * nh[i];
                }
                const double inv_w = 1.0 / static_cast<double>(width);
                const double is = inv_std[static_cast<std::size_t>(r)];
                double* dst = xn->grad.data() + r * width;
                for (std::int64_t i = 0; i < width; ++i) {
                    const double gh = g[i] * gn->value[static_cast<std::size_t>(i)];
                    dst[i] += is * (gh - inv_w * sum_gh - nh[i] * inv_w * sum_gh_nh);
                }
            }
        }
    });
    return out;
}

Array batch_norm_train(const Array& x, const Array& gain, const Array& bias,
                       std::vector<double>* batch_mean, std::vector<double>* batch_var,
                       double eps) {
    if (x.ndim() != 2)
        throw std::invalid_argument("batch_norm_train: expects 2-D rows, got " + shape_str(x.shape()));
    const std::int64_t rows = x.dim(0);
    const std::int64_t width = x.dim(1);
    if (rows < 2)
        throw std::invalid_argument("batch_norm_train: needs at least two rows");
    if (gain.ndim() != 1 || bias.ndim() != 1 || gain.dim(0) != width || bias.dim(0) != width)
        throw std::invalid_argument("batch_norm_train: gain/bias width mismatch");

    std::vector<double> mean(static_cast<std::size_t>(width), 0.0);
    std::vector<double> var(static_cast<std::size_t>(width), 0.0);
    const auto& xv = x.value();
    for (std::int64_t r = 0; r < rows; ++r)
        for (std::int64_t c = 0; c < width; ++c) mean[static_cast<std::size_t>(c)] += xv[static_cast<std::size_t>(r * width + c)];
    for (double& m : mean) m /= static_cast<double>(rows);
    for (std::int64_t r = 0; r < rows; ++r)
        for (std::int64_t c = 0; c < width; ++c) {
            const double d = xv[static_cast<std::size_t>(r * width + c)] - mean[static_cast<std::size_t>(c)];
            var[static_cast<std::size_t>(c)] += d * d;
        }
    for (double& s : var) s /= static_cast<double>(rows);  // biased, used for normalization
    if (batch_mean) *batch_mean = mean;
    if (batch_var) *batch_var = var;

    std::vector<double> inv_std(static_cast<std::size_t>(width));
    for (std::int64_t c = 0; c < width; ++c) inv_std[static_cast<std::size_t>(c)] = 1.0 / std::sqrt(var[static_cast<std::size_t>(c)] + eps);

    std::vector<double> normed(xv.size());
    std::vector<double> v(xv.size());
    const auto& gv = gain.value();
    const auto& bv = bias.value();
    for (std::int64_t r = 0; r < rows; ++r)
        for (std::int64_t c = 0; c < width; ++c) {
            const std::size_t i = static_cast<std::size_t>(r * width + c);
            const double nh = (xv[i] - mean[static_cast<std::size_t>(c)]) * inv_std[static_cast<std::size_t>(c)];
            normed[i] = nh;
            v[i] = gv[static_cast<std::size_t>(c)] * nh + bv[static_cast<std::size_t>(c)];
        }

    Array out = make_op(x.shape(), std::move(v), {x, gain, bias});
    Node* on = out.node().get();
    Node* xn = x.node().get();
    Node* gn = gain.node().get();
    Node* bn = bias.node().get();
    set_backward(out, [on, xn, gn, bn, rows, width, inv_std = std::move(inv_std),
                       normed = std::move(normed)] {
        const double inv_n = 1.0 / static_cast<double>(rows);
        for (std::int64_t c = 0; c < width; ++c) {
            double sum_g = 0.0, sum_g_nh = 0.0;
            for (std::int64_t r = 0; r < rows; ++r) {
                const double g = on->grad[static_cast<std::size_t>(r * width + c)];
                sum_g += g;
                sum_g_nh += g * normed[static_cast<std::size_t>(r * width + c)];
            }
            if (gn->requires_grad) {
                gn->ensure_grad();
                gn->grad[static_cast<std::size_t>(c)] += sum_g_nh;
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                bn->grad[static_cast<std::size_t>(c)] += sum_g;
            }
            if (xn->requires_grad) {
                xn->ensure_grad();
                const double scale = gn->value[static_cast<std::size_t>(c)] * inv_std[static_cast<std::size_t>(c)];
                for (std::int64_t r = 0; r < rows; ++r) {
                    const std::size_t i = static_cast<std::size_t>(r * width + c);
                    xn->grad[i] += scale * (on->grad[i] - inv_n * sum_g - normed[i] * inv_n * sum_g_nh);
                }
            }
        }
    });
    return out;
}

Array batch_norm_eval(const Array& x, const Array& gain, const Array& bias,
                      const std::vector<double>& mean, const std::vector<double>& var,
                      double eps) {
    if (x.ndim() != 2)
        throw std::invalid_argument("batch_norm_eval: expects 2-D rows, got " + shape_str(x.shape()));
    const std::int64_t rows = x.dim(0);
    const std::int64_t width = x.dim(1);
    if (static_cast<std::int64_t>(mean.size()) != width || static_cast<std::int64_t>(var.size()) != width)
        throw std::invalid_argument("batch_norm_eval: running moments width mismatch");
    if (gain.ndim() != 1 || bias.ndim() != 1 || gain.dim(0) != width || bias.dim(0) != width)
        throw std::invalid_argument("batch_norm_eval: gain/bias width mismatch");

    std::vector<double> inv_std(static_cast<std::size_t>(width));
    for (std::int64_t c = 0; c < width; ++c) inv_std[static_cast<std::size_t>(c)] = 1.0 / std::sqrt(var[static_cast<std::size_t>(c)] + eps);

    std::vector<double> v(x.value().size());
    const auto& xv = x.value();
    const auto& gv = gain.value();
    const auto& bv = bias.value();
    for (std::int64_t r = 0; r < rows; ++r)
        for (std::int64_t c = 0; c < width; ++c) {
            const std::size_t i = static_cast<std::size_t>(r * width + c);
            v[i] = gv[static_cast<std::size_t>(c)] * (xv[i] - mean[static_cast<std::size_t>(c)]) * inv_std[static_cast<std::size_t>(c)] + bv[static_cast<std::size_t>(c)];
        }

    Array out = make_op(x.shape(), std::move(v), {x, gain, bias});
    Node* on = out.node().get();
    Node* xn = x.node().get();
    Node* gn = gain.node().get();
    Node* bn = bias.node().get();
    set_backward(out, [on, xn, gn, bn, rows, width, inv_std = std::move(inv_std), mean] {
        for (std::int64_t c = 0; c < width; ++c) {
            const double is = inv_std[static_cast<std::size_t>(c)];
            for (std::int64_t r = 0; r < rows; ++r) {
                const std::size_t i = static_cast<std::size_t>(r * width + c);
                const double g = on->grad[i];
                if (xn->requires_grad) {
                    xn->ensure_grad();
                    xn->grad[i] += g * gn->value[static_cast<std::size_t>(c)] * is;
                }
                if (gn->requires_grad) {
                    gn->ensure_grad();
                    gn->grad[static_cast<std::size_t>(c)] += g * (xn->value[i] - mean[static_cast<std::size_t>(c)]) * is;
                }
                if (bn->requires_grad) {
                    bn->ensure_grad();
                    bn->grad[static_cast<std::size_t>(c)] += g;
                }
            }
        }
    });
    return out;
}

}  // namespace timing::diff

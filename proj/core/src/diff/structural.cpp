#include <stdexcept>
#include <string>

#include "timing/diff/array.hpp"

namespace timing::diff {

namespace {

using detail::Node;

std::int64_t prod_range(const Shape& s, int from, int to) {
    std::int64_t p = 1;
    for (int i = from; i < to; ++i) p *= s[static_cast<std::size_t>(i)];
    return p;
}

int normalize_axis(const Shape& s, int axis, const char* op) {
    int nd = static_cast<int>(s.size());
    if (axis < 0) axis += nd;
    if (axis < 0 || axis >= nd)
        throw std::invalid_argument(std::string(op) + ": axis out of range for " + shape_str(s));
    return axis;
}

}  // namespace

Array broadcast_scalar(const Array& s, Shape shape) {
    if (s.numel() != 1)
        throw std::invalid_argument("broadcast_scalar: source must have one element");
    const double fill = s.value()[0];
    std::vector<double> v(static_cast<std::size_t>(shape_numel(shape)), fill);
    Array out = make_op(std::move(shape), std::move(v), {s});
    Node* on = out.node().get();
    Node* sn = s.node().get();
    set_backward(out, [on, sn] {
        if (!sn->requires_grad) return;
        sn->ensure_grad();
        double total = 0.0;
        for (double g : on->grad) total += g;
        sn->grad[0] += total;
    });
    return out;
}

Array add_bias(const Array& x, const Array& bias) {
    if (bias.ndim() != 1 || x.dim(-1) != bias.dim(0))
        throw std::invalid_argument("add_bias: bias " + shape_str(bias.shape()) +
                                    " does not match last axis of " + shape_str(x.shape()));
    const std::size_t width = static_cast<std::size_t>(bias.dim(0));
    std::vector<double> v(x.value());
    const auto& bv = bias.value();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] += bv[i % width];
    Array out = make_op(x.shape(), std::move(v), {x, bias});
    Node* on = out.node().get();
    Node* xn = x.node().get();
    Node* bn = bias.node().get();
    set_backward(out, [on, xn, bn, width] {
        if (xn->requires_grad) {
            xn->ensure_grad();
            for (std::size_t i = 0; i < on->grad.size(); ++i) xn->grad[i] += on->grad[i];
        }
        if (bn->requires_grad) {
            bn->ensure_grad();
            for (std::size_t i = 0; i < on->grad.size(); ++i) bn->grad[i % width] += on->grad[i];
        }
    });
    return out;
}

Array mul_last(const Array& x, const Array& v) {
    if (v.ndim() != 1 || x.dim(-1) != v.dim(0))
        throw std::invalid_argument("mul_last: vector " + shape_str(v.shape()) +
                                    " does not match last axis of " + shape_str(x.shape()));
    const std::size_t width = static_cast<std::size_t>(v.dim(0));
    std::vector<double> out_v(x.value());
    const auto& vv = v.value();
    for (std::size_t i = 0; i < out_v.size(); ++i) out_v[i] *= vv[i % width];
    Array out = make_op(x.shape(), std::move(out_v), {x, v});
    Node* on = out.node().get();
    Node* xn = x.node().get();
    Node* vn = v.node().get();
    set_backward(out, [on, xn, vn, width] {
        if (xn->requires_grad) {
            xn->ensure_grad();
            for (std::size_t i = 0; i < on->grad.size(); ++i)
                xn->grad[i] += on->grad[i] * vn->value[i % width];
        }
        if (vn->requires_grad) {
            vn->ensure_grad();
            for (std::size_t i = 0; i < on->grad.size(); ++i)
                vn->grad[i % width] += on->grad[i] * xn->value[i];
        }
    });
    return out;
}

Array add_mat_bcast(const Array& x, const Array& m) {
    if (x.ndim() != 3 || m.ndim() != 2 || x.dim(1) != m.dim(0) || x.dim(2) != m.dim(1))
        throw std::invalid_argument("add_mat_bcast: cannot broadcast " + shape_str(m.shape()) +
                                    " over " + shape_str(x.shape()));
    const std::size_t plane = static_cast<std::size_t>(m.numel());
    std::vector<double> v(x.value());
    const auto& mv = m.value();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] += mv[i % plane];
    Array out = make_op(x.shape(), std::move(v), {x, m});
    Node* on = out.node().get();
    Node* xn = x.node().get();
    Node* mn = m.node().get();
    set_backward(out, [on, xn, mn, plane] {
        if (xn->requires_grad) {
            xn->ensure_grad();
            for (std::size_t i = 0; i < on->grad.size(); ++i) xn->grad[i] += on->grad[i];
        }
        if (mn->requires_grad) {
            mn->ensure_grad();
            for (std::size_t i = 0; i < on->grad.size(); ++i) mn->grad[i % plane] += on->grad[i];
        }
    });
    return out;
}

Array outer_mul(const Array& x, const Array& y) {
    if (x.ndim() != 1 || y.ndim() != 1)
        throw std::invalid_argument("outer_mul: expects two vectors");
    const std::size_t n = static_cast<std::size_t>(x.dim(0));
    const std::size_t k = static_cast<std::size_t>(y.dim(0));
    std::vector<double> v(n * k);
    const auto& xv = x.value();
    const auto& yv = y.value();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < k; ++j) v[i * k + j] = xv[i] * yv[j];
    Array out = make_op({static_cast<int>(n), static_cast<int>(k)}, std::move(v), {x, y});
    Node* on = out.node().get();
    Node* xn = x.node().get();
    Node* yn = y.node().get();
    set_backward(out, [on, xn, yn, n, k] {
        if (xn->requires_grad) {
            xn->ensure_grad();
            for (std::size_t i = 0; i < n; ++i) {
                double acc = 0.0;
                for (std::size_t j = 0; j < k; ++j) acc += on->grad[i * k + j] * yn->value[j];
                xn->grad[i] += acc;
            }
        }
        if (yn->requires_grad) {
            yn->ensure_grad();
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < k; ++j) yn->grad[j] += on->grad[i * k + j] * xn->value[i];
        }
    });
    return out;
}

Array outer_sub(const Array& x, const Array& y) {
    if (x.ndim() != 1 || y.ndim() != 1)
        throw std::invalid_argument("outer_sub: expects two vectors");
    const std::size_t n = static_cast<std::size_t>(x.dim(0));
    const std::size_t k = static_cast<std::size_t>(y.dim(0));
    std::vector<double> v(n * k);
    const auto& xv = x.value();
    const auto& yv = y.value();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < k; ++j) v[i * k + j] = xv[i] - yv[j];
    Array out = make_op({static_cast<int>(n), static_cast<int>(k)}, std::move(v), {x, y});
    Node* on = out.node().get();
    Node* xn = x.node().get();
    Node* yn = y.node().get();
    set_backward(out, [on, xn, yn, n, k] {
        if (xn->requires_grad) {
            xn->ensure_grad();
            for (std::size_t i = 0; i < n; ++i) {
                double acc = 0.0;
                for (std::size_t j = 0; j < k; ++j) acc += on->grad[i * k + j];
                xn->grad[i] += acc;
            }
        }
        if (yn->requires_grad) {
            yn->ensure_grad();
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < k; ++j) yn->grad[j] -= on->grad[i * k + j];
        }
    });
    return out;
}

Array reshape(const Array& x, Shape shape) {
    if (shape_numel(shape) != x.numel())
        throw std::invalid_argument("reshape: cannot view " + shape_str(x.shape()) + " as " +
                                    shape_str(shape));
    Array out = make_op(std::move(shape), x.value(), {x});
    Node* on = out.node().get();
    Node* xn = x.node().get();
    set_backward(out, [on, xn] {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        for (std::size_t i = 0; i < on->grad.size(); ++i) xn->grad[i] += on->grad[i];
    });
    return out;
}

Array concat(const std::vector<Array>& parts, int axis) {
    if (parts.empty()) throw std::invalid_argument("concat: no inputs");
    const Shape& first = parts[0].shape();
    const int ax = normalize_axis(first, axis, "concat");
    Shape out_shape = first;
    out_shape[static_cast<std::size_t>(ax)] = 0;
    for (const Array& p : parts) {
        Shape s = p.shape();
        if (static_cast<int>(s.size()) != static_cast<int>(first.size()))
            throw std::invalid_argument("concat: rank mismatch");
        for (int i = 0; i < static_cast<int>(s.size()); ++i) {
            if (i == ax) continue;
            if (s[static_cast<std::size_t>(i)] != first[static_cast<std::size_t>(i)])
                throw std::invalid_argument("concat: shape mismatch " + shape_str(s) + " vs " +
                                            shape_str(first));
        }
        out_shape[static_cast<std::size_t>(ax)] += s[static_cast<std::size_t>(ax)];
    }

    const std::int64_t outer = prod_range(first, 0, ax);
    const std::int64_t inner = prod_range(first, ax + 1, static_cast<int>(first.size()));
    std::vector<double> v(static_cast<std::size_t>(shape_numel(out_shape)));
    const std::int64_t out_block = static_cast<std::int64_t>(out_shape[static_cast<std::size_t>(ax)]) * inner;

    std::int64_t offset = 0;  // in elements, within each outer slice
    std::vector<std::int64_t> part_offsets;
    for (const Array& p : parts) {
        part_offsets.push_back(offset);
        const std::int64_t block = static_cast<std::int64_t>(p.dim(ax)) * inner;
        const auto& pv = p.value();
        for (std::int64_t o = 0; o < outer; ++o) {
            std::copy(pv.begin() + o * block, pv.begin() + (o + 1) * block,
                      v.begin() + o * out_block + offset);
        }
        offset += block;
    }

    std::vector<Array> parent_list(parts.begin(), parts.end());
    Array out = make_op(std::move(out_shape), std::move(v), std::move(parent_list));
    Node* on = out.node().get();
    std::vector<Node*> part_nodes;
    std::vector<std::int64_t> blocks;
    for (const Array& p : parts) {
        part_nodes.push_back(p.node().get());
        blocks.push_back(static_cast<std::int64_t>(p.dim(ax)) * inner);
    }
    set_backward(out, [on, part_nodes, part_offsets, blocks, outer, out_block] {
        for (std::size_t pi = 0; pi < part_nodes.size(); ++pi) {
            Node* pn = part_nodes[pi];
            if (!pn->requires_grad) continue;
            pn->ensure_grad();
            for (std::int64_t o = 0; o < outer; ++o) {
                const double* src = on->grad.data() + o * out_block + part_offsets[pi];
                double* dst = pn->grad.data() + o * blocks[pi];
                for (std::int64_t i = 0; i < blocks[pi]; ++i) dst[i] += src[i];
            }
        }
    });
    return out;
}

Array narrow(const Array& x, int axis, int start, int length) {
    const Shape& s = x.shape();
    const int ax = normalize_axis(s, axis, "narrow");
    const int extent = s[static_cast<std::size_t>(ax)];
    if (start < 0 || length <= 0 || start + length > extent)
        throw std::invalid_argument("narrow: range [" + std::to_string(start) + ", " +
                                    std::to_string(start + length) + ") outside extent " +
                                    std::to_string(extent));
    Shape out_shape = s;
    out_shape[static_cast<std::size_t>(ax)] = length;

    const std::int64_t outer = prod_range(s, 0, ax);
    const std::int64_t inner = prod_range(s, ax + 1, static_cast<int>(s.size()));
    const std::int64_t in_block = static_cast<std::int64_t>(extent) * inner;
    const std::int64_t out_block = static_cast<std::int64_t>(length) * inner;
    const std::int64_t skip = static_cast<std::int64_t>(start) * inner;

    std::vector<double> v(static_cast<std::size_t>(outer * out_block));
    const auto& xv = x.value();
    for (std::int64_t o = 0; o < outer; ++o)
        std::copy(xv.begin() + o * in_block + skip, xv.begin() + o * in_block + skip + out_block,
                  v.begin() + o * out_block);

    Array out = make_op(std::move(out_shape), std::move(v), {x});
    Node* on = out.node().get();
    Node* xn = x.node().get();
    set_backward(out, [on, xn, outer, in_block, out_block, skip] {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        for (std::int64_t o = 0; o < outer; ++o) {
            const double* src = on->grad.data() + o * out_block;
            double* dst = xn->grad.data() + o * in_block + skip;
            for (std::int64_t i = 0; i < out_block; ++i) dst[i] += src[i];
        }
    });
    return out;
}

Array transpose2(const Array& x) {
    const int nd = x.ndim();
    if (nd != 2 && nd != 3)
        throw std::invalid_argument("transpose2: expects 2-D or 3-D, got " + shape_str(x.shape()));
    const std::int64_t groups = nd == 3 ? x.dim(0) : 1;
    const std::int64_t rows = x.dim(nd - 2);
    const std::int64_t cols = x.dim(nd - 1);
    Shape out_shape = x.shape();
    std::swap(out_shape[static_cast<std::size_t>(nd - 2)], out_shape[static_cast<std::size_t>(nd - 1)]);

    std::vector<double> v(x.value().size());
    const auto& xv = x.value();
    for (std::int64_t g = 0; g < groups; ++g) {
        const double* src = xv.data() + g * rows * cols;
        double* dst = v.data() + g * rows * cols;
        for (std::int64_t r = 0; r < rows; ++r)
            for (std::int64_t c = 0; c < cols; ++c) dst[c * rows + r] = src[r * cols + c];
    }

    Array out = make_op(std::move(out_shape), std::move(v), {x});
    Node* on = out.node().get();
    Node* xn = x.node().get();
    set_backward(out, [on, xn, groups, rows, cols] {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        for (std::int64_t g = 0; g < groups; ++g) {
            const double* src = on->grad.data() + g * rows * cols;
            double* dst = xn->grad.data() + g * rows * cols;
            for (std::int64_t r = 0; r < rows; ++r)
                for (std::int64_t c = 0; c < cols; ++c) dst[r * cols + c] += src[c * rows + r];
        }
    });
    return out;
}

Array lookup(const Array& table, const std::vector<int>& ids) {
    if (table.ndim() != 2)
        throw std::invalid_argument("lookup: table must be 2-D, got " + shape_str(table.shape()));
    const int vocab = table.dim(0);
    const std::int64_t width = table.dim(1);
    for (int id : ids)
        if (id < 0 || id >= vocab)
            throw std::out_of_range("lookup: id " + std::to_string(id) + " outside vocabulary of " +
                                    std::to_string(vocab));
    std::vector<double> v(ids.size() * static_cast<std::size_t>(width));
    const auto& tv = table.value();
    for (std::size_t i = 0; i < ids.size(); ++i)
        std::copy(tv.begin() + ids[i] * width, tv.begin() + (ids[i] + 1) * width,
                  v.begin() + static_cast<std::int64_t>(i) * width);

    Array out = make_op({static_cast<int>(ids.size()), static_cast<int>(width)}, std::move(v),
                        {table});
    Node* on = out.node().get();
    Node* tn = table.node().get();
    set_backward(out, [on, tn, ids, width] {
        if (!tn->requires_grad) return;
        tn->ensure_grad();
        for (std::size_t i = 0; i < ids.size(); ++i) {
            const double* src = on->grad.data() + static_cast<std::int64_t>(i) * width;
            double* dst = tn->grad.data() + ids[i] * width;
            for (std::int64_t d = 0; d < width; ++d) dst[d] += src[d];
        }
    });
    return out;
}

Array gather_cols(const Array& x, const std::vector<int>& ids) {
    if (x.ndim() != 2)
        throw std::invalid_argument("gather_cols: expects 2-D, got " + shape_str(x.shape()));
    const std::size_t rows = static_cast<std::size_t>(x.dim(0));
    const std::int64_t cols = x.dim(1);
    if (ids.size() != rows)
        throw std::invalid_argument("gather_cols: need one index per row");
    for (int id : ids)
        if (id < 0 || id >= cols)
            throw std::out_of_range("gather_cols: column " + std::to_string(id) + " outside " +
                                    std::to_string(cols));
    std::vector<double> v(rows);
    const auto& xv = x.value();
    for (std::size_t i = 0; i < rows; ++i) v[i] = xv[static_cast<std::int64_t>(i) * cols + ids[i]];

    Array out = make_op({static_cast<int>(rows)}, std::move(v), {x});
    Node* on = out.node().get();
    Node* xn = x.node().get();
    set_backward(out, [on, xn, ids, cols] {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        for (std::size_t i = 0; i < ids.size(); ++i)
            xn->grad[static_cast<std::int64_t>(i) * cols + ids[i]] += on->grad[i];
    });
    return out;
}

Array sum_all(const Array& x) {
    double total = 0.0;
    for (double e : x.value()) total += e;
    Array out = make_op({1}, {total}, {x});
    Node* on = out.node().get();
    Node* xn = x.node().get();
    set_backward(out, [on, xn] {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        const double g = on->grad[0];
        for (double& e : xn->grad) e += g;
    });
    return out;
}

Array mean_all(const Array& x) {
    const double inv = 1.0 / static_cast<double>(x.numel());
    double total = 0.0;
    for (double e : x.value()) total += e;
    Array out = make_op({1}, {total * inv}, {x});
    Node* on = out.node().get();
    Node* xn = x.node().get();
    set_backward(out, [on, xn, inv] {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        const double g = on->grad[0] * inv;
        for (double& e : xn->grad) e += g;
    });
    return out;
}

Array avg_pool_time(const Array& x) {
    if (x.ndim() != 3)
        throw std::invalid_argument("avg_pool_time: expects [batch, time, channel], got " +
                                    shape_str(x.shape()));
    const std::int64_t batch = x.dim(0);
    const std::int64_t steps = x.dim(1);
    const std::int64_t width = x.dim(2);
    const double inv = 1.0 / static_cast<double>(steps);
    std::vector<double> v(static_cast<std::size_t>(batch * width), 0.0);
    const auto& xv = x.value();
    for (std::int64_t b = 0; b < batch; ++b)
        for (std::int64_t t = 0; t < steps; ++t)
            for (std::int64_t d = 0; d < width; ++d)
                v[static_cast<std::size_t>(b * width + d)] += xv[(b * steps + t) * width + d] * inv;

    Array out = make_op({static_cast<int>(batch), static_cast<int>(width)}, std::move(v), {x});
    Node* on = out.node().get();
    Node* xn = x.node().get();
    set_backward(out, [on, xn, batch, steps, width, inv] {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        for (std::int64_t b = 0; b < batch; ++b)
            for (std::int64_t t = 0; t < steps; ++t)
                for (std::int64_t d = 0; d < width; ++d)
                    xn->grad[(b * steps + t) * width + d] += on->grad[b * width + d] * inv;
    });
    return out;
}

}  // namespace timing::diff

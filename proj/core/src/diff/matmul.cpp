#include <Eigen/Dense>
#include <stdexcept>

#include "timing/diff/array.hpp"

namespace timing::diff {

namespace {

using detail::Node;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CMap = Eigen::Map<const Mat>;
using MMap = Eigen::Map<Mat>;

}  // namespace

Array matmul(const Array& a, const Array& b) {
    if (b.ndim() != 2)
        throw std::invalid_argument("matmul: right operand must be 2-D, got " + shape_str(b.shape()));
    const int nd = a.ndim();
    if (nd != 2 && nd != 3)
        throw std::invalid_argument("matmul: left operand must be 2-D or 3-D, got " +
                                    shape_str(a.shape()));
    const std::int64_t contract = a.dim(nd - 1);
    if (contract != b.dim(0))
        throw std::invalid_argument("matmul: inner dimensions disagree, " + shape_str(a.shape()) +
                                    " x " + shape_str(b.shape()));
    // A 3-D left operand is a stack of matrices sharing the right operand, so
    // the stack folds into one tall GEMM.
    const std::int64_t rows = a.numel() / contract;
    const std::int64_t cols = b.dim(1);

    std::vector<double> v(static_cast<std::size_t>(rows * cols));
    {
        CMap am(a.value().data(), rows, contract);
        CMap bm(b.value().data(), contract, cols);
        MMap om(v.data(), rows, cols);
        om.noalias() = am * bm;
    }
    Shape out_shape = a.shape();
    out_shape.back() = static_cast<int>(cols);
    Array out = make_op(std::move(out_shape), std::move(v), {a, b});
    Node* on = out.node().get();
    Node* an = a.node().get();
    Node* bn = b.node().get();
    set_backward(out, [on, an, bn, rows, contract, cols] {
        CMap gm(on->grad.data(), rows, cols);
        if (an->requires_grad) {
            an->ensure_grad();
            CMap bm(bn->value.data(), contract, cols);
            MMap agm(an->grad.data(), rows, contract);
            agm.noalias() += gm * bm.transpose();
        }
        if (bn->requires_grad) {
            bn->ensure_grad();
            CMap am(an->value.data(), rows, contract);
            MMap bgm(bn->grad.data(), contract, cols);
            bgm.noalias() += am.transpose() * gm;
        }
    });
    return out;
}

Array bmm(const Array& a, const Array& b) {
    if (a.ndim() != 3 || b.ndim() != 3)
        throw std::invalid_argument("bmm: expects two 3-D stacks, got " + shape_str(a.shape()) +
                                    " x " + shape_str(b.shape()));
    if (a.dim(0) != b.dim(0) || a.dim(2) != b.dim(1))
        throw std::invalid_argument("bmm: incompatible stacks " + shape_str(a.shape()) + " x " +
                                    shape_str(b.shape()));
    const std::int64_t groups = a.dim(0);
    const std::int64_t rows = a.dim(1);
    const std::int64_t contract = a.dim(2);
    const std::int64_t cols = b.dim(2);

    std::vector<double> v(static_cast<std::size_t>(groups * rows * cols));
    for (std::int64_t g = 0; g < groups; ++g) {
        CMap am(a.value().data() + g * rows * contract, rows, contract);
        CMap bm(b.value().data() + g * contract * cols, contract, cols);
        MMap om(v.data() + g * rows * cols, rows, cols);
        om.noalias() = am * bm;
    }
    Array out = make_op({static_cast<int>(groups), static_cast<int>(rows), static_cast<int>(cols)},
                        std::move(v), {a, b});
    Node* on = out.node().get();
    Node* an = a.node().get();
    Node* bn = b.node().get();
    set_backward(out, [on, an, bn, groups, rows, contract, cols] {
        if (an->requires_grad) an->ensure_grad();
        if (bn->requires_grad) bn->ensure_grad();
        for (std::int64_t g = 0; g < groups; ++g) {
            CMap gm(on->grad.data() + g * rows * cols, rows, cols);
            if (an->requires_grad) {
                CMap bm(bn->value.data() + g * contract * cols, contract, cols);
                MMap agm(an->grad.data() + g * rows * contract, rows, contract);
                agm.noalias() += gm * bm.transpose();
            }
            if (bn->requires_grad) {
                CMap am(an->value.data() + g * rows * contract, rows, contract);
                MMap bgm(bn->grad.data() + g * contract * cols, contract, cols);
                bgm.noalias() += am.transpose() * gm;
            }
        }
    });
    return out;
}

Array conv1d_causal(const Array& x, const Array& w, const Array& b) {
    if (x.ndim() != 3 || w.ndim() != 3 || b.ndim() != 1)
        throw std::invalid_argument("conv1d_causal: expects x [B,T,Cin], w [K,Cin,Cout], b [Cout]");
    if (x.dim(2) != w.dim(1) || w.dim(2) != b.dim(0))
        throw std::invalid_argument("conv1d_causal: channel mismatch, x " + shape_str(x.shape()) +
                                    ", w " + shape_str(w.shape()));
    const std::int64_t batch = x.dim(0);
    const std::int64_t steps = x.dim(1);
    const std::int64_t taps = w.dim(0);
    const std::int64_t cin = x.dim(2);
    const std::int64_t cout = w.dim(2);

    // Left zero padding of taps-1 keeps the output aligned with the input:
    // out[t] only sees x[t-taps+1 .. t].
    std::vector<double> v(static_cast<std::size_t>(batch * steps * cout));
    {
        const auto& bv = b.value();
        for (std::int64_t r = 0; r < batch * steps; ++r)
            for (std::int64_t c = 0; c < cout; ++c) v[static_cast<std::size_t>(r * cout + c)] = bv[static_cast<std::size_t>(c)];
    }
    for (std::int64_t k = 0; k < taps; ++k) {
        const std::int64_t shift = taps - 1 - k;  // how far back tap k reaches
        if (shift >= steps) continue;
        CMap wk(w.value().data() + k * cin * cout, cin, cout);
        for (std::int64_t bi = 0; bi < batch; ++bi) {
            CMap xs(x.value().data() + bi * steps * cin, steps - shift, cin);
            MMap os(v.data() + bi * steps * cout + shift * cout, steps - shift, cout);
            os.noalias() += xs * wk;
        }
    }

    Array out = make_op({static_cast<int>(batch), static_cast<int>(steps), static_cast<int>(cout)},
                        std::move(v), {x, w, b});
    Node* on = out.node().get();
    Node* xn = x.node().get();
    Node* wn = w.node().get();
    Node* bn = b.node().get();
    set_backward(out, [on, xn, wn, bn, batch, steps, taps, cin, cout] {
        if (bn->requires_grad) {
            bn->ensure_grad();
            for (std::int64_t r = 0; r < batch * steps; ++r)
                for (std::int64_t c = 0; c < cout; ++c) bn->grad[static_cast<std::size_t>(c)] += on->grad[static_cast<std::size_t>(r * cout + c)];
        }
        if (xn->requires_grad) xn->ensure_grad();
        if (wn->requires_grad) wn->ensure_grad();
        for (std::int64_t k = 0; k < taps; ++k) {
            const std::int64_t shift = taps - 1 - k;
            if (shift >= steps) continue;
            for (std::int64_t bi = 0; bi < batch; ++bi) {
                CMap gs(on->grad.data() + bi * steps * cout + shift * cout, steps - shift, cout);
                if (xn->requires_grad) {
                    CMap wk(wn->value.data() + k * cin * cout, cin, cout);
                    MMap xg(xn->grad.data() + bi * steps * cin, steps - shift, cin);
                    xg.noalias() += gs * wk.transpose();
                }
                if (wn->requires_grad) {
                    CMap xs(xn->value.data() + bi * steps * cin, steps - shift, cin);
                    MMap wg(wn->grad.data() + k * cin * cout, cin, cout);
                    wg.noalias() += xs.transpose() * gs;
                }
            }
        }
    });
    return out;
}

}  // namespace timing::diff

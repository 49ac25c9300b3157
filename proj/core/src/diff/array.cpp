#include "timing/diff/array.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace timing::diff {

namespace {

std::atomic<std::uint64_t> next_node_id{1};

thread_local int no_grad_depth = 0;

}  // namespace

bool grad_enabled() { return no_grad_depth == 0; }

NoGradGuard::NoGradGuard() { ++no_grad_depth; }
NoGradGuard::~NoGradGuard() { --no_grad_depth; }

std::int64_t shape_numel(const Shape& shape) {
    std::int64_t n = 1;
    for (int d : shape) {
        if (d <= 0) throw std::invalid_argument("shape has nonpositive extent " + shape_str(shape));
        n *= d;
    }
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream out;
    out << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out << ", ";
        out << shape[i];
    }
    out << ']';
    return out.str();
}

void detail::Node::ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), 0.0);
}

const Shape& Array::shape() const {
    if (!node_) throw std::logic_error("Array: undefined handle");
    return node_->shape;
}

std::int64_t Array::numel() const { return static_cast<std::int64_t>(value().size()); }

int Array::dim(int axis) const {
    const Shape& s = shape();
    if (axis < 0) axis += static_cast<int>(s.size());
    if (axis < 0 || axis >= static_cast<int>(s.size()))
        throw std::out_of_range("Array::dim: axis out of range for " + shape_str(s));
    return s[static_cast<std::size_t>(axis)];
}

int Array::ndim() const { return static_cast<int>(shape().size()); }

const std::vector<double>& Array::value() const {
    if (!node_) throw std::logic_error("Array: undefined handle");
    return node_->value;
}

std::vector<double>& Array::mutable_value() {
    if (!node_) throw std::logic_error("Array: undefined handle");
    if (!node_->parents.empty() || node_->backward_fn)
        throw std::logic_error("Array: only leaf values may be mutated");
    return node_->value;
}

const std::vector<double>& Array::grad() const {
    if (!node_) throw std::logic_error("Array: undefined handle");
    if (node_->grad.empty())
        throw std::logic_error("Array: no gradient accumulated");
    return node_->grad;
}

bool Array::has_grad() const { return node_ && !node_->grad.empty(); }

void Array::zero_grad() {
    if (node_) node_->grad.clear();
}

bool Array::requires_grad() const { return node_ && node_->requires_grad; }

void Array::set_requires_grad(bool flag) {
    if (!node_) throw std::logic_error("Array: undefined handle");
    if (!node_->parents.empty() || node_->backward_fn)
        throw std::logic_error("Array: requires_grad is settable on leaves only");
    node_->requires_grad = flag;
}

double Array::item() const {
    const auto& v = value();
    if (v.size() != 1)
        throw std::logic_error("Array::item: expected a single element, shape is " + shape_str(shape()));
    return v[0];
}

std::uint64_t Array::node_id() const {
    if (!node_) throw std::logic_error("Array: undefined handle");
    return node_->id;
}

Array Array::zeros(Shape shape) {
    return full(std::move(shape), 0.0);
}

Array Array::full(Shape shape, double fill) {
    const auto n = shape_numel(shape);
    return from_data(std::move(shape), std::vector<double>(static_cast<std::size_t>(n), fill));
}

Array Array::from_data(Shape shape, std::vector<double> data) {
    if (shape_numel(shape) != static_cast<std::int64_t>(data.size()))
        throw std::invalid_argument("Array::from_data: " + std::to_string(data.size()) +
                                    " values for shape " + shape_str(shape));
    auto node = std::make_shared<detail::Node>();
    node->shape = std::move(shape);
    node->value = std::move(data);
    node->id = next_node_id.fetch_add(1, std::memory_order_relaxed);
    return Array(std::move(node));
}

Array Array::leaf(Shape shape, std::vector<double> data) {
    Array a = from_data(std::move(shape), std::move(data));
    a.set_requires_grad(true);
    return a;
}

Array make_op(Shape shape, std::vector<double> value, std::vector<Array> parents) {
    if (shape_numel(shape) != static_cast<std::int64_t>(value.size()))
        throw std::invalid_argument("make_op: value size does not match shape " + shape_str(shape));
    auto node = std::make_shared<detail::Node>();
    node->shape = std::move(shape);
    node->value = std::move(value);
    node->id = next_node_id.fetch_add(1, std::memory_order_relaxed);
    if (grad_enabled()) {
        for (const Array& p : parents) {
            if (p.defined() && p.requires_grad()) {
                node->requires_grad = true;
                break;
            }
        }
    }
    if (node->requires_grad) {
        node->parents.reserve(parents.size());
        for (Array& p : parents) node->parents.push_back(p.node());
    }
    return Array(std::move(node));
}

void set_backward(Array& result, std::function<void()> fn) {
    if (!result.defined()) throw std::logic_error("set_backward: undefined result");
    if (result.requires_grad()) result.node()->backward_fn = std::move(fn);
}

void backward(const Array& loss) {
    if (!loss.defined()) throw std::logic_error("backward: undefined loss");
    if (loss.numel() != 1)
        throw std::logic_error("backward: loss must be scalar, shape is " + shape_str(loss.shape()));
    if (!loss.requires_grad())
        throw std::logic_error("backward: loss does not require grad");

    // Reverse creation order is a topological order: parents always precede
    // children. Collect the reachable grad-requiring subgraph, sort by id
    // descending, then run each node's closure once. Shared pointers are held
    // here because each node's parent list is released right after its
    // closure runs.
    std::vector<std::shared_ptr<detail::Node>> order;
    std::unordered_set<detail::Node*> seen;
    std::vector<std::shared_ptr<detail::Node>> stack{loss.node()};
    seen.insert(loss.node().get());
    while (!stack.empty()) {
        std::shared_ptr<detail::Node> n = std::move(stack.back());
        stack.pop_back();
        for (const auto& p : n->parents)
            if (p->requires_grad && seen.insert(p.get()).second) stack.push_back(p);
        order.push_back(std::move(n));
    }
    std::sort(order.begin(), order.end(),
              [](const auto& a, const auto& b) { return a->id > b->id; });

    loss.node()->ensure_grad();
    loss.node()->grad[0] += 1.0;

    for (const auto& n : order) {
        if (n->consumed)
            throw std::logic_error("backward: graph already consumed by an earlier backward()");
        if (!n->backward_fn) continue;  // leaf
        n->consumed = true;
        if (!n->grad.empty()) n->backward_fn();
        n->backward_fn = nullptr;
        n->parents.clear();  // release the graph as we go
    }
}

// ---------------------------------------------------------------------------
// elementwise ops

namespace {

void check_same_shape(const Array& a, const Array& b, const char* op) {
    if (a.shape() != b.shape())
        throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                    shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

using detail::Node;

void accum(Node* n, const std::vector<double>& g) {
    if (!n->requires_grad) return;
    n->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) n->grad[i] += g[i];
}

}  // namespace

Array add(const Array& a, const Array& b) {
    check_same_shape(a, b, "add");
    std::vector<double> v(a.value());
    const auto& bv = b.value();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] += bv[i];
    Array out = make_op(a.shape(), std::move(v), {a, b});
    Node* on = out.node().get();
    Node* an = a.node().get();
    Node* bn = b.node().get();
    set_backward(out, [on, an, bn] {
        accum(an, on->grad);
        accum(bn, on->grad);
    });
    return out;
}

Array sub(const Array& a, const Array& b) {
    check_same_shape(a, b, "sub");
    std::vector<double> v(a.value());
    const auto& bv = b.value();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] -= bv[i];
    Array out = make_op(a.shape(), std::move(v), {a, b});
    Node* on = out.node().get();
    Node* an = a.node().get();
    Node* bn = b.node().get();
    set_backward(out, [on, an, bn] {
        accum(an, on->grad);
        if (bn->requires_grad) {
            bn->ensure_grad();
            for (std::size_t i = 0; i < on->grad.size(); ++i) bn->grad[i] -= on->grad[i];
        }
    });
    return out;
}

Array mul(const Array& a, const Array& b) {
    check_same_shape(a, b, "mul");
    std::vector<double> v(a.value());
    const auto& bv = b.value();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] *= bv[i];
    Array out = make_op(a.shape(), std::move(v), {a, b});
    Node* on = out.node().get();
    Node* an = a.node().get();
    Node* bn = b.node().get();
    set_backward(out, [on, an, bn] {
        if (an->requires_grad) {
            an->ensure_grad();
            for (std::size_t i = 0; i < on->grad.size(); ++i)
                an->grad[i] += on->grad[i] * bn->value[i];
        }
        if (bn->requires_grad) {
            bn->ensure_grad();
            for (std::size_t i = 0; i < on->grad.size(); ++i)
                bn->grad[i] += on->grad[i] * an->value[i];
        }
    });
    return out;
}

Array affine(const Array& x, double mul_by, double add_to) {
    std::vector<double> v(x.value());
    for (double& e : v) e = e * mul_by + add_to;
    Array out = make_op(x.shape(), std::move(v), {x});
    Node* on = out.node().get();
    Node* xn = x.node().get();
    set_backward(out, [on, xn, mul_by] {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        for (std::size_t i = 0; i < on->grad.size(); ++i) xn->grad[i] += on->grad[i] * mul_by;
    });
    return out;
}

Array scale(const Array& x, double factor) { return affine(x, factor, 0.0); }

namespace {

// Shared scaffolding for unary ops whose derivative is a simple function of
// input and output values.
template <typename Fwd, typename Bwd>
Array unary_op(const Array& x, Fwd fwd, Bwd bwd) {
    std::vector<double> v(x.value());
    for (double& e : v) e = fwd(e);
    Array out = make_op(x.shape(), std::move(v), {x});
    Node* on = out.node().get();
    Node* xn = x.node().get();
    set_backward(out, [on, xn, bwd] {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        for (std::size_t i = 0; i < on->grad.size(); ++i)
            xn->grad[i] += on->grad[i] * bwd(xn->value[i], on->value[i]);
    });
    return out;
}

}  // namespace

Array sin_(const Array& x) {
    return unary_op(
        x, [](double e) { return std::sin(e); },
        [](double in, double) { return std::cos(in); });
}

Array exp_(const Array& x) {
    return unary_op(
        x, [](double e) { return std::exp(e); },
        [](double, double outv) { return outv; });
}

Array log_(const Array& x) {
    return unary_op(
        x, [](double e) { return std::log(e); },
        [](double in, double) { return 1.0 / in; });
}

Array neg_abs(const Array& x) {
    return unary_op(
        x, [](double e) { return -std::fabs(e); },
        [](double in, double) { return in < 0.0 ? 1.0 : -1.0; });
}

Array leaky_relu(const Array& x, double slope) {
    return unary_op(
        x, [slope](double e) { return e >= 0.0 ? e : slope * e; },
        [slope](double in, double) { return in >= 0.0 ? 1.0 : slope; });
}

Array sigmoid(const Array& x) {
    return unary_op(
        x, [](double e) { return 1.0 / (1.0 + std::exp(-e)); },
        [](double, double outv) { return outv * (1.0 - outv); });
}

Array tanh_(const Array& x) {
    return unary_op(
        x, [](double e) { return std::tanh(e); },
        [](double, double outv) { return 1.0 - outv * outv; });
}

Array softplus(const Array& x) {
    return unary_op(
        x,
        [](double e) {
            // log1p(exp(e)) with the large-input branch kept exact.
            return e > 30.0 ? e : std::log1p(std::exp(e));
        },
        [](double in, double) { return 1.0 / (1.0 + std::exp(-in)); });
}

Array recip(const Array& x) {
    return unary_op(
        x, [](double e) { return 1.0 / e; },
        [](double, double outv) { return -outv * outv; });
}

}  // namespace timing::diff

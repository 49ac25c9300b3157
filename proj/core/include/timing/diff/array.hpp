#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace timing::diff {

using Shape = std::vector<int>;

std::int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;          // allocated on first accumulation
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void()> backward_fn; // empty for leaves and no-grad results
    bool requires_grad = false;
    bool consumed = false;             // set once backward() has processed this node
    std::uint64_t id = 0;              // creation order, defines topological order

    void ensure_grad();
};

}  // namespace detail

// Handle to one node of a define-by-run computation graph. Copies share the
// node. Operations build the graph eagerly; backward() walks it in reverse
// creation order, which is a valid topological order because every node is
// created after all of its parents.
class Array {
public:
    Array() = default;

    static Array zeros(Shape shape);
    static Array full(Shape shape, double fill);
    static Array from_data(Shape shape, std::vector<double> data);
    // Leaf with requires_grad set; the building block of Parameter.
    static Array leaf(Shape shape, std::vector<double> data);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const;
    std::int64_t numel() const;
    int dim(int axis) const;
    int ndim() const;

    const std::vector<double>& value() const;
    std::vector<double>& mutable_value();          // leaves only (optimizer updates)
    const std::vector<double>& grad() const;       // throws if no grad accumulated
    bool has_grad() const;
    void zero_grad();
    bool requires_grad() const;
    void set_requires_grad(bool flag);             // leaves only

    double item() const;                           // single-element arrays

    std::uint64_t node_id() const;
    std::shared_ptr<detail::Node> node() const { return node_; }

private:
    explicit Array(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
    std::shared_ptr<detail::Node> node_;

    friend Array make_op(Shape shape, std::vector<double> value, std::vector<Array> parents);
    friend void backward(const Array& loss);
};

// Gradient recording is on by default; evaluation paths disable it to skip
// graph construction entirely.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;
};
bool grad_enabled();

// Runs reverse-mode accumulation from a scalar loss. The graph reachable from
// the loss is released afterwards; a second call on the same graph throws.
void backward(const Array& loss);

// ---- elementwise ----
Array add(const Array& a, const Array& b);        // same shape
Array sub(const Array& a, const Array& b);
Array mul(const Array& a, const Array& b);
Array affine(const Array& x, double mul, double add);
Array scale(const Array& x, double factor);
Array sin_(const Array& x);
Array exp_(const Array& x);
Array log_(const Array& x);
Array neg_abs(const Array& x);                    // -|x|
Array leaky_relu(const Array& x, double slope);
Array sigmoid(const Array& x);
Array tanh_(const Array& x);
Array softplus(const Array& x);
Array recip(const Array& x);

// ---- broadcast helpers ----
// Single-element array expanded to an arbitrary shape; gradient sums back.
Array broadcast_scalar(const Array& s, Shape shape);
// x[..., j] + bias[j] over the last axis.
Array add_bias(const Array& x, const Array& bias);
// x[..., j] * v[j] over the last axis.
Array mul_last(const Array& x, const Array& v);
// m[t, d] added to every batch slice of x[b, t, d].
Array add_mat_bcast(const Array& x, const Array& m);
// outer ops on vectors: out[i, j] = x[i] op y[j]
Array outer_mul(const Array& x, const Array& y);
Array outer_sub(const Array& x, const Array& y);

// ---- structural ----
Array reshape(const Array& x, Shape shape);
Array concat(const std::vector<Array>& parts, int axis);
Array narrow(const Array& x, int axis, int start, int length);
Array transpose2(const Array& x);                 // swap the last two axes (2-D or 3-D)
// rows of table selected by index; gradient scatter-adds into the table.
Array lookup(const Array& table, const std::vector<int>& ids);
// out[i] = x[i, ids[i]]; gradient scatters into the picked columns.
Array gather_cols(const Array& x, const std::vector<int>& ids);

// ---- reductions ----
Array sum_all(const Array& x);
Array mean_all(const Array& x);
Array avg_pool_time(const Array& x);              // [B, T, D] -> [B, D]

// ---- linear algebra ----
Array matmul(const Array& a, const Array& b);     // [N,K]x[K,M]; [G,N,K]x[K,M]
Array bmm(const Array& a, const Array& b);        // [G,N,K]x[G,K,M]

// ---- neural-net specials ----
Array softmax_last(const Array& x);
Array log_softmax_last(const Array& x);
Array layer_norm(const Array& x, const Array& gain, const Array& bias, double eps = 1e-5);
// Causal 1-D convolution; x [B,T,C_in], w [K,C_in,C_out], left-padded K-1.
Array conv1d_causal(const Array& x, const Array& w, const Array& b);
// Batch statistics version used in training; writes the biased batch moments
// so the calling layer can maintain running estimates.
Array batch_norm_train(const Array& x, const Array& gain, const Array& bias,
                       std::vector<double>* batch_mean, std::vector<double>* batch_var,
                       double eps = 1e-5);
// Inference version over fixed moments (no gradient into the moments).
Array batch_norm_eval(const Array& x, const Array& gain, const Array& bias,
                      const std::vector<double>& mean, const std::vector<double>& var,
                      double eps = 1e-5);

// Internal op factory shared by the op implementation files. The result node
// requires grad iff recording is on and any parent requires grad; only then
// are parents retained, and only then should the caller attach a closure via
// set_backward.
Array make_op(Shape shape, std::vector<double> value, std::vector<Array> parents);
void set_backward(Array& result, std::function<void()> fn);

}  // namespace timing::diff

#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "sml/errors.hpp"

namespace sml {

using Shape = std::vector<int>;

std::size_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

template <typename Real>
class Tape;

namespace detail {

template <typename Real>
struct TensorNode {
    Shape shape;
    std::vector<Real> values;
    std::vector<Real> grad; // sized iff requires_grad
    bool requires_grad = false;
    const void* recorded_on = nullptr; // tape that produced this node, null for leaves
};

} // namespace detail

/// Dense real tensor, rank 1-4, row-major. A Tensor is a shared handle to its
/// node, so copies alias the same storage; the tape holds nodes alive until
/// cleared. Gradients of leaves persist across backward passes and accumulate
/// until zero_grad().
template <typename Real>
class Tensor {
public:
    Tensor() = default;

    /// Leaf that participates in differentiation (a trainable parameter).
    static Tensor variable(Shape shape, std::vector<Real> values);
    /// Leaf excluded from differentiation (data, labels, fixed attributes).
    static Tensor constant(Shape shape, std::vector<Real> values);
    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor scalar(Real v, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    int rank() const { return static_cast<int>(node_->shape.size()); }
    std::size_t numel() const { return node_->values.size(); }

    std::vector<Real>& values() { return node_->values; }
    const std::vector<Real>& values() const { return node_->values; }
    std::vector<Real>& grad();
    const std::vector<Real>& grad() const;

    bool requires_grad() const { return node_->requires_grad; }
    void zero_grad();

    /// True when both handles refer to the same underlying node.
    bool same_node(const Tensor& other) const { return node_ == other.node_; }

private:
    friend class Tape<Real>;
    std::shared_ptr<detail::TensorNode<Real>> node_;
};

/// Records operations in execution order and replays them backwards. One tape
/// and its intermediates belong to one execution context; independent tapes
/// may run in parallel contexts.
template <typename Real>
class Tape {
public:
    using BackwardFn = std::function<void()>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // Elementwise ops accept equal shapes or a scalar (1-element) operand on
    // either side; any other shape mixing must go through reshape.
    Tensor<Real> add(const Tensor<Real>& a, const Tensor<Real>& b);
    Tensor<Real> sub(const Tensor<Real>& a, const Tensor<Real>& b);
    Tensor<Real> mul(const Tensor<Real>& a, const Tensor<Real>& b);
    Tensor<Real> scale(const Tensor<Real>& a, Real c);
    Tensor<Real> relu(const Tensor<Real>& a);
    Tensor<Real> exp(const Tensor<Real>& a);
    Tensor<Real> log(const Tensor<Real>& a);

    /// a: m x k, b: k x n -> m x n.
    Tensor<Real> matmul(const Tensor<Real>& a, const Tensor<Real>& b);

    /// input: h x w x c_in, kernel: k x k x c_in x c_out (k odd), bias: c_out.
    /// Stride 1, zero "same" padding, so the output keeps the input's spatial
    /// extents.
    Tensor<Real> conv2d(const Tensor<Real>& input, const Tensor<Real>& kernel,
                        const Tensor<Real>& bias);

    /// x / max(||x||, eps) over the whole (rank-1) tensor.
    Tensor<Real> l2_normalize(const Tensor<Real>& x, Real eps = Real(1e-8));
    /// Like l2_normalize but hard-zero below eps: vanishing vectors map to the
    /// zero vector instead of x/eps.
    Tensor<Real> l2_normalize_or_zero(const Tensor<Real>& x, Real eps = Real(1e-6));
    /// Normalizes each d-vector of an h x w x d map independently.
    Tensor<Real> l2_normalize_pixels(const Tensor<Real>& x, Real eps = Real(1e-8));

    Tensor<Real> reshape(const Tensor<Real>& x, Shape shape);
    /// Concatenate rank-2 tensors with equal row counts along columns.
    Tensor<Real> concat_cols(const std::vector<Tensor<Real>>& parts);
    /// Sum of all elements -> scalar (shape {1}).
    Tensor<Real> sum(const Tensor<Real>& x);

    /// Record an externally computed op. backward() may read output.grad() and
    /// must accumulate into the captured inputs' grads.
    Tensor<Real> custom(const std::vector<Tensor<Real>>& inputs, Shape shape,
                        std::vector<Real> values, std::function<void(Tensor<Real>&)> backward);

    /// Reverse sweep from a scalar loss recorded on this tape. Leaf gradients
    /// accumulate; intermediate gradients are reset per sweep.
    void backward(const Tensor<Real>& loss);

    /// Drop every recorded operation (and with it all intermediate nodes).
    void clear();
    std::size_t recorded() const { return entries_.size(); }

    /// While recording is off, ops still compute values but produce constants;
    /// used for inference passes.
    void set_recording(bool on) { recording_ = on; }
    bool recording() const { return recording_; }

private:
    struct Entry {
        std::shared_ptr<detail::TensorNode<Real>> out;
        BackwardFn bw;
    };

    Tensor<Real> emit(Shape shape, std::vector<Real> values, bool grad_needed, BackwardFn bw);
    Tensor<Real> binary_pointwise(const Tensor<Real>& a, const Tensor<Real>& b, int mode);

    std::vector<Entry> entries_;
    bool recording_ = true;
};

} // namespace sml

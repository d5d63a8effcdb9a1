#include "sml/tensor.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <numeric>
#include <sstream>

namespace sml {

std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (int e : s) {
        if (e <= 0) throw ContractError("shape extents must be positive, got " + shape_str(s));
        n *= static_cast<std::size_t>(e);
    }
    return n;
}

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
    os << "]";
    return os.str();
}

namespace {

void check_rank(const Shape& s) {
    if (s.empty() || s.size() > 4)
        throw ContractError("tensor rank must be 1-4, got " + shape_str(s));
}

template <typename Real>
bool all_finite(const std::vector<Real>& v) {
    for (Real x : v)
        if (!std::isfinite(static_cast<double>(x))) return false;
    return true;
}

} // namespace

template <typename Real>
Tensor<Real> Tensor<Real>::variable(Shape shape, std::vector<Real> values) {
    check_rank(shape);
    if (shape_numel(shape) != values.size())
        throw ContractError("value count does not match shape " + shape_str(shape));
    Tensor t;
    t.node_ = std::make_shared<detail::TensorNode<Real>>();
    t.node_->shape = std::move(shape);
    t.node_->values = std::move(values);
    t.node_->requires_grad = true;
    t.node_->grad.assign(t.node_->values.size(), Real(0));
    return t;
}

template <typename Real>
Tensor<Real> Tensor<Real>::constant(Shape shape, std::vector<Real> values) {
    check_rank(shape);
    if (shape_numel(shape) != values.size())
        throw ContractError("value count does not match shape " + shape_str(shape));
    Tensor t;
    t.node_ = std::make_shared<detail::TensorNode<Real>>();
    t.node_->shape = std::move(shape);
    t.node_->values = std::move(values);
    return t;
}

template <typename Real>
Tensor<Real> Tensor<Real>::zeros(Shape shape, bool requires_grad) {
    std::vector<Real> v(shape_numel(shape), Real(0));
    return requires_grad ? variable(std::move(shape), std::move(v))
                         : constant(std::move(shape), std::move(v));
}

template <typename Real>
Tensor<Real> Tensor<Real>::scalar(Real v, bool requires_grad) {
    return requires_grad ? variable({1}, {v}) : constant({1}, {v});
}

template <typename Real>
std::vector<Real>& Tensor<Real>::grad() {
    if (!node_->requires_grad) throw ContractError("tensor does not require grad");
    return node_->grad;
}

template <typename Real>
const std::vector<Real>& Tensor<Real>::grad() const {
    if (!node_->requires_grad) throw ContractError("tensor does not require grad");
    return node_->grad;
}

template <typename Real>
void Tensor<Real>::zero_grad() {
    if (node_->requires_grad) std::fill(node_->grad.begin(), node_->grad.end(), Real(0));
}

template <typename Real>
Tensor<Real> Tape<Real>::emit(Shape shape, std::vector<Real> values, bool grad_needed,
                              BackwardFn bw) {
    assert(all_finite(values));
    Tensor<Real> out;
    out.node_ = std::make_shared<detail::TensorNode<Real>>();
    out.node_->shape = std::move(shape);
    out.node_->values = std::move(values);
    if (recording_ && grad_needed) {
        out.node_->requires_grad = true;
        out.node_->grad.assign(out.node_->values.size(), Real(0));
        out.node_->recorded_on = this;
        entries_.push_back({out.node_, std::move(bw)});
    }
    return out;
}

// mode: 0 add, 1 sub, 2 mul
template <typename Real>
Tensor<Real> Tape<Real>::binary_pointwise(const Tensor<Real>& a, const Tensor<Real>& b, int mode) {
    const bool a_scalar = a.numel() == 1;
    const bool b_scalar = b.numel() == 1;
    if (!(a.shape() == b.shape() || a_scalar || b_scalar))
        throw ContractError("pointwise op needs equal shapes or a scalar operand: " +
                            shape_str(a.shape()) + " vs " + shape_str(b.shape()));

    const Shape& out_shape = a_scalar && !b_scalar ? b.shape() : a.shape();
    const std::size_t n = shape_numel(out_shape);
    std::vector<Real> out(n);
    const auto& av = a.values();
    const auto& bv = b.values();
    for (std::size_t i = 0; i < n; ++i) {
        Real x = av[a_scalar ? 0 : i];
        Real y = bv[b_scalar ? 0 : i];
        out[i] = mode == 0 ? x + y : mode == 1 ? x - y : x * y;
    }

    bool needs = a.requires_grad() || b.requires_grad();
    Tensor<Real> result;
    auto an = a.node_;
    auto bn = b.node_;
    result = emit(out_shape, std::move(out), needs, BackwardFn());
    if (result.node_->requires_grad) {
        auto on = result.node_;
        entries_.back().bw = [an, bn, on, a_scalar, b_scalar, mode]() {
            const auto& g = on->grad;
            const std::size_t n = g.size();
            if (an->requires_grad) {
                for (std::size_t i = 0; i < n; ++i) {
                    Real gi = g[i];
                    if (mode == 2) gi *= bn->values[b_scalar ? 0 : i];
                    an->grad[a_scalar ? 0 : i] += gi;
                }
            }
            if (bn->requires_grad) {
                for (std::size_t i = 0; i < n; ++i) {
                    Real gi = g[i];
                    if (mode == 1) gi = -gi;
                    if (mode == 2) gi = g[i] * an->values[a_scalar ? 0 : i];
                    bn->grad[b_scalar ? 0 : i] += gi;
                }
            }
        };
    }
    return result;
}

template <typename Real>
Tensor<Real> Tape<Real>::add(const Tensor<Real>& a, const Tensor<Real>& b) {
    return binary_pointwise(a, b, 0);
}

template <typename Real>
Tensor<Real> Tape<Real>::sub(const Tensor<Real>& a, const Tensor<Real>& b) {
    return binary_pointwise(a, b, 1);
}

template <typename Real>
Tensor<Real> Tape<Real>::mul(const Tensor<Real>& a, const Tensor<Real>& b) {
    return binary_pointwise(a, b, 2);
}

template <typename Real>
Tensor<Real> Tape<Real>::scale(const Tensor<Real>& a, Real c) {
    std::vector<Real> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * c;
    auto an = a.node_;
    Tensor<Real> result = emit(a.shape(), std::move(out), a.requires_grad(), BackwardFn());
    if (result.node_->requires_grad) {
        auto on = result.node_;
        entries_.back().bw = [an, on, c]() {
            for (std::size_t i = 0; i < on->grad.size(); ++i) an->grad[i] += on->grad[i] * c;
        };
    }
    return result;
}

template <typename Real>
Tensor<Real> Tape<Real>::relu(const Tensor<Real>& a) {
    std::vector<Real> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(a.values()[i], Real(0));
    auto an = a.node_;
    Tensor<Real> result = emit(a.shape(), std::move(out), a.requires_grad(), BackwardFn());
    if (result.node_->requires_grad) {
        auto on = result.node_;
        entries_.back().bw = [an, on]() {
            for (std::size_t i = 0; i < on->grad.size(); ++i)
                if (an->values[i] > Real(0)) an->grad[i] += on->grad[i];
        };
    }
    return result;
}

template <typename Real>
Tensor<Real> Tape<Real>::exp(const Tensor<Real>& a) {
    std::vector<Real> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(a.values()[i]);
    auto an = a.node_;
    Tensor<Real> result = emit(a.shape(), std::move(out), a.requires_grad(), BackwardFn());
    if (result.node_->requires_grad) {
        auto on = result.node_;
        entries_.back().bw = [an, on]() {
            for (std::size_t i = 0; i < on->grad.size(); ++i)
                an->grad[i] += on->grad[i] * on->values[i];
        };
    }
    return result;
}

template <typename Real>
Tensor<Real> Tape<Real>::log(const Tensor<Real>& a) {
    std::vector<Real> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (!(a.values()[i] > Real(0)))
            throw std::domain_error("log of non-positive value");
        out[i] = std::log(a.values()[i]);
    }
    auto an = a.node_;
    Tensor<Real> result = emit(a.shape(), std::move(out), a.requires_grad(), BackwardFn());
    if (result.node_->requires_grad) {
        auto on = result.node_;
        entries_.back().bw = [an, on]() {
            for (std::size_t i = 0; i < on->grad.size(); ++i)
                an->grad[i] += on->grad[i] / an->values[i];
        };
    }
    return result;
}

template <typename Real>
Tensor<Real> Tape<Real>::matmul(const Tensor<Real>& a, const Tensor<Real>& b) {
    if (a.rank() != 2 || b.rank() != 2)
        throw ContractError("matmul needs rank-2 operands, got " + shape_str(a.shape()) + " and " +
                            shape_str(b.shape()));
    const int m = a.shape()[0], k = a.shape()[1];
    const int k2 = b.shape()[0], n = b.shape()[1];
    if (k != k2)
        throw ContractError("matmul inner extents differ: " + shape_str(a.shape()) + " vs " +
                            shape_str(b.shape()));

    std::vector<Real> out(static_cast<std::size_t>(m) * n, Real(0));
    const auto& av = a.values();
    const auto& bv = b.values();
    for (int i = 0; i < m; ++i)
        for (int p = 0; p < k; ++p) {
            Real x = av[static_cast<std::size_t>(i) * k + p];
            const Real* brow = bv.data() + static_cast<std::size_t>(p) * n;
            Real* orow = out.data() + static_cast<std::size_t>(i) * n;
            for (int j = 0; j < n; ++j) orow[j] += x * brow[j];
        }

    auto an = a.node_;
    auto bn = b.node_;
    Tensor<Real> result =
        emit({m, n}, std::move(out), a.requires_grad() || b.requires_grad(), BackwardFn());
    if (result.node_->requires_grad) {
        auto on = result.node_;
        entries_.back().bw = [an, bn, on, m, k, n]() {
            const auto& g = on->grad;
            if (an->requires_grad) {
                // dA = G B^T
                for (int i = 0; i < m; ++i)
                    for (int p = 0; p < k; ++p) {
                        Real acc = 0;
                        const Real* grow = g.data() + static_cast<std::size_t>(i) * n;
                        const Real* brow = bn->values.data() + static_cast<std::size_t>(p) * n;
                        for (int j = 0; j < n; ++j) acc += grow[j] * brow[j];
                        an->grad[static_cast<std::size_t>(i) * k + p] += acc;
                    }
            }
            if (bn->requires_grad) {
                // dB = A^T G
                for (int i = 0; i < m; ++i) {
                    const Real* arow = an->values.data() + static_cast<std::size_t>(i) * k;
                    const Real* grow = g.data() + static_cast<std::size_t>(i) * n;
                    for (int p = 0; p < k; ++p) {
                        Real x = arow[p];
                        Real* brow = bn->grad.data() + static_cast<std::size_t>(p) * n;
                        for (int j = 0; j < n; ++j) brow[j] += x * grow[j];
                    }
                }
            }
        };
    }
    return result;
}

template <typename Real>
Tensor<Real> Tape<Real>::conv2d(const Tensor<Real>& input, const Tensor<Real>& kernel,
                                const Tensor<Real>& bias) {
    if (input.rank() != 3 || kernel.rank() != 4 || bias.rank() != 1)
        throw ContractError("conv2d expects input h x w x c_in, kernel k x k x c_in x c_out, "
                            "bias c_out");
    const int h = input.shape()[0], w = input.shape()[1], cin = input.shape()[2];
    const int k = kernel.shape()[0];
    const int cout = kernel.shape()[3];
    if (kernel.shape()[1] != k || kernel.shape()[2] != cin)
        throw ContractError("conv2d kernel shape " + shape_str(kernel.shape()) +
                            " does not match input " + shape_str(input.shape()));
    if (k % 2 == 0) throw ContractError("conv2d kernel extent must be odd");
    if (bias.shape()[0] != cout) throw ContractError("conv2d bias extent must equal c_out");
    const int pad = k / 2;

    std::vector<Real> out(static_cast<std::size_t>(h) * w * cout);
    const auto& in = input.values();
    const auto& kv = kernel.values();
    const auto& bv = bias.values();
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) {
            Real* orow = out.data() + (static_cast<std::size_t>(i) * w + j) * cout;
            for (int co = 0; co < cout; ++co) orow[co] = bv[co];
            for (int di = 0; di < k; ++di) {
                int a = i + di - pad;
                if (a < 0 || a >= h) continue;
                for (int dj = 0; dj < k; ++dj) {
                    int b = j + dj - pad;
                    if (b < 0 || b >= w) continue;
                    const Real* irow = in.data() + (static_cast<std::size_t>(a) * w + b) * cin;
                    const Real* kslab =
                        kv.data() + ((static_cast<std::size_t>(di) * k + dj) * cin) * cout;
                    for (int ci = 0; ci < cin; ++ci) {
                        Real x = irow[ci];
                        const Real* krow = kslab + static_cast<std::size_t>(ci) * cout;
                        for (int co = 0; co < cout; ++co) orow[co] += x * krow[co];
                    }
                }
            }
        }

    bool needs = input.requires_grad() || kernel.requires_grad() || bias.requires_grad();
    auto in_n = input.node_;
    auto k_n = kernel.node_;
    auto b_n = bias.node_;
    Tensor<Real> result = emit({h, w, cout}, std::move(out), needs, BackwardFn());
    if (result.node_->requires_grad) {
        auto on = result.node_;
        entries_.back().bw = [in_n, k_n, b_n, on, h, w, cin, k, cout, pad]() {
            const auto& g = on->grad;
            const bool gi = in_n->requires_grad;
            const bool gk = k_n->requires_grad;
            const bool gb = b_n->requires_grad;
            for (int i = 0; i < h; ++i)
                for (int j = 0; j < w; ++j) {
                    const Real* grow = g.data() + (static_cast<std::size_t>(i) * w + j) * cout;
                    if (gb)
                        for (int co = 0; co < cout; ++co) b_n->grad[co] += grow[co];
                    for (int di = 0; di < k; ++di) {
                        int a = i + di - pad;
                        if (a < 0 || a >= h) continue;
                        for (int dj = 0; dj < k; ++dj) {
                            int b = j + dj - pad;
                            if (b < 0 || b >= w) continue;
                            const std::size_t ioff = (static_cast<std::size_t>(a) * w + b) * cin;
                            const std::size_t koff =
                                ((static_cast<std::size_t>(di) * k + dj) * cin) * cout;
                            for (int ci = 0; ci < cin; ++ci) {
                                const Real* krow = k_n->values.data() + koff +
                                                   static_cast<std::size_t>(ci) * cout;
                                if (gi) {
                                    Real acc = 0;
                                    for (int co = 0; co < cout; ++co) acc += grow[co] * krow[co];
                                    in_n->grad[ioff + ci] += acc;
                                }
                                if (gk) {
                                    Real x = in_n->values[ioff + ci];
                                    Real* kg = k_n->grad.data() + koff +
                                               static_cast<std::size_t>(ci) * cout;
                                    for (int co = 0; co < cout; ++co) kg[co] += x * grow[co];
                                }
                            }
                        }
                    }
                }
        };
    }
    return result;
}

namespace {

// Shared forward/backward for the normalize family. hard_zero selects the
// vanishing-vector policy: zero output vs x/eps.
template <typename Real>
void normalize_span(const Real* x, Real* y, std::size_t d, Real eps, bool hard_zero,
                    Real* norm_out) {
    double s = 0;
    for (std::size_t i = 0; i < d; ++i) s += static_cast<double>(x[i]) * x[i];
    Real norm = static_cast<Real>(std::sqrt(s));
    *norm_out = norm;
    if (hard_zero && norm < eps) {
        for (std::size_t i = 0; i < d; ++i) y[i] = Real(0);
        return;
    }
    Real denom = std::max(norm, eps);
    for (std::size_t i = 0; i < d; ++i) y[i] = x[i] / denom;
}

template <typename Real>
void normalize_span_backward(const Real* y, const Real* g, Real* gx, std::size_t d, Real eps,
                             bool hard_zero, Real norm) {
    if (hard_zero && norm < eps) return; // constant zero output
    if (norm <= eps) {
        for (std::size_t i = 0; i < d; ++i) gx[i] += g[i] / eps;
        return;
    }
    double dot = 0;
    for (std::size_t i = 0; i < d; ++i) dot += static_cast<double>(g[i]) * y[i];
    for (std::size_t i = 0; i < d; ++i)
        gx[i] += (g[i] - static_cast<Real>(dot) * y[i]) / norm;
}

} // namespace

template <typename Real>
Tensor<Real> Tape<Real>::l2_normalize(const Tensor<Real>& x, Real eps) {
    const std::size_t d = x.numel();
    std::vector<Real> out(d);
    Real norm;
    normalize_span(x.values().data(), out.data(), d, eps, false, &norm);
    auto xn = x.node_;
    Tensor<Real> result = emit(x.shape(), std::move(out), x.requires_grad(), BackwardFn());
    if (result.node_->requires_grad) {
        auto on = result.node_;
        entries_.back().bw = [xn, on, d, eps, norm]() {
            normalize_span_backward(on->values.data(), on->grad.data(), xn->grad.data(), d, eps,
                                    false, norm);
        };
    }
    return result;
}

template <typename Real>
Tensor<Real> Tape<Real>::l2_normalize_or_zero(const Tensor<Real>& x, Real eps) {
    const std::size_t d = x.numel();
    std::vector<Real> out(d);
    Real norm;
    normalize_span(x.values().data(), out.data(), d, eps, true, &norm);
    auto xn = x.node_;
    Tensor<Real> result = emit(x.shape(), std::move(out), x.requires_grad(), BackwardFn());
    if (result.node_->requires_grad) {
        auto on = result.node_;
        entries_.back().bw = [xn, on, d, eps, norm]() {
            normalize_span_backward(on->values.data(), on->grad.data(), xn->grad.data(), d, eps,
                                    true, norm);
        };
    }
    return result;
}

template <typename Real>
Tensor<Real> Tape<Real>::l2_normalize_pixels(const Tensor<Real>& x, Real eps) {
    if (x.rank() != 3) throw ContractError("l2_normalize_pixels expects h x w x d");
    const std::size_t px = static_cast<std::size_t>(x.shape()[0]) * x.shape()[1];
    const std::size_t d = static_cast<std::size_t>(x.shape()[2]);
    std::vector<Real> out(x.numel());
    std::vector<Real> norms(px);
    for (std::size_t p = 0; p < px; ++p)
        normalize_span(x.values().data() + p * d, out.data() + p * d, d, eps, false, &norms[p]);
    auto xn = x.node_;
    Tensor<Real> result = emit(x.shape(), std::move(out), x.requires_grad(), BackwardFn());
    if (result.node_->requires_grad) {
        auto on = result.node_;
        entries_.back().bw = [xn, on, px, d, eps, norms = std::move(norms)]() {
            for (std::size_t p = 0; p < px; ++p)
                normalize_span_backward(on->values.data() + p * d, on->grad.data() + p * d,
                                        xn->grad.data() + p * d, d, eps, false, norms[p]);
        };
    }
    return result;
}

template <typename Real>
Tensor<Real> Tape<Real>::reshape(const Tensor<Real>& x, Shape shape) {
    if (shape_numel(shape) != x.numel())
        throw ContractError("reshape from " + shape_str(x.shape()) + " to " + shape_str(shape) +
                            " changes element count");
    auto xn = x.node_;
    Tensor<Real> result = emit(std::move(shape), x.values(), x.requires_grad(), BackwardFn());
    if (result.node_->requires_grad) {
        auto on = result.node_;
        entries_.back().bw = [xn, on]() {
            for (std::size_t i = 0; i < on->grad.size(); ++i) xn->grad[i] += on->grad[i];
        };
    }
    return result;
}

template <typename Real>
Tensor<Real> Tape<Real>::concat_cols(const std::vector<Tensor<Real>>& parts) {
    if (parts.empty()) throw ContractError("concat_cols needs at least one part");
    const int rows = parts[0].shape()[0];
    int cols = 0;
    bool needs = false;
    for (const auto& p : parts) {
        if (p.rank() != 2 || p.shape()[0] != rows)
            throw ContractError("concat_cols parts must be rank-2 with equal row counts");
        cols += p.shape()[1];
        needs = needs || p.requires_grad();
    }
    std::vector<Real> out(static_cast<std::size_t>(rows) * cols);
    int ofs = 0;
    for (const auto& p : parts) {
        const int pc = p.shape()[1];
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < pc; ++c)
                out[static_cast<std::size_t>(r) * cols + ofs + c] =
                    p.values()[static_cast<std::size_t>(r) * pc + c];
        ofs += pc;
    }
    std::vector<std::shared_ptr<detail::TensorNode<Real>>> nodes;
    nodes.reserve(parts.size());
    for (const auto& p : parts) nodes.push_back(p.node_);
    Tensor<Real> result = emit({rows, cols}, std::move(out), needs, BackwardFn());
    if (result.node_->requires_grad) {
        auto on = result.node_;
        entries_.back().bw = [nodes = std::move(nodes), on, rows, cols]() {
            int ofs = 0;
            for (const auto& pn : nodes) {
                const int pc = pn->shape[1];
                if (pn->requires_grad)
                    for (int r = 0; r < rows; ++r)
                        for (int c = 0; c < pc; ++c)
                            pn->grad[static_cast<std::size_t>(r) * pc + c] +=
                                on->grad[static_cast<std::size_t>(r) * cols + ofs + c];
                ofs += pc;
            }
        };
    }
    return result;
}

template <typename Real>
Tensor<Real> Tape<Real>::sum(const Tensor<Real>& x) {
    Real s = 0;
    for (Real v : x.values()) s += v;
    auto xn = x.node_;
    Tensor<Real> result = emit({1}, {s}, x.requires_grad(), BackwardFn());
    if (result.node_->requires_grad) {
        auto on = result.node_;
        entries_.back().bw = [xn, on]() {
            Real g = on->grad[0];
            for (auto& gx : xn->grad) gx += g;
        };
    }
    return result;
}

template <typename Real>
Tensor<Real> Tape<Real>::custom(const std::vector<Tensor<Real>>& inputs, Shape shape,
                                std::vector<Real> values,
                                std::function<void(Tensor<Real>&)> backward) {
    bool needs = false;
    for (const auto& in : inputs) needs = needs || in.requires_grad();
    Tensor<Real> result = emit(std::move(shape), std::move(values), needs, BackwardFn());
    if (result.node_->requires_grad) {
        Tensor<Real> handle = result;
        entries_.back().bw = [handle, backward = std::move(backward)]() mutable {
            backward(handle);
        };
    }
    return result;
}

template <typename Real>
void Tape<Real>::backward(const Tensor<Real>& loss) {
    if (!loss.defined() || loss.numel() != 1)
        throw ContractError("backward needs a scalar loss");
    if (loss.node_->recorded_on != this)
        throw ContractError("loss was not recorded on this tape");
    for (auto& e : entries_) std::fill(e.out->grad.begin(), e.out->grad.end(), Real(0));
    loss.node_->grad[0] = Real(1);
    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it)
        if (it->bw) it->bw();
}

template <typename Real>
void Tape<Real>::clear() {
    for (auto& e : entries_) e.out->recorded_on = nullptr;
    entries_.clear();
}

template class Tensor<float>;
template class Tensor<double>;
template class Tape<float>;
template class Tape<double>;

} // namespace sml

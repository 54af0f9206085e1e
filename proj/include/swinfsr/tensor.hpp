#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <type_traits>
#include <unordered_set>
#include <vector>

#include "swinfsr/error.hpp"
#include "swinfsr/rng.hpp"

namespace swinfsr {

using Shape = std::vector<std::int64_t>;

inline std::int64_t shape_numel(const Shape& s) {
    std::int64_t n = 1;
    for (auto d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << ')';
    return os.str();
}

inline std::vector<std::int64_t> row_major_strides(const Shape& s) {
    std::vector<std::int64_t> st(s.size(), 1);
    for (int i = static_cast<int>(s.size()) - 2; i >= 0; --i)
        st[static_cast<std::size_t>(i)] = st[static_cast<std::size_t>(i) + 1] * s[static_cast<std::size_t>(i) + 1];
    return st;
}

// Reverse-mode tape node. backward_fn reads this node's grad and
// accumulates into the parents' grads; it must not capture the node's
// own shared_ptr (that would be a reference cycle).
template <typename T>
struct Node {
    Shape shape;
    std::vector<T> value;
    std::vector<T> grad;
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node<T>>> parents;
    std::function<void(Node<T>&)> backward_fn;

    std::int64_t numel() const { return static_cast<std::int64_t>(value.size()); }
    void ensure_grad() {
        if (grad.size() != value.size()) grad.assign(value.size(), T(0));
    }
};

namespace detail {
inline bool& grad_mode_flag() {
    thread_local bool enabled = true;
    return enabled;
}
}  // namespace detail

// Disables tape recording in scope (forward-only evaluation).
struct NoGradGuard {
    NoGradGuard() : prev(detail::grad_mode_flag()) { detail::grad_mode_flag() = false; }
    ~NoGradGuard() { detail::grad_mode_flag() = prev; }
    bool prev;
};

inline bool grad_enabled() { return detail::grad_mode_flag(); }

template <typename T>
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(Shape shape, T fill = T(0), bool requires_grad = false)
        : n_(std::make_shared<Node<T>>()) {
        n_->shape = std::move(shape);
        n_->value.assign(static_cast<std::size_t>(shape_numel(n_->shape)), fill);
        n_->requires_grad = requires_grad;
    }

    static Tensor from_data(Shape shape, std::vector<T> data, bool requires_grad = false) {
        if (shape_numel(shape) != static_cast<std::int64_t>(data.size()))
            throw ShapeError("tensor data length " + std::to_string(data.size()) +
                             " does not match shape " + shape_str(shape));
        Tensor t;
        t.n_ = std::make_shared<Node<T>>();
        t.n_->shape = std::move(shape);
        t.n_->value = std::move(data);
        t.n_->requires_grad = requires_grad;
        return t;
    }

    static Tensor zeros(Shape shape, bool requires_grad = false) {
        return Tensor(std::move(shape), T(0), requires_grad);
    }
    static Tensor full(Shape shape, T v, bool requires_grad = false) {
        return Tensor(std::move(shape), v, requires_grad);
    }
    static Tensor scalar(T v) { return Tensor(Shape{}, v); }

    static Tensor uniform(Shape shape, Rng& rng, double lo, double hi, bool requires_grad = false) {
        Tensor t(std::move(shape), T(0), requires_grad);
        for (auto& v : t.n_->value) v = static_cast<T>(rng.uniform(lo, hi));
        return t;
    }
    static Tensor normal(Shape shape, Rng& rng, double sigma, bool requires_grad = false) {
        Tensor t(std::move(shape), T(0), requires_grad);
        for (auto& v : t.n_->value) v = static_cast<T>(rng.normal() * sigma);
        return t;
    }
    static Tensor truncated_normal(Shape shape, Rng& rng, double sigma, bool requires_grad = false) {
        Tensor t(std::move(shape), T(0), requires_grad);
        for (auto& v : t.n_->value) v = static_cast<T>(rng.truncated_normal(sigma));
        return t;
    }

    bool defined() const { return n_ != nullptr; }
    const Shape& shape() const { return n_->shape; }
    int dim() const { return static_cast<int>(n_->shape.size()); }
    std::int64_t size(int d) const { return n_->shape[static_cast<std::size_t>(d)]; }
    std::int64_t numel() const { return n_->numel(); }

    T* data() { return n_->value.data(); }
    const T* data() const { return n_->value.data(); }
    std::vector<T>& vec() { return n_->value; }
    const std::vector<T>& vec() const { return n_->value; }

    bool requires_grad() const { return n_->requires_grad; }
    void set_requires_grad(bool b) { n_->requires_grad = b; }
    bool has_grad() const { return n_->grad.size() == n_->value.size(); }
    std::vector<T>& grad() {
        n_->ensure_grad();
        return n_->grad;
    }
    void zero_grad() {
        if (!n_->grad.empty()) std::fill(n_->grad.begin(), n_->grad.end(), T(0));
    }

    T item() const {
        if (numel() != 1) throw ShapeError("item() on non-scalar tensor " + shape_str(shape()));
        return n_->value[0];
    }

    T operator[](std::int64_t i) const { return n_->value[static_cast<std::size_t>(i)]; }
    T& operator[](std::int64_t i) { return n_->value[static_cast<std::size_t>(i)]; }

    bool has_nonfinite() const {
        for (const T& v : n_->value)
            if (!std::isfinite(static_cast<double>(v))) return true;
        return false;
    }

    // Deep copy of the value buffer only (no tape history).
    Tensor clone() const { return from_data(shape(), n_->value, n_->requires_grad); }

    const std::shared_ptr<Node<T>>& node() const { return n_; }

private:
    std::shared_ptr<Node<T>> n_;
};

template <typename From, typename To>
Tensor<To> cast(const Tensor<From>& x) {
    std::vector<To> out(x.vec().size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<To>(x.vec()[i]);
    return Tensor<To>::from_data(x.shape(), std::move(out));
}

namespace detail {

template <typename T>
bool any_requires_grad(std::initializer_list<const Tensor<T>*> xs) {
    for (const auto* x : xs)
        if (x->defined() && x->requires_grad()) return true;
    return false;
}

// Registers out as an interior tape node when recording is active.
template <typename T>
void wire(Tensor<T>& out, std::initializer_list<const Tensor<T>*> parents,
          std::function<void(Node<T>&)> fn) {
    if (!grad_enabled() || !any_requires_grad(parents)) return;
    auto& n = *out.node();
    n.requires_grad = true;
    n.parents.reserve(parents.size());
    for (const auto* p : parents) n.parents.push_back(p->node());
    n.backward_fn = std::move(fn);
}

template <typename T>
void acc(std::vector<T>& dst, const std::vector<T>& src) {
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Backward pass

// Populates gradients of every requires_grad leaf reachable from loss.
// Interior gradients are recomputed from scratch; leaf gradients
// accumulate (call zero_grad on parameters between steps).
template <typename T>
void backward(const Tensor<T>& loss) {
    if (loss.numel() != 1) throw ShapeError("backward() requires a scalar loss, got " + shape_str(loss.shape()));
    if (!loss.requires_grad()) return;

    // Iterative DFS post-order over parent edges; reverse post-order is
    // a topological order with every consumer before its producers.
    std::vector<Node<T>*> order;
    std::unordered_set<Node<T>*> visited;
    std::vector<std::pair<Node<T>*, std::size_t>> stack;
    stack.emplace_back(loss.node().get(), 0);
    visited.insert(loss.node().get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        bool descended = false;
        while (next < node->parents.size()) {
            Node<T>* p = node->parents[next++].get();
            if (p->requires_grad && !visited.count(p)) {
                visited.insert(p);
                stack.emplace_back(p, 0);
                descended = true;
                break;
            }
        }
        if (!descended && (stack.back().second >= stack.back().first->parents.size())) {
            order.push_back(stack.back().first);
            stack.pop_back();
        }
    }

    for (Node<T>* n : order) {
        if (n->backward_fn) {
            n->grad.assign(n->value.size(), T(0));  // interior: fresh
        } else {
            n->ensure_grad();  // leaf: accumulate across calls
        }
    }
    loss.node()->grad[0] = T(1);

    for (auto it = order.rbegin(); it != order.rend(); ++it)
        if ((*it)->backward_fn) (*it)->backward_fn(**it);
}

// ---------------------------------------------------------------------------
// Elementwise ops

namespace detail {
template <typename T>
void check_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
    if (a.shape() != b.shape())
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}
}  // namespace detail

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    detail::check_same_shape(a, b, "add");
    Tensor<T> out(a.shape());
    const T* pa = a.data();
    const T* pb = b.data();
    T* po = out.data();
    const std::int64_t n = a.numel();
    for (std::int64_t i = 0; i < n; ++i) po[i] = pa[i] + pb[i];
    detail::wire<T>(out, {&a, &b}, [an = a.node(), bn = b.node()](Node<T>& self) {
        if (an->requires_grad) detail::acc(an->grad, self.grad);
        if (bn->requires_grad) detail::acc(bn->grad, self.grad);
    });
    return out;
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
    detail::check_same_shape(a, b, "sub");
    Tensor<T> out(a.shape());
    const T* pa = a.data();
    const T* pb = b.data();
    T* po = out.data();
    const std::int64_t n = a.numel();
    for (std::int64_t i = 0; i < n; ++i) po[i] = pa[i] - pb[i];
    detail::wire<T>(out, {&a, &b}, [an = a.node(), bn = b.node()](Node<T>& self) {
        if (an->requires_grad) detail::acc(an->grad, self.grad);
        if (bn->requires_grad)
            for (std::size_t i = 0; i < bn->grad.size(); ++i) bn->grad[i] -= self.grad[i];
    });
    return out;
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    detail::check_same_shape(a, b, "mul");
    Tensor<T> out(a.shape());
    const T* pa = a.data();
    const T* pb = b.data();
    T* po = out.data();
    const std::int64_t n = a.numel();
    for (std::int64_t i = 0; i < n; ++i) po[i] = pa[i] * pb[i];
    detail::wire<T>(out, {&a, &b}, [a, b](Node<T>& self) {
        auto an = a.node();
        auto bn = b.node();
        if (an->requires_grad)
            for (std::size_t i = 0; i < an->grad.size(); ++i) an->grad[i] += self.grad[i] * b.data()[i];
        if (bn->requires_grad)
            for (std::size_t i = 0; i < bn->grad.size(); ++i) bn->grad[i] += self.grad[i] * a.data()[i];
    });
    return out;
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, std::type_identity_t<T> c) {
    Tensor<T> out(a.shape());
    for (std::int64_t i = 0; i < a.numel(); ++i) out.data()[i] = a.data()[i] + c;
    detail::wire<T>(out, {&a}, [an = a.node()](Node<T>& self) {
        if (an->requires_grad) detail::acc(an->grad, self.grad);
    });
    return out;
}

template <typename T>
Tensor<T> mul_scalar(const Tensor<T>& a, std::type_identity_t<T> c) {
    Tensor<T> out(a.shape());
    for (std::int64_t i = 0; i < a.numel(); ++i) out.data()[i] = a.data()[i] * c;
    detail::wire<T>(out, {&a}, [an = a.node(), c](Node<T>& self) {
        if (an->requires_grad)
            for (std::size_t i = 0; i < an->grad.size(); ++i) an->grad[i] += self.grad[i] * c;
    });
    return out;
}

template <typename T>
Tensor<T> leaky_relu(const Tensor<T>& a, T slope = T(0.2)) {
    Tensor<T> out(a.shape());
    const T* pa = a.data();
    T* po = out.data();
    for (std::int64_t i = 0; i < a.numel(); ++i) po[i] = pa[i] > T(0) ? pa[i] : slope * pa[i];
    detail::wire<T>(out, {&a}, [a, slope](Node<T>& self) {
        auto an = a.node();
        if (!an->requires_grad) return;
        for (std::size_t i = 0; i < an->grad.size(); ++i)
            an->grad[i] += self.grad[i] * (a.data()[i] > T(0) ? T(1) : slope);
    });
    return out;
}

template <typename T>
Tensor<T> relu(const Tensor<T>& a) {
    return leaky_relu(a, T(0));
}

// Exact-erf GELU: x * Phi(x).
template <typename T>
Tensor<T> gelu(const Tensor<T>& a) {
    constexpr double inv_sqrt2 = 0.70710678118654752440;
    Tensor<T> out(a.shape());
    for (std::int64_t i = 0; i < a.numel(); ++i) {
        const double x = static_cast<double>(a.data()[i]);
        out.data()[i] = static_cast<T>(x * 0.5 * (1.0 + std::erf(x * inv_sqrt2)));
    }
    detail::wire<T>(out, {&a}, [a](Node<T>& self) {
        auto an = a.node();
        if (!an->requires_grad) return;
        constexpr double inv_sqrt2pi = 0.39894228040143267794;
        for (std::size_t i = 0; i < an->grad.size(); ++i) {
            const double x = static_cast<double>(a.data()[i]);
            const double phi = 0.5 * (1.0 + std::erf(x * inv_sqrt2));
            const double pdf = inv_sqrt2pi * std::exp(-0.5 * x * x);
            an->grad[i] += self.grad[i] * static_cast<T>(phi + x * pdf);
        }
    });
    return out;
}

template <typename T>
Tensor<T> abs(const Tensor<T>& a) {
    Tensor<T> out(a.shape());
    for (std::int64_t i = 0; i < a.numel(); ++i) out.data()[i] = std::fabs(a.data()[i]);
    detail::wire<T>(out, {&a}, [a](Node<T>& self) {
        auto an = a.node();
        if (!an->requires_grad) return;
        for (std::size_t i = 0; i < an->grad.size(); ++i) {
            const T x = a.data()[i];
            an->grad[i] += self.grad[i] * (x > T(0) ? T(1) : (x < T(0) ? T(-1) : T(0)));
        }
    });
    return out;
}

// ---------------------------------------------------------------------------
// Reductions

template <typename T>
Tensor<T> sum_all(const Tensor<T>& a) {
    T s = T(0);
    for (std::int64_t i = 0; i < a.numel(); ++i) s += a.data()[i];
    Tensor<T> out = Tensor<T>::scalar(s);
    detail::wire<T>(out, {&a}, [an = a.node()](Node<T>& self) {
        if (!an->requires_grad) return;
        const T g = self.grad[0];
        for (auto& v : an->grad) v += g;
    });
    return out;
}

template <typename T>
Tensor<T> mean_all(const Tensor<T>& a) {
    const T inv = T(1) / static_cast<T>(a.numel());
    T s = T(0);
    for (std::int64_t i = 0; i < a.numel(); ++i) s += a.data()[i];
    Tensor<T> out = Tensor<T>::scalar(s * inv);
    detail::wire<T>(out, {&a}, [an = a.node(), inv](Node<T>& self) {
        if (!an->requires_grad) return;
        const T g = self.grad[0] * inv;
        for (auto& v : an->grad) v += g;
    });
    return out;
}

namespace detail {
// Decomposes shape around axis d into (outer, len, inner) extents.
inline void axis_split(const Shape& s, int d, std::int64_t& outer, std::int64_t& len, std::int64_t& inner) {
    if (d < 0 || d >= static_cast<int>(s.size()))
        throw ShapeError("axis " + std::to_string(d) + " out of range for " + shape_str(s));
    outer = 1;
    inner = 1;
    for (int i = 0; i < d; ++i) outer *= s[static_cast<std::size_t>(i)];
    len = s[static_cast<std::size_t>(d)];
    for (std::size_t i = static_cast<std::size_t>(d) + 1; i < s.size(); ++i) inner *= s[i];
}
}  // namespace detail

template <typename T>
Tensor<T> reduce_sum(const Tensor<T>& a, int dim) {
    std::int64_t outer, len, inner;
    detail::axis_split(a.shape(), dim, outer, len, inner);
    Shape os = a.shape();
    os.erase(os.begin() + dim);
    Tensor<T> out = Tensor<T>::zeros(os);
    const T* pa = a.data();
    T* po = out.data();
    for (std::int64_t o = 0; o < outer; ++o)
        for (std::int64_t l = 0; l < len; ++l)
            for (std::int64_t i = 0; i < inner; ++i)
                po[o * inner + i] += pa[(o * len + l) * inner + i];
    detail::wire<T>(out, {&a}, [an = a.node(), outer, len, inner](Node<T>& self) {
        if (!an->requires_grad) return;
        for (std::int64_t o = 0; o < outer; ++o)
            for (std::int64_t l = 0; l < len; ++l)
                for (std::int64_t i = 0; i < inner; ++i)
                    an->grad[static_cast<std::size_t>((o * len + l) * inner + i)] +=
                        self.grad[static_cast<std::size_t>(o * inner + i)];
    });
    return out;
}

template <typename T>
Tensor<T> reduce_mean(const Tensor<T>& a, int dim) {
    const T inv = T(1) / static_cast<T>(a.size(dim));
    return mul_scalar(reduce_sum(a, dim), inv);
}

// ---------------------------------------------------------------------------
// Shape ops

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape s) {
    if (shape_numel(s) != a.numel())
        throw ShapeError("reshape " + shape_str(a.shape()) + " -> " + shape_str(s) + ": element count differs");
    Tensor<T> out = Tensor<T>::from_data(std::move(s), a.vec());
    detail::wire<T>(out, {&a}, [an = a.node()](Node<T>& self) {
        if (an->requires_grad) detail::acc(an->grad, self.grad);
    });
    return out;
}

template <typename T>
Tensor<T> permute(const Tensor<T>& a, const std::vector<int>& perm) {
    const int nd = a.dim();
    if (static_cast<int>(perm.size()) != nd) throw ShapeError("permute: rank mismatch");
    Shape os(static_cast<std::size_t>(nd));
    for (int i = 0; i < nd; ++i) os[static_cast<std::size_t>(i)] = a.size(perm[static_cast<std::size_t>(i)]);
    Tensor<T> out(os);
    const auto ist = row_major_strides(a.shape());
    const auto ost = row_major_strides(os);
    // out[idx] = in[perm applied]; walk output linearly.
    const std::int64_t n = a.numel();
    std::vector<std::int64_t> src_stride(static_cast<std::size_t>(nd));
    for (int i = 0; i < nd; ++i) src_stride[static_cast<std::size_t>(i)] = ist[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])];
    const T* pa = a.data();
    T* po = out.data();
    std::vector<std::int64_t> idx(static_cast<std::size_t>(nd), 0);
    std::int64_t src = 0;
    for (std::int64_t o = 0; o < n; ++o) {
        po[o] = pa[src];
        for (int d = nd - 1; d >= 0; --d) {
            auto du = static_cast<std::size_t>(d);
            if (++idx[du] < os[du]) {
                src += src_stride[du];
                break;
            }
            idx[du] = 0;
            src -= src_stride[du] * (os[du] - 1);
        }
    }
    detail::wire<T>(out, {&a}, [an = a.node(), os, src_stride, nd](Node<T>& self) {
        if (!an->requires_grad) return;
        std::vector<std::int64_t> idx2(static_cast<std::size_t>(nd), 0);
        std::int64_t src2 = 0;
        const std::int64_t n2 = self.numel();
        for (std::int64_t o = 0; o < n2; ++o) {
            an->grad[static_cast<std::size_t>(src2)] += self.grad[static_cast<std::size_t>(o)];
            for (int d = nd - 1; d >= 0; --d) {
                auto du = static_cast<std::size_t>(d);
                if (++idx2[du] < os[du]) {
                    src2 += src_stride[du];
                    break;
                }
                idx2[du] = 0;
                src2 -= src_stride[du] * (os[du] - 1);
            }
        }
    });
    return out;
}

template <typename T>
Tensor<T> slice(const Tensor<T>& a, int dim, std::int64_t start, std::int64_t len) {
    std::int64_t outer, extent, inner;
    detail::axis_split(a.shape(), dim, outer, extent, inner);
    if (start < 0 || len < 0 || start + len > extent)
        throw ShapeError("slice [" + std::to_string(start) + "," + std::to_string(start + len) + ") out of range on axis " +
                         std::to_string(dim) + " of " + shape_str(a.shape()));
    Shape os = a.shape();
    os[static_cast<std::size_t>(dim)] = len;
    Tensor<T> out(os);
    const T* pa = a.data();
    T* po = out.data();
    for (std::int64_t o = 0; o < outer; ++o)
        std::copy_n(pa + (o * extent + start) * inner, len * inner, po + o * len * inner);
    detail::wire<T>(out, {&a}, [an = a.node(), outer, extent, inner, start, len](Node<T>& self) {
        if (!an->requires_grad) return;
        for (std::int64_t o = 0; o < outer; ++o) {
            const T* g = self.grad.data() + o * len * inner;
            T* dst = an->grad.data() + (o * extent + start) * inner;
            for (std::int64_t i = 0; i < len * inner; ++i) dst[i] += g[i];
        }
    });
    return out;
}

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& xs, int dim) {
    if (xs.empty()) throw ShapeError("concat: empty input list");
    Shape os = xs[0].shape();
    std::int64_t total = 0;
    for (const auto& x : xs) {
        if (x.dim() != xs[0].dim()) throw ShapeError("concat: rank mismatch");
        for (int d = 0; d < x.dim(); ++d)
            if (d != dim && x.size(d) != xs[0].size(d))
                throw ShapeError("concat: shape mismatch " + shape_str(x.shape()) + " vs " + shape_str(xs[0].shape()));
        total += x.size(dim);
    }
    os[static_cast<std::size_t>(dim)] = total;
    Tensor<T> out(os);
    std::int64_t outer, len_total, inner;
    detail::axis_split(os, dim, outer, len_total, inner);
    std::int64_t off = 0;
    for (const auto& x : xs) {
        const std::int64_t len = x.size(dim);
        for (std::int64_t o = 0; o < outer; ++o)
            std::copy_n(x.data() + o * len * inner, len * inner, out.data() + (o * len_total + off) * inner);
        off += len;
    }

    bool any = false;
    for (const auto& x : xs) any = any || x.requires_grad();
    if (grad_enabled() && any) {
        auto& n = *out.node();
        n.requires_grad = true;
        for (const auto& x : xs) n.parents.push_back(x.node());
        std::vector<std::int64_t> lens;
        for (const auto& x : xs) lens.push_back(x.size(dim));
        n.backward_fn = [lens, outer, len_total, inner](Node<T>& self) {
            std::int64_t off2 = 0;
            for (std::size_t k = 0; k < lens.size(); ++k) {
                auto& p = *self.parents[k];
                if (p.requires_grad) {
                    for (std::int64_t o = 0; o < outer; ++o) {
                        const T* g = self.grad.data() + (o * len_total + off2) * inner;
                        T* dst = p.grad.data() + o * lens[k] * inner;
                        for (std::int64_t i = 0; i < lens[k] * inner; ++i) dst[i] += g[i];
                    }
                }
                off2 += lens[k];
            }
        };
    }
    return out;
}

enum class PadMode { Zero, Symmetric, Reflect };

namespace detail {
// Symmetric (edge-repeating) fold of index i into [0, n); period 2n.
inline std::int64_t fold_symmetric(std::int64_t i, std::int64_t n) {
    const std::int64_t p = 2 * n;
    std::int64_t m = i % p;
    if (m < 0) m += p;
    return m < n ? m : p - 1 - m;
}

// Reflect (edge-excluding mirror) fold; period 2(n-1).  n == 1 maps
// everything to the single sample.
inline std::int64_t fold_reflect(std::int64_t i, std::int64_t n) {
    if (n == 1) return 0;
    const std::int64_t p = 2 * (n - 1);
    std::int64_t m = i % p;
    if (m < 0) m += p;
    return m < n ? m : p - m;
}

inline std::int64_t fold_index(std::int64_t i, std::int64_t n, PadMode mode) {
    return mode == PadMode::Reflect ? fold_reflect(i, n) : fold_symmetric(i, n);
}
}  // namespace detail

// Pads the last two dims of [..., H, W].
template <typename T>
Tensor<T> pad2d(const Tensor<T>& a, std::int64_t top, std::int64_t bottom, std::int64_t left, std::int64_t right,
                PadMode mode = PadMode::Zero) {
    if (a.dim() < 2) throw ShapeError("pad2d: need at least 2 dims");
    if (top < 0 || bottom < 0 || left < 0 || right < 0) throw ShapeError("pad2d: negative padding");
    const std::int64_t H = a.size(a.dim() - 2);
    const std::int64_t W = a.size(a.dim() - 1);
    const std::int64_t nh = H + top + bottom;
    const std::int64_t nw = W + left + right;
    std::int64_t batch = a.numel() / (H * W);
    Shape os = a.shape();
    os[static_cast<std::size_t>(a.dim() - 2)] = nh;
    os[static_cast<std::size_t>(a.dim() - 1)] = nw;
    Tensor<T> out(os);
    const T* pa = a.data();
    T* po = out.data();
    for (std::int64_t b = 0; b < batch; ++b) {
        const T* src = pa + b * H * W;
        T* dst = po + b * nh * nw;
        for (std::int64_t y = 0; y < nh; ++y) {
            const std::int64_t sy = y - top;
            for (std::int64_t x = 0; x < nw; ++x) {
                const std::int64_t sx = x - left;
                if (sy >= 0 && sy < H && sx >= 0 && sx < W) {
                    dst[y * nw + x] = src[sy * W + sx];
                } else if (mode == PadMode::Zero) {
                    dst[y * nw + x] = T(0);
                } else {
                    dst[y * nw + x] = src[detail::fold_index(sy, H, mode) * W + detail::fold_index(sx, W, mode)];
                }
            }
        }
    }
    detail::wire<T>(out, {&a}, [an = a.node(), batch, H, W, nh, nw, top, left, mode](Node<T>& self) {
        if (!an->requires_grad) return;
        for (std::int64_t b = 0; b < batch; ++b) {
            const T* g = self.grad.data() + b * nh * nw;
            T* dst = an->grad.data() + b * H * W;
            for (std::int64_t y = 0; y < nh; ++y) {
                const std::int64_t sy = y - top;
                for (std::int64_t x = 0; x < nw; ++x) {
                    const std::int64_t sx = x - left;
                    if (sy >= 0 && sy < H && sx >= 0 && sx < W) {
                        dst[sy * W + sx] += g[y * nw + x];
                    } else if (mode != PadMode::Zero) {
                        dst[detail::fold_index(sy, H, mode) * W + detail::fold_index(sx, W, mode)] += g[y * nw + x];
                    }
                }
            }
        }
    });
    return out;
}

// Removes margins from the last two dims (inverse of pad2d for matching amounts).
template <typename T>
Tensor<T> crop2d(const Tensor<T>& a, std::int64_t top, std::int64_t bottom, std::int64_t left, std::int64_t right) {
    if (a.dim() < 2) throw ShapeError("crop2d: need at least 2 dims");
    const std::int64_t H = a.size(a.dim() - 2);
    const std::int64_t W = a.size(a.dim() - 1);
    if (top + bottom >= H || left + right >= W || top < 0 || bottom < 0 || left < 0 || right < 0)
        throw ShapeError("crop2d: margins exceed tensor size");
    const std::int64_t nh = H - top - bottom;
    const std::int64_t nw = W - left - right;
    std::int64_t batch = a.numel() / (H * W);
    Shape os = a.shape();
    os[static_cast<std::size_t>(a.dim() - 2)] = nh;
    os[static_cast<std::size_t>(a.dim() - 1)] = nw;
    Tensor<T> out(os);
    for (std::int64_t b = 0; b < batch; ++b)
        for (std::int64_t y = 0; y < nh; ++y)
            std::copy_n(a.data() + (b * H + y + top) * W + left, nw, out.data() + (b * nh + y) * nw);
    detail::wire<T>(out, {&a}, [an = a.node(), batch, H, W, nh, nw, top, left](Node<T>& self) {
        if (!an->requires_grad) return;
        for (std::int64_t b = 0; b < batch; ++b)
            for (std::int64_t y = 0; y < nh; ++y) {
                const T* g = self.grad.data() + (b * nh + y) * nw;
                T* dst = an->grad.data() + (b * H + y + top) * W + left;
                for (std::int64_t x = 0; x < nw; ++x) dst[x] += g[x];
            }
    });
    return out;
}

}  // namespace swinfsr

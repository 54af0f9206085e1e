#pragma once

#include <cstring>
#include <optional>

#include "swinfsr/tensor.hpp"

namespace swinfsr {

namespace detail {

// C[M,N] += op_a(A)[M,K] * op_b(B)[K,N].  Transposed operands are stored
// as their untransposed buffers ([K,M] / [N,K]); loop orders keep the
// innermost stride unit in every case.
template <typename T>
void gemm_acc(T* C, const T* A, const T* B, std::int64_t M, std::int64_t N, std::int64_t K, bool ta, bool tb) {
    if (!tb) {
        for (std::int64_t i = 0; i < M; ++i) {
            T* crow = C + i * N;
            for (std::int64_t k = 0; k < K; ++k) {
                const T a = ta ? A[k * M + i] : A[i * K + k];
                const T* brow = B + k * N;
                for (std::int64_t j = 0; j < N; ++j) crow[j] += a * brow[j];
            }
        }
    } else if (!ta) {
        if (K == 4) {  // attention head dim in the small configs; dominates step count
            for (std::int64_t i = 0; i < M; ++i) {
                const T* arow = A + i * 4;
                T* crow = C + i * N;
                const T a0 = arow[0], a1 = arow[1], a2 = arow[2], a3 = arow[3];
                for (std::int64_t j = 0; j < N; ++j) {
                    const T* brow = B + j * 4;
                    crow[j] += a0 * brow[0] + a1 * brow[1] + a2 * brow[2] + a3 * brow[3];
                }
            }
            return;
        }
        for (std::int64_t i = 0; i < M; ++i) {
            const T* arow = A + i * K;
            T* crow = C + i * N;
            for (std::int64_t j = 0; j < N; ++j) {
                const T* brow = B + j * K;
                // fixed 8-lane split so the reduction vectorizes without
                // reassociating the serial order run to run
                T lanes[8] = {T(0), T(0), T(0), T(0), T(0), T(0), T(0), T(0)};
                std::int64_t k = 0;
                for (; k + 8 <= K; k += 8)
                    for (int l = 0; l < 8; ++l) lanes[l] += arow[k + l] * brow[k + l];
                T s = T(0);
                for (; k < K; ++k) s += arow[k] * brow[k];
                for (int l = 0; l < 8; ++l) s += lanes[l];
                crow[j] += s;
            }
        }
    } else {
        std::vector<T> col(static_cast<std::size_t>(M));
        for (std::int64_t j = 0; j < N; ++j) {
            std::fill(col.begin(), col.end(), T(0));
            const T* brow = B + j * K;
            for (std::int64_t k = 0; k < K; ++k) {
                const T b = brow[k];
                const T* acol = A + k * M;
                for (std::int64_t i = 0; i < M; ++i) col[static_cast<std::size_t>(i)] += b * acol[i];
            }
            for (std::int64_t i = 0; i < M; ++i) C[i * N + j] += col[static_cast<std::size_t>(i)];
        }
    }
}

}  // namespace detail

// Batched matrix product with optional operand transposes.
//   a: [B,M,K] (or [B,K,M] when ta), b: [B,K,N] (or [B,N,K] when tb) -> [B,M,N]
template <typename T>
Tensor<T> bmm(const Tensor<T>& a, const Tensor<T>& b, bool ta = false, bool tb = false) {
    if (a.dim() != 3 || b.dim() != 3) throw ShapeError("bmm: operands must be rank 3");
    const std::int64_t B = a.size(0);
    if (b.size(0) != B) throw ShapeError("bmm: batch mismatch");
    const std::int64_t M = ta ? a.size(2) : a.size(1);
    const std::int64_t Ka = ta ? a.size(1) : a.size(2);
    const std::int64_t Kb = tb ? b.size(2) : b.size(1);
    const std::int64_t N = tb ? b.size(1) : b.size(2);
    if (Ka != Kb)
        throw ShapeError("bmm: inner dim mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    const std::int64_t K = Ka;

    Tensor<T> out = Tensor<T>::zeros({B, M, N});
    for (std::int64_t i = 0; i < B; ++i)
        detail::gemm_acc(out.data() + i * M * N, a.data() + i * (ta ? K * M : M * K),
                         b.data() + i * (tb ? N * K : K * N), M, N, K, ta, tb);

    detail::wire<T>(out, {&a, &b}, [a, b, ta, tb, B, M, N, K](Node<T>& self) {
        auto an = a.node();
        auto bn = b.node();
        for (std::int64_t i = 0; i < B; ++i) {
            const T* g = self.grad.data() + i * M * N;
            const T* pa = a.data() + i * (ta ? K * M : M * K);
            const T* pb = b.data() + i * (tb ? N * K : K * N);
            if (an->requires_grad) {
                T* da = an->grad.data() + i * (ta ? K * M : M * K);
                if (!ta)
                    detail::gemm_acc(da, g, pb, M, K, N, false, !tb);
                else
                    detail::gemm_acc(da, pb, g, K, M, N, tb, true);
            }
            if (bn->requires_grad) {
                T* db = bn->grad.data() + i * (tb ? N * K : K * N);
                if (!tb)
                    detail::gemm_acc(db, pa, g, K, N, M, !ta, false);
                else
                    detail::gemm_acc(db, g, pa, N, K, M, true, ta);
            }
        }
    });
    return out;
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.dim() != 2 || b.dim() != 2) throw ShapeError("matmul: operands must be rank 2");
    Tensor<T> a3 = reshape(a, {1, a.size(0), a.size(1)});
    Tensor<T> b3 = reshape(b, {1, b.size(0), b.size(1)});
    return reshape(bmm(a3, b3), {a.size(0), b.size(1)});
}

// y = x W^T + b with W [d_out, d_in]; x [..., d_in].
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
    if (w.dim() != 2) throw ShapeError("linear: weight must be rank 2");
    const std::int64_t din = w.size(1);
    const std::int64_t dout = w.size(0);
    if (x.size(x.dim() - 1) != din)
        throw ShapeError("linear: input feature dim " + std::to_string(x.size(x.dim() - 1)) + " != " + std::to_string(din));
    if (b.defined() && b.numel() != dout) throw ShapeError("linear: bias length mismatch");
    const std::int64_t rows = x.numel() / din;

    Shape os = x.shape();
    os.back() = dout;
    Tensor<T> out(os);
    if (b.defined())
        for (std::int64_t r = 0; r < rows; ++r) std::copy_n(b.data(), dout, out.data() + r * dout);
    detail::gemm_acc(out.data(), x.data(), w.data(), rows, dout, din, false, true);

    if (b.defined())
        detail::wire<T>(out, {&x, &w, &b}, [x, w, b, rows, din, dout](Node<T>& self) {
            auto xn = x.node();
            auto wn = w.node();
            auto bn = b.node();
            if (xn->requires_grad) detail::gemm_acc(xn->grad.data(), self.grad.data(), w.data(), rows, din, dout, false, false);
            if (wn->requires_grad) detail::gemm_acc(wn->grad.data(), self.grad.data(), x.data(), dout, din, rows, true, false);
            if (bn->requires_grad)
                for (std::int64_t r = 0; r < rows; ++r)
                    for (std::int64_t j = 0; j < dout; ++j) bn->grad[static_cast<std::size_t>(j)] += self.grad[static_cast<std::size_t>(r * dout + j)];
        });
    else
        detail::wire<T>(out, {&x, &w}, [x, w, rows, din, dout](Node<T>& self) {
            auto xn = x.node();
            auto wn = w.node();
            if (xn->requires_grad) detail::gemm_acc(xn->grad.data(), self.grad.data(), w.data(), rows, din, dout, false, false);
            if (wn->requires_grad) detail::gemm_acc(wn->grad.data(), self.grad.data(), x.data(), dout, din, rows, true, false);
        });
    return out;
}

// ---------------------------------------------------------------------------
// Convolution (stride 1, same zero padding, odd square kernels 1x1 or 3x3)

template <typename T>
struct ConvParams {
    Tensor<T> weight;  // [C_out, C_in, kh, kw]
    Tensor<T> bias;    // [C_out]
};

namespace detail {
template <typename T>
ConvParams<T> make_conv(std::int64_t co, std::int64_t ci, std::int64_t k, Rng& rng) {
    const double b = 1.0 / std::sqrt(static_cast<double>(ci * k * k));
    ConvParams<T> p;
    p.weight = Tensor<T>::uniform({co, ci, k, k}, rng, -b, b, true);
    p.bias = Tensor<T>::zeros({co}, true);
    return p;
}

template <typename T>
void collect_conv(ConvParams<T>& p, std::vector<std::pair<std::string, Tensor<T>*>>& out, const std::string& prefix) {
    out.emplace_back(prefix + ".w", &p.weight);
    out.emplace_back(prefix + ".b", &p.bias);
}
}  // namespace detail

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const ConvParams<T>& p);

// Batched wrapper: [B,C,H,W] handled per item.
template <typename T>
Tensor<T> conv2d_batched(const Tensor<T>& x, const ConvParams<T>& p) {
    const std::int64_t B = x.size(0), Ci = x.size(1), H = x.size(2), W = x.size(3);
    std::vector<Tensor<T>> ys;
    ys.reserve(static_cast<std::size_t>(B));
    for (std::int64_t b = 0; b < B; ++b) {
        Tensor<T> xb = reshape(slice(x, 0, b, 1), {Ci, H, W});
        Tensor<T> yb = conv2d(xb, p);
        ys.push_back(reshape(yb, {1, yb.size(0), H, W}));
    }
    return concat(ys, 0);
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const ConvParams<T>& p) {
    if (x.dim() == 4) return conv2d_batched(x, p);
    if (x.dim() != 3) throw ShapeError("conv2d: input must be [C,H,W] or [B,C,H,W]");
    if (p.weight.dim() != 4) throw ShapeError("conv2d: weight must be [Co,Ci,kh,kw]");
    const std::int64_t Ci = x.size(0), H = x.size(1), W = x.size(2);
    const std::int64_t Co = p.weight.size(0), kh = p.weight.size(2), kw = p.weight.size(3);
    if (p.weight.size(1) != Ci)
        throw ShapeError("conv2d: weight expects " + std::to_string(p.weight.size(1)) + " input channels, got " + std::to_string(Ci));
    if (!((kh == 1 && kw == 1) || (kh == 3 && kw == 3))) throw ShapeError("conv2d: kernel must be 1x1 or 3x3");
    if (p.bias.defined() && p.bias.numel() != Co) throw ShapeError("conv2d: bias length mismatch");
    const std::int64_t ph = (kh - 1) / 2, pw = (kw - 1) / 2;

    Tensor<T> out({Co, H, W});
    for (std::int64_t co = 0; co < Co; ++co) {
        const T bv = p.bias.defined() ? p.bias.data()[co] : T(0);
        std::fill_n(out.data() + co * H * W, H * W, bv);
    }
    const T* px = x.data();
    const T* pw_ = p.weight.data();
    for (std::int64_t co = 0; co < Co; ++co) {
        T* oplane = out.data() + co * H * W;
        for (std::int64_t ci = 0; ci < Ci; ++ci) {
            const T* iplane = px + ci * H * W;
            for (std::int64_t ky = 0; ky < kh; ++ky)
                for (std::int64_t kx = 0; kx < kw; ++kx) {
                    const T wv = pw_[((co * Ci + ci) * kh + ky) * kw + kx];
                    if (wv == T(0)) continue;
                    const std::int64_t dy = ky - ph, dx = kx - pw;
                    const std::int64_t y0 = std::max<std::int64_t>(0, -dy), y1 = std::min(H, H - dy);
                    const std::int64_t x0 = std::max<std::int64_t>(0, -dx), x1 = std::min(W, W - dx);
                    for (std::int64_t y = y0; y < y1; ++y) {
                        T* orow = oplane + y * W;
                        const T* irow = iplane + (y + dy) * W + dx;
                        for (std::int64_t xx = x0; xx < x1; ++xx) orow[xx] += wv * irow[xx];
                    }
                }
        }
    }

    const Tensor<T>& wt = p.weight;
    const Tensor<T>& bt = p.bias;
    auto bw = [x, wt, bt, Ci, Co, H, W, kh, kw, ph, pw](Node<T>& self) {
        auto xn = x.node();
        auto wn = wt.node();
        for (std::int64_t co = 0; co < Co; ++co) {
            const T* gplane = self.grad.data() + co * H * W;
            for (std::int64_t ci = 0; ci < Ci; ++ci) {
                for (std::int64_t ky = 0; ky < kh; ++ky)
                    for (std::int64_t kx = 0; kx < kw; ++kx) {
                        const std::int64_t dy = ky - ph, dx = kx - pw;
                        const std::int64_t y0 = std::max<std::int64_t>(0, -dy), y1 = std::min(H, H - dy);
                        const std::int64_t x0 = std::max<std::int64_t>(0, -dx), x1 = std::min(W, W - dx);
                        const std::size_t widx = static_cast<std::size_t>(((co * Ci + ci) * kh + ky) * kw + kx);
                        if (xn->requires_grad) {
                            const T wv = wt.data()[widx];
                            T* dplane = xn->grad.data() + ci * H * W;
                            for (std::int64_t y = y0; y < y1; ++y) {
                                const T* grow = gplane + y * W;
                                T* drow = dplane + (y + dy) * W + dx;
                                for (std::int64_t xx = x0; xx < x1; ++xx) drow[xx] += wv * grow[xx];
                            }
                        }
                        if (wn->requires_grad) {
                            const T* iplane = x.data() + ci * H * W;
                            T lanes[8] = {T(0), T(0), T(0), T(0), T(0), T(0), T(0), T(0)};
                            T s = T(0);
                            const std::int64_t span = x1 - x0;
                            for (std::int64_t y = y0; y < y1; ++y) {
                                const T* grow = gplane + y * W + x0;
                                const T* irow = iplane + (y + dy) * W + dx + x0;
                                std::int64_t xx = 0;
                                for (; xx + 8 <= span; xx += 8)
                                    for (int l = 0; l < 8; ++l) lanes[l] += grow[xx + l] * irow[xx + l];
                                for (; xx < span; ++xx) s += grow[xx] * irow[xx];
                            }
                            for (int l = 0; l < 8; ++l) s += lanes[l];
                            wn->grad[widx] += s;
                        }
                    }
            }
            if (bt.defined() && bt.node()->requires_grad) {
                T lanes[8] = {T(0), T(0), T(0), T(0), T(0), T(0), T(0), T(0)};
                T s = T(0);
                const std::int64_t n = H * W;
                std::int64_t i = 0;
                for (; i + 8 <= n; i += 8)
                    for (int l = 0; l < 8; ++l) lanes[l] += gplane[i + l];
                for (; i < n; ++i) s += gplane[i];
                for (int l = 0; l < 8; ++l) s += lanes[l];
                bt.node()->grad[static_cast<std::size_t>(co)] += s;
            }
        }
    };
    if (bt.defined())
        detail::wire<T>(out, {&x, &wt, &bt}, bw);
    else
        detail::wire<T>(out, {&x, &wt}, bw);
    return out;
}

// ---------------------------------------------------------------------------
// Normalization / softmax

// Layer norm over the last dimension with biased variance.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, T eps = T(1e-5)) {
    const std::int64_t D = x.size(x.dim() - 1);
    if (gamma.numel() != D || beta.numel() != D) throw ShapeError("layer_norm: affine param length != feature dim");
    const std::int64_t rows = x.numel() / D;
    Tensor<T> out(x.shape());
    std::vector<T> xhat(static_cast<std::size_t>(x.numel()));
    std::vector<T> inv_sigma(static_cast<std::size_t>(rows));
    const T invD = T(1) / static_cast<T>(D);
    for (std::int64_t r = 0; r < rows; ++r) {
        const T* px = x.data() + r * D;
        T* po = out.data() + r * D;
        T mu = T(0);
        for (std::int64_t i = 0; i < D; ++i) mu += px[i];
        mu *= invD;
        T var = T(0);
        for (std::int64_t i = 0; i < D; ++i) {
            const T d = px[i] - mu;
            var += d * d;
        }
        var *= invD;
        const T is = T(1) / std::sqrt(var + eps);
        inv_sigma[static_cast<std::size_t>(r)] = is;
        T* ph = xhat.data() + r * D;
        for (std::int64_t i = 0; i < D; ++i) {
            ph[i] = (px[i] - mu) * is;
            po[i] = ph[i] * gamma.data()[i] + beta.data()[i];
        }
    }
    detail::wire<T>(out, {&x, &gamma, &beta},
                    [xn = x.node(), gn = gamma.node(), bn = beta.node(), g = gamma, xhat = std::move(xhat),
                     inv_sigma = std::move(inv_sigma), rows, D, invD](Node<T>& self) {
                        for (std::int64_t r = 0; r < rows; ++r) {
                            const T* gy = self.grad.data() + r * D;
                            const T* ph = xhat.data() + r * D;
                            if (gn->requires_grad || bn->requires_grad)
                                for (std::int64_t i = 0; i < D; ++i) {
                                    if (gn->requires_grad) gn->grad[static_cast<std::size_t>(i)] += gy[i] * ph[i];
                                    if (bn->requires_grad) bn->grad[static_cast<std::size_t>(i)] += gy[i];
                                }
                            if (xn->requires_grad) {
                                T s1 = T(0), s2 = T(0);
                                for (std::int64_t i = 0; i < D; ++i) {
                                    const T gg = gy[i] * g.data()[i];
                                    s1 += gg;
                                    s2 += gg * ph[i];
                                }
                                s1 *= invD;
                                s2 *= invD;
                                const T is = inv_sigma[static_cast<std::size_t>(r)];
                                T* dx = xn->grad.data() + r * D;
                                for (std::int64_t i = 0; i < D; ++i)
                                    dx[i] += is * (gy[i] * g.data()[i] - s1 - ph[i] * s2);
                            }
                        }
                    });
    return out;
}

// layer_norm over an arbitrary axis, via permutation to the last.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, int dim, const Tensor<T>& gamma, const Tensor<T>& beta, T eps = T(1e-5)) {
    const int nd = x.dim();
    if (dim < 0 || dim >= nd) throw ShapeError("layer_norm: axis out of range");
    if (x.size(dim) == 0) throw ShapeError("layer_norm: zero-length axis");
    if (dim == nd - 1) return layer_norm(x, gamma, beta, eps);
    std::vector<int> fwd, back(static_cast<std::size_t>(nd));
    for (int i = 0; i < nd; ++i)
        if (i != dim) fwd.push_back(i);
    fwd.push_back(dim);
    for (int i = 0; i < nd; ++i) back[static_cast<std::size_t>(fwd[static_cast<std::size_t>(i)])] = i;
    return permute(layer_norm(permute(x, fwd), gamma, beta, eps), back);
}

// Numerically stable softmax along an axis.
template <typename T>
Tensor<T> softmax(const Tensor<T>& x, int dim) {
    std::int64_t outer, len, inner;
    detail::axis_split(x.shape(), dim, outer, len, inner);
    Tensor<T> out(x.shape());
    for (std::int64_t o = 0; o < outer; ++o)
        for (std::int64_t i = 0; i < inner; ++i) {
            const T* px = x.data() + o * len * inner + i;
            T* po = out.data() + o * len * inner + i;
            T mx = px[0];
            for (std::int64_t l = 1; l < len; ++l) mx = std::max(mx, px[l * inner]);
            T z = T(0);
            for (std::int64_t l = 0; l < len; ++l) {
                const T e = std::exp(px[l * inner] - mx);
                po[l * inner] = e;
                z += e;
            }
            const T iz = T(1) / z;
            for (std::int64_t l = 0; l < len; ++l) po[l * inner] *= iz;
        }
    detail::wire<T>(out, {&x}, [xn = x.node(), outer, len, inner](Node<T>& self) {
        if (!xn->requires_grad) return;
        for (std::int64_t o = 0; o < outer; ++o)
            for (std::int64_t i = 0; i < inner; ++i) {
                const T* y = self.value.data() + o * len * inner + i;
                const T* gy = self.grad.data() + o * len * inner + i;
                T dot = T(0);
                for (std::int64_t l = 0; l < len; ++l) dot += gy[l * inner] * y[l * inner];
                T* dx = xn->grad.data() + o * len * inner + i;
                for (std::int64_t l = 0; l < len; ++l) dx[l * inner] += y[l * inner] * (gy[l * inner] - dot);
            }
    });
    return out;
}

// ---------------------------------------------------------------------------
// Spatial rearrangement

// [C*r^2, H, W] -> [C, H*r, W*r]; input channel c*r^2 + di*r + dj feeds
// output pixel (y*r+di, x*r+dj) of channel c.
template <typename T>
Tensor<T> pixel_shuffle(const Tensor<T>& x, std::int64_t r) {
    if (x.dim() != 3) throw ShapeError("pixel_shuffle: input must be [C,H,W]");
    const std::int64_t Cin = x.size(0), H = x.size(1), W = x.size(2);
    if (r < 1 || Cin % (r * r) != 0) throw ShapeError("pixel_shuffle: channels not divisible by r^2");
    const std::int64_t C = Cin / (r * r);
    Tensor<T> out({C, H * r, W * r});
    for (std::int64_t c = 0; c < C; ++c)
        for (std::int64_t di = 0; di < r; ++di)
            for (std::int64_t dj = 0; dj < r; ++dj) {
                const T* ip = x.data() + (c * r * r + di * r + dj) * H * W;
                for (std::int64_t y = 0; y < H; ++y) {
                    T* op = out.data() + (c * H * r + y * r + di) * W * r + dj;
                    const T* irow = ip + y * W;
                    for (std::int64_t xx = 0; xx < W; ++xx) op[xx * r] = irow[xx];
                }
            }
    detail::wire<T>(out, {&x}, [xn = x.node(), C, H, W, r](Node<T>& self) {
        if (!xn->requires_grad) return;
        for (std::int64_t c = 0; c < C; ++c)
            for (std::int64_t di = 0; di < r; ++di)
                for (std::int64_t dj = 0; dj < r; ++dj) {
                    T* dp = xn->grad.data() + (c * r * r + di * r + dj) * H * W;
                    for (std::int64_t y = 0; y < H; ++y) {
                        const T* gp = self.grad.data() + (c * H * r + y * r + di) * W * r + dj;
                        T* drow = dp + y * W;
                        for (std::int64_t xx = 0; xx < W; ++xx) drow[xx] += gp[xx * r];
                    }
                }
    });
    return out;
}

// Exact inverse of pixel_shuffle.
template <typename T>
Tensor<T> pixel_unshuffle(const Tensor<T>& x, std::int64_t r) {
    if (x.dim() != 3) throw ShapeError("pixel_unshuffle: input must be [C,H,W]");
    const std::int64_t C = x.size(0), Hr = x.size(1), Wr = x.size(2);
    if (r < 1 || Hr % r != 0 || Wr % r != 0) throw ShapeError("pixel_unshuffle: spatial dims not divisible by r");
    const std::int64_t H = Hr / r, W = Wr / r;
    Tensor<T> out({C * r * r, H, W});
    for (std::int64_t c = 0; c < C; ++c)
        for (std::int64_t di = 0; di < r; ++di)
            for (std::int64_t dj = 0; dj < r; ++dj) {
                T* op = out.data() + (c * r * r + di * r + dj) * H * W;
                for (std::int64_t y = 0; y < H; ++y) {
                    const T* ip = x.data() + (c * Hr + y * r + di) * Wr + dj;
                    T* orow = op + y * W;
                    for (std::int64_t xx = 0; xx < W; ++xx) orow[xx] = ip[xx * r];
                }
            }
    detail::wire<T>(out, {&x}, [xn = x.node(), C, H, W, r, Hr, Wr](Node<T>& self) {
        if (!xn->requires_grad) return;
        for (std::int64_t c = 0; c < C; ++c)
            for (std::int64_t di = 0; di < r; ++di)
                for (std::int64_t dj = 0; dj < r; ++dj) {
                    const T* gp = self.grad.data() + (c * r * r + di * r + dj) * H * W;
                    for (std::int64_t y = 0; y < H; ++y) {
                        T* dp = xn->grad.data() + (c * Hr + y * r + di) * Wr + dj;
                        const T* grow = gp + y * W;
                        for (std::int64_t xx = 0; xx < W; ++xx) dp[xx * r] += grow[xx];
                    }
                }
    });
    return out;
}

// ---------------------------------------------------------------------------
// Bilinear resize (integer factor, half-pixel centers, edge clamp)

template <typename T>
Tensor<T> bilinear_resize(const Tensor<T>& x, std::int64_t factor) {
    if (x.dim() != 3) throw ShapeError("bilinear_resize: input must be [C,H,W]");
    if (factor < 1) throw ShapeError("bilinear_resize: factor must be >= 1");
    const std::int64_t C = x.size(0), H = x.size(1), W = x.size(2);
    const std::int64_t OH = H * factor, OW = W * factor;

    auto plan = [factor](std::int64_t n, std::int64_t out_n, std::vector<std::int64_t>& i0, std::vector<std::int64_t>& i1,
                         std::vector<T>& w) {
        i0.resize(static_cast<std::size_t>(out_n));
        i1.resize(static_cast<std::size_t>(out_n));
        w.resize(static_cast<std::size_t>(out_n));
        for (std::int64_t o = 0; o < out_n; ++o) {
            const double src = (static_cast<double>(o) + 0.5) / static_cast<double>(factor) - 0.5;
            double f = std::floor(src);
            std::int64_t a = static_cast<std::int64_t>(f);
            double frac = src - f;
            std::int64_t b = a + 1;
            if (a < 0) { a = 0; b = 0; frac = 0.0; }
            if (b > n - 1) { b = n - 1; if (a > n - 1) a = n - 1; if (a == b) frac = 0.0; }
            i0[static_cast<std::size_t>(o)] = a;
            i1[static_cast<std::size_t>(o)] = b;
            w[static_cast<std::size_t>(o)] = static_cast<T>(frac);
        }
    };
    std::vector<std::int64_t> y0, y1, x0, x1;
    std::vector<T> wy, wx;
    plan(H, OH, y0, y1, wy);
    plan(W, OW, x0, x1, wx);

    Tensor<T> out({C, OH, OW});
    for (std::int64_t c = 0; c < C; ++c) {
        const T* ip = x.data() + c * H * W;
        T* op = out.data() + c * OH * OW;
        for (std::int64_t y = 0; y < OH; ++y) {
            const T* r0 = ip + y0[static_cast<std::size_t>(y)] * W;
            const T* r1 = ip + y1[static_cast<std::size_t>(y)] * W;
            const T fy = wy[static_cast<std::size_t>(y)];
            T* orow = op + y * OW;
            for (std::int64_t xx = 0; xx < OW; ++xx) {
                const std::int64_t a = x0[static_cast<std::size_t>(xx)], b = x1[static_cast<std::size_t>(xx)];
                const T fx = wx[static_cast<std::size_t>(xx)];
                // lerp form keeps constants exact in floating point
                const T top = r0[a] + fx * (r0[b] - r0[a]);
                const T bot = r1[a] + fx * (r1[b] - r1[a]);
                orow[xx] = top + fy * (bot - top);
            }
        }
    }
    detail::wire<T>(out, {&x}, [xn = x.node(), C, H, W, OH, OW, y0, y1, x0, x1, wy, wx](Node<T>& self) {
        if (!xn->requires_grad) return;
        for (std::int64_t c = 0; c < C; ++c) {
            T* dp = xn->grad.data() + c * H * W;
            const T* gp = self.grad.data() + c * OH * OW;
            for (std::int64_t y = 0; y < OH; ++y) {
                const std::int64_t ya = y0[static_cast<std::size_t>(y)], yb = y1[static_cast<std::size_t>(y)];
                const T fy = wy[static_cast<std::size_t>(y)];
                const T* grow = gp + y * OW;
                for (std::int64_t xx = 0; xx < OW; ++xx) {
                    const std::int64_t xa = x0[static_cast<std::size_t>(xx)], xb = x1[static_cast<std::size_t>(xx)];
                    const T fx = wx[static_cast<std::size_t>(xx)];
                    const T g = grow[xx];
                    dp[ya * W + xa] += g * (T(1) - fy) * (T(1) - fx);
                    dp[ya * W + xb] += g * (T(1) - fy) * fx;
                    dp[yb * W + xa] += g * fy * (T(1) - fx);
                    dp[yb * W + xb] += g * fy * fx;
                }
            }
        }
    });
    return out;
}

// ---------------------------------------------------------------------------
// Stochastic regularizers (inverted scaling; eval mode is the identity and
// consumes no randomness)

template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double rate, bool training, Rng& rng) {
    if (rate < 0.0 || rate >= 1.0) throw ShapeError("dropout: rate must be in [0,1)");
    if (!training || rate == 0.0) return x;
    const T scale = static_cast<T>(1.0 / (1.0 - rate));
    std::vector<T> mask(static_cast<std::size_t>(x.numel()));
    for (auto& m : mask) m = rng.bernoulli(rate) ? T(0) : scale;
    Tensor<T> out(x.shape());
    for (std::int64_t i = 0; i < x.numel(); ++i) out.data()[i] = x.data()[i] * mask[static_cast<std::size_t>(i)];
    detail::wire<T>(out, {&x}, [xn = x.node(), mask = std::move(mask)](Node<T>& self) {
        if (!xn->requires_grad) return;
        for (std::size_t i = 0; i < xn->grad.size(); ++i) xn->grad[i] += self.grad[i] * mask[i];
    });
    return out;
}

// Drops the whole residual branch with probability `rate`; a surviving
// branch is scaled by 1/(1-rate).  rate == 1 always drops (the scale is
// never formed), so it is a valid, if degenerate, setting.
template <typename T>
Tensor<T> drop_path(const Tensor<T>& x, double rate, bool training, Rng& rng) {
    if (rate < 0.0 || rate > 1.0) throw ShapeError("drop_path: rate must be in [0,1]");
    if (!training || rate == 0.0) return x;
    const bool dropped = rng.bernoulli(rate);
    if (dropped) return Tensor<T>::zeros(x.shape());
    return mul_scalar(x, static_cast<T>(1.0 / (1.0 - rate)));
}

// 2x2 average pooling, stride 2.
template <typename T>
Tensor<T> avg_pool2(const Tensor<T>& x) {
    if (x.dim() != 3) throw ShapeError("avg_pool2: input must be [C,H,W]");
    const std::int64_t C = x.size(0), H = x.size(1), W = x.size(2);
    if (H % 2 != 0 || W % 2 != 0) throw ShapeError("avg_pool2: spatial dims must be even");
    Tensor<T> out({C, H / 2, W / 2});
    for (std::int64_t c = 0; c < C; ++c)
        for (std::int64_t y = 0; y < H / 2; ++y) {
            const T* r0 = x.data() + (c * H + 2 * y) * W;
            const T* r1 = r0 + W;
            T* o = out.data() + (c * (H / 2) + y) * (W / 2);
            for (std::int64_t xx = 0; xx < W / 2; ++xx)
                o[xx] = (r0[2 * xx] + r0[2 * xx + 1] + r1[2 * xx] + r1[2 * xx + 1]) * T(0.25);
        }
    detail::wire<T>(out, {&x}, [xn = x.node(), C, H, W](Node<T>& self) {
        if (!xn->requires_grad) return;
        for (std::int64_t c = 0; c < C; ++c)
            for (std::int64_t y = 0; y < H / 2; ++y) {
                T* r0 = xn->grad.data() + (c * H + 2 * y) * W;
                T* r1 = r0 + W;
                const T* g = self.grad.data() + (c * (H / 2) + y) * (W / 2);
                for (std::int64_t xx = 0; xx < W / 2; ++xx) {
                    const T q = g[xx] * T(0.25);
                    r0[2 * xx] += q;
                    r0[2 * xx + 1] += q;
                    r1[2 * xx] += q;
                    r1[2 * xx + 1] += q;
                }
            }
    });
    return out;
}

// out[c,h,w] = x[c,h,w] * s[c]
template <typename T>
Tensor<T> scale_channels(const Tensor<T>& x, const Tensor<T>& s) {
    if (x.dim() != 3 || s.numel() != x.size(0)) throw ShapeError("scale_channels: s must have one entry per channel");
    const std::int64_t C = x.size(0), HW = x.size(1) * x.size(2);
    Tensor<T> out(x.shape());
    for (std::int64_t c = 0; c < C; ++c) {
        const T sv = s.data()[c];
        const T* ip = x.data() + c * HW;
        T* op = out.data() + c * HW;
        for (std::int64_t i = 0; i < HW; ++i) op[i] = ip[i] * sv;
    }
    detail::wire<T>(out, {&x, &s}, [x, s, C, HW](Node<T>& self) {
        auto xn = x.node();
        auto sn = s.node();
        for (std::int64_t c = 0; c < C; ++c) {
            const T* g = self.grad.data() + c * HW;
            if (xn->requires_grad) {
                const T sv = s.data()[c];
                T* dx = xn->grad.data() + c * HW;
                for (std::int64_t i = 0; i < HW; ++i) dx[i] += g[i] * sv;
            }
            if (sn->requires_grad) {
                const T* ip = x.data() + c * HW;
                T acc = T(0);
                for (std::int64_t i = 0; i < HW; ++i) acc += g[i] * ip[i];
                sn->grad[static_cast<std::size_t>(c)] += acc;
            }
        }
    });
    return out;
}

// Removes the per-(channel,row) mean over the width axis.  The map is an
// orthogonal projection, hence self-adjoint: the backward pass applies it
// to the incoming gradient.
template <typename T>
Tensor<T> whiten(const Tensor<T>& x) {
    if (x.dim() != 3) throw ShapeError("whiten: input must be [C,H,W]");
    const std::int64_t C = x.size(0), H = x.size(1), W = x.size(2);
    const T invW = T(1) / static_cast<T>(W);
    Tensor<T> out(x.shape());
    for (std::int64_t c = 0; c < C; ++c)
        for (std::int64_t h = 0; h < H; ++h) {
            const T* row = x.data() + (c * H + h) * W;
            T* orow = out.data() + (c * H + h) * W;
            T mu = T(0);
            for (std::int64_t w = 0; w < W; ++w) mu += row[w];
            mu *= invW;
            for (std::int64_t w = 0; w < W; ++w) orow[w] = row[w] - mu;
        }
    detail::wire<T>(out, {&x}, [xn = x.node(), C, H, W, invW](Node<T>& self) {
        if (!xn->requires_grad) return;
        for (std::int64_t c = 0; c < C; ++c)
            for (std::int64_t h = 0; h < H; ++h) {
                const T* g = self.grad.data() + (c * H + h) * W;
                T* dx = xn->grad.data() + (c * H + h) * W;
                T mu = T(0);
                for (std::int64_t w = 0; w < W; ++w) mu += g[w];
                mu *= invW;
                for (std::int64_t w = 0; w < W; ++w) dx[w] += g[w] - mu;
            }
    });
    return out;
}

// scores [nW, heads, N, N] + bias [heads, N, N] (broadcast over windows)
// + optional mask [nW, N, N] (broadcast over heads; no gradient).
template <typename T>
Tensor<T> add_bias_mask(const Tensor<T>& scores, const Tensor<T>& bias, const Tensor<T>* mask = nullptr) {
    if (scores.dim() != 4 || bias.dim() != 3) throw ShapeError("add_bias_mask: scores [nW,h,N,N], bias [h,N,N]");
    const std::int64_t nW = scores.size(0), nH = scores.size(1), N = scores.size(2);
    if (scores.size(3) != N || bias.size(0) != nH || bias.size(1) != N || bias.size(2) != N)
        throw ShapeError("add_bias_mask: bias shape mismatch");
    if (mask && (mask->dim() != 3 || mask->size(0) != nW || mask->size(1) != N || mask->size(2) != N))
        throw ShapeError("add_bias_mask: mask shape mismatch");
    Tensor<T> out(scores.shape());
    const std::int64_t NN = N * N;
    for (std::int64_t w = 0; w < nW; ++w)
        for (std::int64_t h = 0; h < nH; ++h) {
            const T* ps = scores.data() + (w * nH + h) * NN;
            const T* pb = bias.data() + h * NN;
            const T* pm = mask ? mask->data() + w * NN : nullptr;
            T* po = out.data() + (w * nH + h) * NN;
            if (pm)
                for (std::int64_t i = 0; i < NN; ++i) po[i] = ps[i] + pb[i] + pm[i];
            else
                for (std::int64_t i = 0; i < NN; ++i) po[i] = ps[i] + pb[i];
        }
    detail::wire<T>(out, {&scores, &bias}, [sn = scores.node(), bn = bias.node(), nW, nH, NN](Node<T>& self) {
        if (sn->requires_grad) detail::acc(sn->grad, self.grad);
        if (bn->requires_grad)
            for (std::int64_t w = 0; w < nW; ++w)
                for (std::int64_t h = 0; h < nH; ++h) {
                    const T* g = self.grad.data() + (w * nH + h) * NN;
                    T* db = bn->grad.data() + h * NN;
                    for (std::int64_t i = 0; i < NN; ++i) db[i] += g[i];
                }
    });
    return out;
}

// out[i,:] = table[idx[i],:]; backward scatter-adds into the table.
template <typename T>
Tensor<T> gather_rows(const Tensor<T>& table, const std::vector<std::int64_t>& idx) {
    if (table.dim() != 2) throw ShapeError("gather_rows: table must be rank 2");
    const std::int64_t R = table.size(0), D = table.size(1);
    for (auto i : idx)
        if (i < 0 || i >= R) throw ShapeError("gather_rows: index " + std::to_string(i) + " out of range [0," + std::to_string(R) + ")");
    Tensor<T> out({static_cast<std::int64_t>(idx.size()), D});
    for (std::size_t r = 0; r < idx.size(); ++r)
        std::copy_n(table.data() + idx[r] * D, D, out.data() + static_cast<std::int64_t>(r) * D);
    detail::wire<T>(out, {&table}, [tn = table.node(), idx, D](Node<T>& self) {
        if (!tn->requires_grad) return;
        for (std::size_t r = 0; r < idx.size(); ++r) {
            const T* g = self.grad.data() + static_cast<std::int64_t>(r) * D;
            T* dst = tn->grad.data() + idx[r] * D;
            for (std::int64_t i = 0; i < D; ++i) dst[i] += g[i];
        }
    });
    return out;
}

// [C,H,W] -> [H*W, C] token layout (row-major spatial order).
template <typename T>
Tensor<T> chw_to_tokens(const Tensor<T>& x) {
    if (x.dim() != 3) throw ShapeError("chw_to_tokens: input must be [C,H,W]");
    const std::int64_t C = x.size(0), HW = x.size(1) * x.size(2);
    Tensor<T> out({HW, C});
    for (std::int64_t c = 0; c < C; ++c) {
        const T* ip = x.data() + c * HW;
        T* op = out.data() + c;
        for (std::int64_t i = 0; i < HW; ++i) op[i * C] = ip[i];
    }
    detail::wire<T>(out, {&x}, [xn = x.node(), C, HW](Node<T>& self) {
        if (!xn->requires_grad) return;
        for (std::int64_t c = 0; c < C; ++c) {
            T* dp = xn->grad.data() + c * HW;
            const T* g = self.grad.data() + c;
            for (std::int64_t i = 0; i < HW; ++i) dp[i] += g[i * C];
        }
    });
    return out;
}

// [H*W, C] -> [C,H,W]
template <typename T>
Tensor<T> tokens_to_chw(const Tensor<T>& t, std::int64_t H, std::int64_t W) {
    if (t.dim() != 2 || t.size(0) != H * W) throw ShapeError("tokens_to_chw: token count != H*W");
    const std::int64_t C = t.size(1), HW = H * W;
    Tensor<T> out({C, H, W});
    for (std::int64_t c = 0; c < C; ++c) {
        T* op = out.data() + c * HW;
        const T* ip = t.data() + c;
        for (std::int64_t i = 0; i < HW; ++i) op[i] = ip[i * C];
    }
    detail::wire<T>(out, {&t}, [tn = t.node(), C, HW](Node<T>& self) {
        if (!tn->requires_grad) return;
        for (std::int64_t c = 0; c < C; ++c) {
            const T* g = self.grad.data() + c * HW;
            T* dp = tn->grad.data() + c;
            for (std::int64_t i = 0; i < HW; ++i) dp[i * C] += g[i];
        }
    });
    return out;
}

}  // namespace swinfsr

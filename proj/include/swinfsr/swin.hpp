#pragma once

#include <map>
#include <tuple>

#include "swinfsr/nn_ops.hpp"

namespace swinfsr {

struct WindowSpec {
    std::int64_t wh = 6, ww = 15;  // window extent (pixels)
    std::int64_t sh = 0, sw = 0;   // cyclic shift offsets
};

inline void validate_window(const WindowSpec& w) {
    if (w.wh < 1 || w.ww < 1) throw ShapeError("window: extents must be positive");
    if (w.sh < 0 || w.sh >= w.wh || w.sw < 0 || w.sw >= w.ww)
        throw ShapeError("window: shift must satisfy 0 <= shift < extent");
}

template <typename T>
struct StlParams {
    Tensor<T> qkv_w, qkv_b;    // [3C,C], [3C]
    Tensor<T> proj_w, proj_b;  // [C,C], [C]
    Tensor<T> bias_table;      // [(2wh-1)(2ww-1), heads]
    Tensor<T> mlp_w1, mlp_b1;  // [rC,C], [rC]
    Tensor<T> mlp_w2, mlp_b2;  // [C,rC], [C]
    Tensor<T> ln1_g, ln1_b, ln2_g, ln2_b;  // [C]
    std::int64_t num_heads = 4;
    double drop_path_rate = 0.0;
};

template <typename T>
StlParams<T> make_stl_params(std::int64_t C, std::int64_t heads, std::int64_t mlp_ratio, const WindowSpec& w,
                             double drop_path_rate, Rng& rng) {
    validate_window(w);
    if (heads < 1 || C % heads != 0) throw ShapeError("stl params: C must be divisible by num_heads");
    StlParams<T> p;
    auto lin = [&rng](std::int64_t dout, std::int64_t din) {
        const double b = 1.0 / std::sqrt(static_cast<double>(din));
        return Tensor<T>::uniform({dout, din}, rng, -b, b, true);
    };
    p.qkv_w = lin(3 * C, C);
    p.qkv_b = Tensor<T>::zeros({3 * C}, true);
    p.proj_w = lin(C, C);
    p.proj_b = Tensor<T>::zeros({C}, true);
    p.bias_table = Tensor<T>::truncated_normal({(2 * w.wh - 1) * (2 * w.ww - 1), heads}, rng, 0.02, true);
    p.mlp_w1 = lin(mlp_ratio * C, C);
    p.mlp_b1 = Tensor<T>::zeros({mlp_ratio * C}, true);
    p.mlp_w2 = lin(C, mlp_ratio * C);
    p.mlp_b2 = Tensor<T>::zeros({C}, true);
    p.ln1_g = Tensor<T>::full({C}, T(1), true);
    p.ln1_b = Tensor<T>::zeros({C}, true);
    p.ln2_g = Tensor<T>::full({C}, T(1), true);
    p.ln2_b = Tensor<T>::zeros({C}, true);
    p.num_heads = heads;
    p.drop_path_rate = drop_path_rate;
    return p;
}

// ---------------------------------------------------------------------------
// Window geometry

// Cyclic-shifts by (-sh,-sw) then tiles into windows:
// [C,H,W] -> [N_win, wh*ww, C], windows and tokens in row-major order.
template <typename T>
Tensor<T> window_partition(const Tensor<T>& x, const WindowSpec& w) {
    validate_window(w);
    if (x.dim() != 3) throw ShapeError("window_partition: input must be [C,H,W]");
    const std::int64_t C = x.size(0), H = x.size(1), W = x.size(2);
    if (H % w.wh != 0 || W % w.ww != 0)
        throw ShapeError("window_partition: " + std::to_string(H) + "x" + std::to_string(W) +
                         " not divisible by window " + std::to_string(w.wh) + "x" + std::to_string(w.ww));
    const std::int64_t NY = H / w.wh, NX = W / w.ww, Tk = w.wh * w.ww;
    Tensor<T> out({NY * NX, Tk, C});
    for (std::int64_t wy = 0; wy < NY; ++wy)
        for (std::int64_t wx = 0; wx < NX; ++wx) {
            T* owin = out.data() + (wy * NX + wx) * Tk * C;
            for (std::int64_t iy = 0; iy < w.wh; ++iy) {
                const std::int64_t sy = (wy * w.wh + iy + w.sh) % H;
                for (std::int64_t ix = 0; ix < w.ww; ++ix) {
                    const std::int64_t sx = (wx * w.ww + ix + w.sw) % W;
                    T* otok = owin + (iy * w.ww + ix) * C;
                    const T* src = x.data() + sy * W + sx;
                    for (std::int64_t c = 0; c < C; ++c) otok[c] = src[c * H * W];
                }
            }
        }
    detail::wire<T>(out, {&x}, [xn = x.node(), w, C, H, W, NY, NX, Tk](Node<T>& self) {
        if (!xn->requires_grad) return;
        for (std::int64_t wy = 0; wy < NY; ++wy)
            for (std::int64_t wx = 0; wx < NX; ++wx) {
                const T* gwin = self.grad.data() + (wy * NX + wx) * Tk * C;
                for (std::int64_t iy = 0; iy < w.wh; ++iy) {
                    const std::int64_t sy = (wy * w.wh + iy + w.sh) % H;
                    for (std::int64_t ix = 0; ix < w.ww; ++ix) {
                        const std::int64_t sx = (wx * w.ww + ix + w.sw) % W;
                        const T* gtok = gwin + (iy * w.ww + ix) * C;
                        T* dst = xn->grad.data() + sy * W + sx;
                        for (std::int64_t c = 0; c < C; ++c) dst[c * H * W] += gtok[c];
                    }
                }
            }
    });
    return out;
}

// Exact inverse of window_partition (including the shift).
template <typename T>
Tensor<T> window_reverse(const Tensor<T>& tokens, const WindowSpec& w, std::int64_t H, std::int64_t W) {
    validate_window(w);
    if (tokens.dim() != 3) throw ShapeError("window_reverse: input must be [N_win, T, C]");
    const std::int64_t NY = H / w.wh, NX = W / w.ww, Tk = w.wh * w.ww;
    if (H % w.wh != 0 || W % w.ww != 0 || tokens.size(0) != NY * NX || tokens.size(1) != Tk)
        throw ShapeError("window_reverse: token layout inconsistent with H, W, window");
    const std::int64_t C = tokens.size(2);
    Tensor<T> out({C, H, W});
    for (std::int64_t wy = 0; wy < NY; ++wy)
        for (std::int64_t wx = 0; wx < NX; ++wx) {
            const T* iwin = tokens.data() + (wy * NX + wx) * Tk * C;
            for (std::int64_t iy = 0; iy < w.wh; ++iy) {
                const std::int64_t sy = (wy * w.wh + iy + w.sh) % H;
                for (std::int64_t ix = 0; ix < w.ww; ++ix) {
                    const std::int64_t sx = (wx * w.ww + ix + w.sw) % W;
                    const T* itok = iwin + (iy * w.ww + ix) * C;
                    T* dst = out.data() + sy * W + sx;
                    for (std::int64_t c = 0; c < C; ++c) dst[c * H * W] = itok[c];
                }
            }
        }
    detail::wire<T>(out, {&tokens}, [tn = tokens.node(), w, C, H, W, NY, NX, Tk](Node<T>& self) {
        if (!tn->requires_grad) return;
        for (std::int64_t wy = 0; wy < NY; ++wy)
            for (std::int64_t wx = 0; wx < NX; ++wx) {
                T* dwin = tn->grad.data() + (wy * NX + wx) * Tk * C;
                for (std::int64_t iy = 0; iy < w.wh; ++iy) {
                    const std::int64_t sy = (wy * w.wh + iy + w.sh) % H;
                    for (std::int64_t ix = 0; ix < w.ww; ++ix) {
                        const std::int64_t sx = (wx * w.ww + ix + w.sw) % W;
                        T* dtok = dwin + (iy * w.ww + ix) * C;
                        const T* g = self.grad.data() + sy * W + sx;
                        for (std::int64_t c = 0; c < C; ++c) dtok[c] += g[c * H * W];
                    }
                }
            }
    });
    return out;
}

// Relative-position index for token pairs inside one window:
// idx(i,j) = (dy + wh - 1)*(2ww - 1) + (dx + ww - 1).
inline const std::vector<std::int64_t>& relative_position_index(const WindowSpec& w) {
    thread_local std::map<std::pair<std::int64_t, std::int64_t>, std::vector<std::int64_t>> cache;
    auto key = std::make_pair(w.wh, w.ww);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    const std::int64_t Tk = w.wh * w.ww;
    std::vector<std::int64_t> idx(static_cast<std::size_t>(Tk * Tk));
    for (std::int64_t i = 0; i < Tk; ++i) {
        const std::int64_t iy = i / w.ww, ix = i % w.ww;
        for (std::int64_t j = 0; j < Tk; ++j) {
            const std::int64_t jy = j / w.ww, jx = j % w.ww;
            idx[static_cast<std::size_t>(i * Tk + j)] = (iy - jy + w.wh - 1) * (2 * w.ww - 1) + (ix - jx + w.ww - 1);
        }
    }
    return cache.emplace(key, std::move(idx)).first->second;
}

// Cross-boundary attention mask for shifted windows, built in shifted
// coordinates: positions from different pre-shift slices get a large
// negative penalty.  [N_win, T, T]; zero tensor semantics when no shift.
template <typename T>
Tensor<T> build_shift_mask(std::int64_t H, std::int64_t W, const WindowSpec& w) {
    validate_window(w);
    if (H % w.wh != 0 || W % w.ww != 0) throw ShapeError("build_shift_mask: dims not window-divisible");
    const std::int64_t NY = H / w.wh, NX = W / w.ww, Tk = w.wh * w.ww;
    auto region = [](std::int64_t y, std::int64_t n, std::int64_t wlen, std::int64_t s) -> std::int64_t {
        if (s == 0) return 0;
        if (y < n - wlen) return 0;
        if (y < n - s) return 1;
        return 2;
    };
    std::vector<std::int64_t> id(static_cast<std::size_t>(H * W));
    for (std::int64_t y = 0; y < H; ++y)
        for (std::int64_t x = 0; x < W; ++x)
            id[static_cast<std::size_t>(y * W + x)] = region(y, H, w.wh, w.sh) * 3 + region(x, W, w.ww, w.sw);
    Tensor<T> mask({NY * NX, Tk, Tk});
    for (std::int64_t wy = 0; wy < NY; ++wy)
        for (std::int64_t wx = 0; wx < NX; ++wx) {
            T* m = mask.data() + (wy * NX + wx) * Tk * Tk;
            for (std::int64_t i = 0; i < Tk; ++i) {
                const std::int64_t ri = id[static_cast<std::size_t>((wy * w.wh + i / w.ww) * W + wx * w.ww + i % w.ww)];
                for (std::int64_t j = 0; j < Tk; ++j) {
                    const std::int64_t rj = id[static_cast<std::size_t>((wy * w.wh + j / w.ww) * W + wx * w.ww + j % w.ww)];
                    m[i * Tk + j] = (ri == rj) ? T(0) : T(-1e9);
                }
            }
        }
    return mask;
}

// Shared cache: masks are constant per (H, W, window) and reused across
// layers and steps.
template <typename T>
const Tensor<T>& cached_shift_mask(std::int64_t H, std::int64_t W, const WindowSpec& w) {
    thread_local std::map<std::tuple<std::int64_t, std::int64_t, std::int64_t, std::int64_t, std::int64_t, std::int64_t>, Tensor<T>>
        cache;
    auto key = std::make_tuple(H, W, w.wh, w.ww, w.sh, w.sw);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    return cache.emplace(key, build_shift_mask<T>(H, W, w)).first->second;
}

// ---------------------------------------------------------------------------
// Windowed multi-head self-attention
//   per head: softmax(Q K^T / sqrt(d_head) + bias + mask) V, then
//   heads are concatenated and projected.
// attn_capture (optional) receives the post-softmax weights [nW, heads, T, T].
template <typename T>
Tensor<T> wmsa(const Tensor<T>& tokens, const StlParams<T>& p, const WindowSpec& w, const Tensor<T>* mask = nullptr,
               Tensor<T>* attn_capture = nullptr) {
    if (tokens.dim() != 3) throw ShapeError("wmsa: tokens must be [N_win, T, C]");
    const std::int64_t nW = tokens.size(0), Tk = tokens.size(1), C = tokens.size(2);
    if (Tk != w.wh * w.ww) throw ShapeError("wmsa: token count != window area");
    const std::int64_t heads = p.num_heads;
    if (C % heads != 0) throw ShapeError("wmsa: C not divisible by num_heads");
    const std::int64_t dh = C / heads;

    Tensor<T> qkv = linear(tokens, p.qkv_w, p.qkv_b);  // [nW, T, 3C]
    auto split_heads = [&](std::int64_t off) {
        Tensor<T> part = slice(qkv, 2, off, C);                       // [nW, T, C]
        part = reshape(part, {nW, Tk, heads, dh});
        part = permute(part, {0, 2, 1, 3});                           // [nW, heads, T, dh]
        return reshape(part, {nW * heads, Tk, dh});
    };
    Tensor<T> q = split_heads(0);
    Tensor<T> k = split_heads(C);
    Tensor<T> v = split_heads(2 * C);

    Tensor<T> scores = mul_scalar(bmm(q, k, false, true), static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh))));
    scores = reshape(scores, {nW, heads, Tk, Tk});

    Tensor<T> bias = gather_rows(p.bias_table, relative_position_index(w));  // [T*T, heads]
    bias = reshape(permute(bias, {1, 0}), {heads, Tk, Tk});
    scores = add_bias_mask(scores, bias, mask);

    Tensor<T> attn = softmax(scores, 3);
    if (attn_capture) *attn_capture = attn;
    Tensor<T> ctx = bmm(reshape(attn, {nW * heads, Tk, Tk}), v);  // [nW*heads, T, dh]
    ctx = reshape(permute(reshape(ctx, {nW, heads, Tk, dh}), {0, 2, 1, 3}), {nW, Tk, C});
    return linear(ctx, p.proj_w, p.proj_b);
}

// ---------------------------------------------------------------------------
// Full Swin transformer layer on [C,H,W]:
//   x += DropPath(WMSA(LN(x))); x += DropPath(MLP(LN(x)))
// Non-window-divisible inputs are symmetric-padded up and cropped after.
template <typename T>
Tensor<T> stl_forward(const Tensor<T>& x, const StlParams<T>& p, const WindowSpec& w, bool training, Rng& rng) {
    validate_window(w);
    if (x.dim() != 3) throw ShapeError("stl_forward: input must be [C,H,W]");
    const std::int64_t H0 = x.size(1), W0 = x.size(2);
    const std::int64_t padH = (w.wh - H0 % w.wh) % w.wh;
    const std::int64_t padW = (w.ww - W0 % w.ww) % w.ww;
    Tensor<T> cur = (padH || padW) ? pad2d(x, 0, padH, 0, padW, PadMode::Reflect) : x;
    const std::int64_t H = H0 + padH, W = W0 + padW;

    // attention branch
    Tensor<T> t = layer_norm(chw_to_tokens(cur), p.ln1_g, p.ln1_b);
    Tensor<T> wins = window_partition(tokens_to_chw(t, H, W), w);
    const Tensor<T>* mask = nullptr;
    if (w.sh != 0 || w.sw != 0) mask = &cached_shift_mask<T>(H, W, w);
    Tensor<T> att = window_reverse(wmsa(wins, p, w, mask), w, H, W);
    cur = add(cur, drop_path(att, p.drop_path_rate, training, rng));

    // MLP branch
    Tensor<T> t2 = layer_norm(chw_to_tokens(cur), p.ln2_g, p.ln2_b);
    Tensor<T> h = linear(t2, p.mlp_w1, p.mlp_b1);
    h = linear(gelu(h), p.mlp_w2, p.mlp_b2);
    Tensor<T> mlp = tokens_to_chw(h, H, W);
    cur = add(cur, drop_path(mlp, p.drop_path_rate, training, rng));

    if (padH || padW) cur = crop2d(cur, 0, padH, 0, padW);
    return cur;
}

template <typename T>
void collect_stl_params(StlParams<T>& p, std::vector<std::pair<std::string, Tensor<T>*>>& out, const std::string& prefix) {
    out.emplace_back(prefix + ".qkv_w", &p.qkv_w);
    out.emplace_back(prefix + ".qkv_b", &p.qkv_b);
    out.emplace_back(prefix + ".proj_w", &p.proj_w);
    out.emplace_back(prefix + ".proj_b", &p.proj_b);
    out.emplace_back(prefix + ".bias_table", &p.bias_table);
    out.emplace_back(prefix + ".mlp_w1", &p.mlp_w1);
    out.emplace_back(prefix + ".mlp_b1", &p.mlp_b1);
    out.emplace_back(prefix + ".mlp_w2", &p.mlp_w2);
    out.emplace_back(prefix + ".mlp_b2", &p.mlp_b2);
    out.emplace_back(prefix + ".ln1_g", &p.ln1_g);
    out.emplace_back(prefix + ".ln1_b", &p.ln1_b);
    out.emplace_back(prefix + ".ln2_g", &p.ln2_g);
    out.emplace_back(prefix + ".ln2_b", &p.ln2_b);
}

}  // namespace swinfsr

#pragma once

#include "swinfsr/ffb.hpp"

namespace swinfsr {

// Residual cross-attention between rectified stereo views: row-wise
// (epipolar) bidirectional attention with whitened query/key features
// and zero-initialized per-channel fusion scales.
template <typename T>
struct RcamParams {
    Tensor<T> ln_g, ln_b;           // [C], shared across views
    ConvParams<T> resb1, resb2;     // 3x3, shared
    ConvParams<T> w1;               // 1x1 query/key projection, shared
    ConvParams<T> w2;               // 1x1 value projection, shared
    Tensor<T> gamma_l, gamma_r;     // [C], zero-initialized
};

template <typename T>
RcamParams<T> make_rcam_params(std::int64_t C, Rng& rng) {
    RcamParams<T> p;
    p.ln_g = Tensor<T>::full({C}, T(1), true);
    p.ln_b = Tensor<T>::zeros({C}, true);
    p.resb1 = detail::make_conv<T>(C, C, 3, rng);
    p.resb2 = detail::make_conv<T>(C, C, 3, rng);
    p.w1 = detail::make_conv<T>(C, C, 1, rng);
    p.w2 = detail::make_conv<T>(C, C, 1, rng);
    p.gamma_l = Tensor<T>::zeros({C}, true);
    p.gamma_r = Tensor<T>::zeros({C}, true);
    return p;
}

// S(h,i,j) = sum_c qL(c,h,i) * kR(c,h,j): per-row correlation along the
// width (disparity) axis.
template <typename T>
Tensor<T> cross_scores(const Tensor<T>& qL, const Tensor<T>& kR) {
    if (qL.dim() != 3 || qL.shape() != kR.shape()) throw ShapeError("cross_scores: inputs must be equal-shape [C,H,W]");
    Tensor<T> q = permute(qL, {1, 2, 0});  // [H,W,C]
    Tensor<T> k = permute(kR, {1, 2, 0});
    return bmm(q, k, false, true);  // [H,W,W]
}

// Shares one score tensor between both directions: right-to-left uses
// softmax over j of S/sqrt(C); left-to-right uses the per-row transpose
// of the same S (transposed before softmax).
template <typename T>
std::pair<Tensor<T>, Tensor<T>> bidirectional_attention(const Tensor<T>& S, const Tensor<T>& vL, const Tensor<T>& vR,
                                                        std::int64_t C, Tensor<T>* attn_r2l = nullptr,
                                                        Tensor<T>* attn_l2r = nullptr) {
    if (S.dim() != 3 || S.size(1) != S.size(2)) throw ShapeError("bidirectional_attention: S must be [H,W,W]");
    if (vL.dim() != 3 || vL.shape() != vR.shape() || vL.size(0) != C || vL.size(1) != S.size(0) || vL.size(2) != S.size(1))
        throw ShapeError("bidirectional_attention: value shapes inconsistent with S");
    const std::int64_t H = S.size(0), W = S.size(1);
    const T inv_sqrt_c = static_cast<T>(1.0 / std::sqrt(static_cast<double>(C)));
    Tensor<T> scaled = mul_scalar(S, inv_sqrt_c);
    Tensor<T> a_r2l = softmax(scaled, 2);
    Tensor<T> a_l2r = softmax(permute(scaled, {0, 2, 1}), 2);
    if (attn_r2l) *attn_r2l = a_r2l;
    if (attn_l2r) *attn_l2r = a_l2r;
    Tensor<T> f_r2l = permute(bmm(a_r2l, permute(vR, {1, 2, 0})), {2, 0, 1});  // [C,H,W]
    Tensor<T> f_l2r = permute(bmm(a_l2r, permute(vL, {1, 2, 0})), {2, 0, 1});
    (void)H;
    (void)W;
    return {f_r2l, f_l2r};
}

// Full module: out_L = gamma_L (.) attn(R->L) + F_L and symmetrically
// for the right view.  Identity at initialization (gamma = 0).
template <typename T>
std::pair<Tensor<T>, Tensor<T>> rcam_forward(const Tensor<T>& FL, const Tensor<T>& FR, const RcamParams<T>& p,
                                             [[maybe_unused]] bool training, [[maybe_unused]] Rng& rng) {
    if (FL.dim() != 3 || FL.shape() != FR.shape()) throw ShapeError("rcam_forward: views must share shape [C,H,W]");
    const std::int64_t C = FL.size(0), H = FL.size(1), W = FL.size(2);

    auto norm = [&](const Tensor<T>& F) {
        return tokens_to_chw(layer_norm(chw_to_tokens(F), p.ln_g, p.ln_b), H, W);
    };
    auto resb = [&](const Tensor<T>& X) { return add(conv2d(leaky_relu(conv2d(X, p.resb1)), p.resb2), X); };

    Tensor<T> qL = whiten(conv2d(resb(norm(FL)), p.w1));
    Tensor<T> kR = whiten(conv2d(resb(norm(FR)), p.w1));
    Tensor<T> vL = conv2d(FL, p.w2);
    Tensor<T> vR = conv2d(FR, p.w2);

    Tensor<T> S = cross_scores(qL, kR);
    auto [f_r2l, f_l2r] = bidirectional_attention(S, vL, vR, C);

    Tensor<T> outL = add(scale_channels(f_r2l, p.gamma_l), FL);
    Tensor<T> outR = add(scale_channels(f_l2r, p.gamma_r), FR);
    return {outL, outR};
}

template <typename T>
void collect_rcam_params(RcamParams<T>& p, std::vector<std::pair<std::string, Tensor<T>*>>& out, const std::string& prefix) {
    out.emplace_back(prefix + ".ln_g", &p.ln_g);
    out.emplace_back(prefix + ".ln_b", &p.ln_b);
    detail::collect_conv(p.resb1, out, prefix + ".resb1");
    detail::collect_conv(p.resb2, out, prefix + ".resb2");
    detail::collect_conv(p.w1, out, prefix + ".w1");
    detail::collect_conv(p.w2, out, prefix + ".w2");
    out.emplace_back(prefix + ".gamma_l", &p.gamma_l);
    out.emplace_back(prefix + ".gamma_r", &p.gamma_r);
}

}  // namespace swinfsr

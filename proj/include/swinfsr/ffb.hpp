#pragma once

#include "swinfsr/spectral.hpp"
#include "swinfsr/swin.hpp"

namespace swinfsr {

// Fast Fourier block: a local conv branch and a global spectral branch,
// concatenated and fused back to C channels by a 1x1 conv.
template <typename T>
struct FfbParams {
    ConvParams<T> local1, local2;  // 3x3, C -> C
    SpectrumParams<T> global;
    ConvParams<T> fuse;  // 1x1, 2C -> C
};

template <typename T>
FfbParams<T> make_ffb_params(std::int64_t C, Rng& rng) {
    FfbParams<T> p;
    p.local1 = detail::make_conv<T>(C, C, 3, rng);
    p.local2 = detail::make_conv<T>(C, C, 3, rng);
    p.global.c_in = detail::make_conv<T>(C, C, 1, rng);
    p.global.c_freq = detail::make_conv<T>(2 * C, 2 * C, 1, rng);
    p.global.c_out = detail::make_conv<T>(C, C, 1, rng);
    p.fuse = detail::make_conv<T>(C, 2 * C, 1, rng);
    return p;
}

template <typename T>
Tensor<T> ffb_local(const Tensor<T>& F, const FfbParams<T>& p) {
    return add(conv2d(leaky_relu(conv2d(F, p.local1)), p.local2), F);
}

template <typename T>
Tensor<T> ffb_global(const Tensor<T>& F, const FfbParams<T>& p) {
    return spectrum_transform(F, p.global);
}

template <typename T>
Tensor<T> ffb_forward(const Tensor<T>& F, const FfbParams<T>& p) {
    if (F.dim() != 3) throw ShapeError("ffb_forward: input must be [C,H,W]");
    std::vector<Tensor<T>> branches{ffb_local(F, p), ffb_global(F, p)};
    return conv2d(concat(branches, 0), p.fuse);
}

template <typename T>
void collect_ffb_params(FfbParams<T>& p, std::vector<std::pair<std::string, Tensor<T>*>>& out, const std::string& prefix) {
    detail::collect_conv(p.local1, out, prefix + ".local1");
    detail::collect_conv(p.local2, out, prefix + ".local2");
    detail::collect_conv(p.global.c_in, out, prefix + ".spec_in");
    detail::collect_conv(p.global.c_freq, out, prefix + ".spec_freq");
    detail::collect_conv(p.global.c_out, out, prefix + ".spec_out");
    detail::collect_conv(p.fuse, out, prefix + ".fuse");
}

// ---------------------------------------------------------------------------
// Residual block of L STLs (alternating window shifts) closed by an FFB:
//   out = DropPath(FFB(STL_L(...STL_1(F0)))) + F0

template <typename T>
struct RsftbParams {
    std::vector<StlParams<T>> stls;
    std::vector<WindowSpec> windows;  // per-STL window (same geometry, alternating shift)
    FfbParams<T> ffb;
    double ffb_drop_path_rate = 0.0;
};

template <typename T>
RsftbParams<T> make_rsftb_params(std::int64_t C, std::int64_t L, std::int64_t heads, std::int64_t mlp_ratio,
                                 const WindowSpec& base, double drop_path_rate, Rng& rng) {
    if (L < 1) throw ShapeError("rsftb params: need at least one STL");
    RsftbParams<T> p;
    for (std::int64_t i = 0; i < L; ++i) {
        WindowSpec w = base;
        if (i % 2 == 0) {
            w.sh = 0;
            w.sw = 0;
        } else {
            w.sh = base.wh / 2;
            w.sw = base.ww / 2;
        }
        p.windows.push_back(w);
        p.stls.push_back(make_stl_params<T>(C, heads, mlp_ratio, w, drop_path_rate, rng));
    }
    p.ffb = make_ffb_params<T>(C, rng);
    p.ffb_drop_path_rate = drop_path_rate;
    return p;
}

template <typename T>
Tensor<T> rsftb_forward(const Tensor<T>& F0, const RsftbParams<T>& p, bool training, Rng& rng) {
    if (p.stls.empty() || p.stls.size() != p.windows.size()) throw ShapeError("rsftb_forward: malformed params");
    Tensor<T> cur = F0;
    for (std::size_t i = 0; i < p.stls.size(); ++i) cur = stl_forward(cur, p.stls[i], p.windows[i], training, rng);
    return add(drop_path(ffb_forward(cur, p.ffb), p.ffb_drop_path_rate, training, rng), F0);
}

template <typename T>
void collect_rsftb_params(RsftbParams<T>& p, std::vector<std::pair<std::string, Tensor<T>*>>& out, const std::string& prefix) {
    for (std::size_t i = 0; i < p.stls.size(); ++i) collect_stl_params(p.stls[i], out, prefix + ".stl" + std::to_string(i));
    collect_ffb_params(p.ffb, out, prefix + ".ffb");
}

}  // namespace swinfsr

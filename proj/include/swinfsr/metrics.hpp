#pragma once

#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "swinfsr/tensor.hpp"

namespace swinfsr {

// PSNR over all RGB values against data range 1, capped at a 99 dB
// sentinel (identical images would otherwise be +inf).
template <typename T>
double psnr(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.shape() != b.shape()) throw ShapeError("psnr: shape mismatch");
    double mse = 0;
    const T* pa = a.data();
    const T* pb = b.data();
    for (std::int64_t i = 0; i < a.numel(); ++i) {
        const double d = double(pa[i]) - double(pb[i]);
        mse += d * d;
    }
    mse /= double(a.numel());
    if (mse <= 0.0) return 99.0;
    return std::min(99.0, 10.0 * std::log10(1.0 / mse));
}

namespace detail {

inline const std::vector<double>& ssim_gauss_kernel() {
    // 11-tap Gaussian, sigma = 1.5, normalized
    static const std::vector<double> k = [] {
        std::vector<double> v(11);
        double sum = 0;
        for (int i = 0; i < 11; ++i) {
            const double d = i - 5;
            v[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
            sum += v[static_cast<std::size_t>(i)];
        }
        for (double& x : v) x /= sum;
        return v;
    }();
    return k;
}

// valid-region separable Gaussian filtering of one [H,W] plane
inline std::vector<double> ssim_blur(const std::vector<double>& img, std::int64_t H, std::int64_t W) {
    const auto& k = ssim_gauss_kernel();
    const std::int64_t vw = W - 10, vh = H - 10;
    std::vector<double> tmp(static_cast<std::size_t>(H * vw));
    for (std::int64_t y = 0; y < H; ++y)
        for (std::int64_t x = 0; x < vw; ++x) {
            double s = 0;
            for (int t = 0; t < 11; ++t) s += k[static_cast<std::size_t>(t)] * img[static_cast<std::size_t>(y * W + x + t)];
            tmp[static_cast<std::size_t>(y * vw + x)] = s;
        }
    std::vector<double> out(static_cast<std::size_t>(vh * vw));
    for (std::int64_t y = 0; y < vh; ++y)
        for (std::int64_t x = 0; x < vw; ++x) {
            double s = 0;
            for (int t = 0; t < 11; ++t) s += k[static_cast<std::size_t>(t)] * tmp[static_cast<std::size_t>((y + t) * vw + x)];
            out[static_cast<std::size_t>(y * vw + x)] = s;
        }
    return out;
}

}  // namespace detail

// SSIM with an 11x11 Gaussian window (sigma 1.5), K1=0.01, K2=0.03, data
// range 1; computed per channel on the valid (un-padded) region, then
// averaged over channels.
template <typename T>
double ssim(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.shape() != b.shape()) throw ShapeError("ssim: shape mismatch");
    if (a.dim() != 3) throw ShapeError("ssim: inputs must be [C,H,W]");
    const std::int64_t C = a.size(0), H = a.size(1), W = a.size(2);
    if (H < 11 || W < 11) throw ShapeError("ssim: image smaller than the 11x11 window");
    constexpr double C1 = 0.01 * 0.01, C2 = 0.03 * 0.03;

    double total = 0;
    for (std::int64_t c = 0; c < C; ++c) {
        const std::size_t n = static_cast<std::size_t>(H * W);
        std::vector<double> xa(n), xb(n), xaa(n), xbb(n), xab(n);
        const T* pa = a.data() + c * H * W;
        const T* pb = b.data() + c * H * W;
        for (std::size_t i = 0; i < n; ++i) {
            xa[i] = double(pa[i]);
            xb[i] = double(pb[i]);
            xaa[i] = xa[i] * xa[i];
            xbb[i] = xb[i] * xb[i];
            xab[i] = xa[i] * xb[i];
        }
        auto mu_a = detail::ssim_blur(xa, H, W);
        auto mu_b = detail::ssim_blur(xb, H, W);
        auto m_aa = detail::ssim_blur(xaa, H, W);
        auto m_bb = detail::ssim_blur(xbb, H, W);
        auto m_ab = detail::ssim_blur(xab, H, W);
        double acc = 0;
        for (std::size_t i = 0; i < mu_a.size(); ++i) {
            const double va = m_aa[i] - mu_a[i] * mu_a[i];
            const double vb = m_bb[i] - mu_b[i] * mu_b[i];
            const double cov = m_ab[i] - mu_a[i] * mu_b[i];
            acc += ((2 * mu_a[i] * mu_b[i] + C1) * (2 * cov + C2)) /
                   ((mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + C1) * (va + vb + C2));
        }
        total += acc / double(mu_a.size());
    }
    return total / double(C);
}

struct SceneScore {
    std::string scene;
    double psnr_l = 0, psnr_r = 0, ssim_l = 0, ssim_r = 0;
};

// Dataset aggregate: per-view metrics averaged over views and scenes.
inline std::pair<double, double> stereo_score(const std::vector<SceneScore>& rows) {
    if (rows.empty()) throw DataError("stereo_score: no scenes");
    double p = 0, s = 0;
    for (const auto& r : rows) {
        p += 0.5 * (r.psnr_l + r.psnr_r);
        s += 0.5 * (r.ssim_l + r.ssim_r);
    }
    return {p / double(rows.size()), s / double(rows.size())};
}

inline void write_metrics_csv(const std::string& path, const std::vector<SceneScore>& rows) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write metrics report: " + path);
    out << "scene,psnr_L,psnr_R,ssim_L,ssim_R\n";
    char buf[160];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%s,%.4f,%.4f,%.6f,%.6f\n", r.scene.c_str(), r.psnr_l, r.psnr_r, r.ssim_l,
                      r.ssim_r);
        out << buf;
    }
}

}  // namespace swinfsr

#pragma once

#include <complex>
#include <unordered_map>

#include "swinfsr/tensor.hpp"

namespace swinfsr {
namespace fftcore {

using cd = std::complex<double>;

// Unit roots exp(sign*2*pi*i*k/n), k in [0,n); sign = -1 forward, +1 inverse.
inline const std::vector<cd>& roots(std::size_t n, bool inverse) {
    thread_local std::unordered_map<std::uint64_t, std::vector<cd>> cache;
    const std::uint64_t key = (static_cast<std::uint64_t>(n) << 1) | (inverse ? 1u : 0u);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    std::vector<cd> r(n);
    const double sgn = inverse ? 1.0 : -1.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double ang = sgn * 2.0 * M_PI * static_cast<double>(k) / static_cast<double>(n);
        r[k] = cd(std::cos(ang), std::sin(ang));
    }
    return cache.emplace(key, std::move(r)).first->second;
}

// Iterative radix-2 FFT for the Bluestein convolution (n a power of two).
// Inverse includes the 1/n scale.
inline void fft_pow2(std::vector<cd>& a, bool inverse) {
    const std::size_t n = a.size();
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = (inverse ? 2.0 : -2.0) * M_PI / static_cast<double>(len);
        const cd wl(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            cd w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                const cd u = a[i + k];
                const cd v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wl;
            }
        }
    }
    if (inverse) {
        const double inv = 1.0 / static_cast<double>(n);
        for (auto& x : a) x *= inv;
    }
}

// Chirp-z (Bluestein) DFT of arbitrary length via a power-of-two
// convolution; used for prime lengths > 13.  Output is unnormalized in
// both directions.
inline void bluestein(const cd* in, std::size_t stride, cd* out, std::size_t n, bool inverse) {
    const double sgn = inverse ? 1.0 : -1.0;
    std::vector<cd> w(n);  // w[j] = exp(sign*pi*i*j^2/n), phase reduced mod 2n
    for (std::size_t j = 0; j < n; ++j) {
        const std::size_t q = (j * j) % (2 * n);
        const double ang = sgn * M_PI * static_cast<double>(q) / static_cast<double>(n);
        w[j] = cd(std::cos(ang), std::sin(ang));
    }
    std::size_t M = 1;
    while (M < 2 * n - 1) M <<= 1;
    std::vector<cd> a(M, cd(0, 0)), b(M, cd(0, 0));
    for (std::size_t j = 0; j < n; ++j) a[j] = in[j * stride] * w[j];
    b[0] = std::conj(w[0]);
    for (std::size_t j = 1; j < n; ++j) b[j] = b[M - j] = std::conj(w[j]);
    fft_pow2(a, false);
    fft_pow2(b, false);
    for (std::size_t j = 0; j < M; ++j) a[j] *= b[j];
    fft_pow2(a, true);
    for (std::size_t k = 0; k < n; ++k) out[k] = w[k] * a[k];
}

inline std::size_t smallest_factor_le13(std::size_t n) {
    for (std::size_t p : {2, 3, 5, 7, 11, 13})
        if (n % p == 0) return p;
    return 0;
}

// Mixed-radix decimation-in-time step.  roots is the table for the
// top-level length N; rscale = N/n converts exponents for this level.
inline void fft_rec(const cd* in, std::size_t stride, cd* out, std::size_t n, const cd* rt, std::size_t rscale,
                    bool inverse, std::vector<cd>& col) {
    if (n == 1) {
        out[0] = in[0];
        return;
    }
    const std::size_t p = smallest_factor_le13(n);
    if (p == 0) {
        bluestein(in, stride, out, n, inverse);
        return;
    }
    const std::size_t m = n / p;
    for (std::size_t j = 0; j < p; ++j) fft_rec(in + j * stride, stride * p, out + j * m, m, rt, rscale * p, inverse, col);
    // Combine: for each residue r, a p-point DFT over twiddled column values.
    for (std::size_t r = 0; r < m; ++r) {
        for (std::size_t j = 0; j < p; ++j) col[j] = out[j * m + r] * rt[((j * r) % n) * rscale];
        for (std::size_t t = 0; t < p; ++t) {
            cd s(0, 0);
            for (std::size_t j = 0; j < p; ++j) s += col[j] * rt[((j * t * m) % n) * rscale];
            out[r + t * m] = s;
        }
    }
}

// Unnormalized 1-D DFT: out[k] = sum_j in[j*stride] * exp(sign*2*pi*i*jk/n).
inline void fft_1d(const cd* in, std::size_t stride, cd* out, std::size_t n, bool inverse) {
    if (n == 0) throw ShapeError("fft: zero length");
    const auto& rt = roots(n, inverse);
    std::vector<cd> col(13);
    fft_rec(in, stride, out, n, rt.data(), 1, inverse, col);
}

// In-place unnormalized 2-D complex DFT on a row-major H*W grid.
inline void fft2_c2c(std::vector<cd>& a, std::int64_t H, std::int64_t W, bool inverse) {
    std::vector<cd> buf(static_cast<std::size_t>(std::max(H, W)));
    for (std::int64_t h = 0; h < H; ++h) {
        fft_1d(a.data() + h * W, 1, buf.data(), static_cast<std::size_t>(W), inverse);
        std::copy_n(buf.data(), W, a.data() + h * W);
    }
    for (std::int64_t v = 0; v < W; ++v) {
        fft_1d(a.data() + v, static_cast<std::size_t>(W), buf.data(), static_cast<std::size_t>(H), inverse);
        for (std::int64_t u = 0; u < H; ++u) a[static_cast<std::size_t>(u * W + v)] = buf[static_cast<std::size_t>(u)];
    }
}

// Orthonormal real-input 2-D DFT, keeping columns v in [0, W/2].
// re/im are H x Wh row-major planes.
inline void rfft2_plane(const double* x, std::int64_t H, std::int64_t W, double* re, double* im) {
    const std::int64_t Wh = W / 2 + 1;
    std::vector<cd> rows(static_cast<std::size_t>(H * W));
    std::vector<cd> buf(static_cast<std::size_t>(std::max(H, W)));
    std::vector<cd> in(static_cast<std::size_t>(W));
    for (std::int64_t h = 0; h < H; ++h) {
        for (std::int64_t w = 0; w < W; ++w) in[static_cast<std::size_t>(w)] = cd(x[h * W + w], 0.0);
        fft_1d(in.data(), 1, buf.data(), static_cast<std::size_t>(W), false);
        std::copy_n(buf.data(), W, rows.data() + h * W);
    }
    const double scale = 1.0 / std::sqrt(static_cast<double>(H) * static_cast<double>(W));
    for (std::int64_t v = 0; v < Wh; ++v) {
        fft_1d(rows.data() + v, static_cast<std::size_t>(W), buf.data(), static_cast<std::size_t>(H), false);
        for (std::int64_t u = 0; u < H; ++u) {
            re[u * Wh + v] = buf[static_cast<std::size_t>(u)].real() * scale;
            im[u * Wh + v] = buf[static_cast<std::size_t>(u)].imag() * scale;
        }
    }
}

// Orthonormal inverse of rfft2_plane: Hermitian-extends the kept half
// and returns the real part.  Well-defined for arbitrary (not
// necessarily self-consistent) half-spectra.
inline void irfft2_plane(const double* re, const double* im, std::int64_t H, std::int64_t W, double* out) {
    const std::int64_t Wh = W / 2 + 1;
    std::vector<cd> a(static_cast<std::size_t>(H * W));
    for (std::int64_t u = 0; u < H; ++u)
        for (std::int64_t v = 0; v < Wh; ++v) a[static_cast<std::size_t>(u * W + v)] = cd(re[u * Wh + v], im[u * Wh + v]);
    for (std::int64_t u = 0; u < H; ++u)
        for (std::int64_t v = Wh; v < W; ++v) {
            const std::int64_t mu = (H - u) % H;
            const std::int64_t mv = W - v;
            a[static_cast<std::size_t>(u * W + v)] = std::conj(a[static_cast<std::size_t>(mu * W + mv)]);
        }
    fft2_c2c(a, H, W, true);
    const double scale = 1.0 / std::sqrt(static_cast<double>(H) * static_cast<double>(W));
    for (std::int64_t i = 0; i < H * W; ++i) out[i] = a[static_cast<std::size_t>(i)].real() * scale;
}

}  // namespace fftcore

// ---------------------------------------------------------------------------
// Differentiable tensor-level transforms.  All FFT arithmetic runs in
// double regardless of T.

// [C,H,W] -> [2C,H,floor(W/2)+1]: real parts in channels [0,C),
// imaginary parts in [C,2C); orthonormal normalization.
template <typename T>
Tensor<T> rfft2(const Tensor<T>& x) {
    if (x.dim() != 3) throw ShapeError("rfft2: input must be [C,H,W]");
    const std::int64_t C = x.size(0), H = x.size(1), W = x.size(2);
    if (H < 1 || W < 1) throw ShapeError("rfft2: empty spatial dims");
    const std::int64_t Wh = W / 2 + 1;
    Tensor<T> out({2 * C, H, Wh});
    std::vector<double> plane(static_cast<std::size_t>(H * W));
    std::vector<double> re(static_cast<std::size_t>(H * Wh)), im(static_cast<std::size_t>(H * Wh));
    for (std::int64_t c = 0; c < C; ++c) {
        for (std::int64_t i = 0; i < H * W; ++i) plane[static_cast<std::size_t>(i)] = static_cast<double>(x.data()[c * H * W + i]);
        fftcore::rfft2_plane(plane.data(), H, W, re.data(), im.data());
        for (std::int64_t i = 0; i < H * Wh; ++i) {
            out.data()[c * H * Wh + i] = static_cast<T>(re[static_cast<std::size_t>(i)]);
            out.data()[(C + c) * H * Wh + i] = static_cast<T>(im[static_cast<std::size_t>(i)]);
        }
    }
    detail::wire<T>(out, {&x}, [xn = x.node(), C, H, W, Wh](Node<T>& self) {
        if (!xn->requires_grad) return;
        // d/dx = Re(full inverse DFT of the zero-extended half-grad), orthonormal.
        std::vector<fftcore::cd> g(static_cast<std::size_t>(H * W));
        const double scale = 1.0 / std::sqrt(static_cast<double>(H) * static_cast<double>(W));
        for (std::int64_t c = 0; c < C; ++c) {
            std::fill(g.begin(), g.end(), fftcore::cd(0, 0));
            for (std::int64_t u = 0; u < H; ++u)
                for (std::int64_t v = 0; v < Wh; ++v)
                    g[static_cast<std::size_t>(u * W + v)] =
                        fftcore::cd(static_cast<double>(self.grad[static_cast<std::size_t>(c * H * Wh + u * Wh + v)]),
                                    static_cast<double>(self.grad[static_cast<std::size_t>((C + c) * H * Wh + u * Wh + v)]));
            fftcore::fft2_c2c(g, H, W, true);
            for (std::int64_t i = 0; i < H * W; ++i)
                xn->grad[static_cast<std::size_t>(c * H * W + i)] += static_cast<T>(g[static_cast<std::size_t>(i)].real() * scale);
        }
    });
    return out;
}

// Inverse of rfft2.  out_w disambiguates even/odd widths sharing the
// same half-spectrum extent.
template <typename T>
Tensor<T> irfft2(const Tensor<T>& X, std::int64_t out_w) {
    if (X.dim() != 3 || X.size(0) % 2 != 0) throw ShapeError("irfft2: input must be [2C,H,Wh]");
    const std::int64_t C = X.size(0) / 2, H = X.size(1), Wh = X.size(2);
    if (out_w / 2 + 1 != Wh)
        throw ShapeError("irfft2: out_w " + std::to_string(out_w) + " inconsistent with half-spectrum width " + std::to_string(Wh));
    const std::int64_t W = out_w;
    Tensor<T> out({C, H, W});
    std::vector<double> re(static_cast<std::size_t>(H * Wh)), im(static_cast<std::size_t>(H * Wh)),
        plane(static_cast<std::size_t>(H * W));
    for (std::int64_t c = 0; c < C; ++c) {
        for (std::int64_t i = 0; i < H * Wh; ++i) {
            re[static_cast<std::size_t>(i)] = static_cast<double>(X.data()[c * H * Wh + i]);
            im[static_cast<std::size_t>(i)] = static_cast<double>(X.data()[(C + c) * H * Wh + i]);
        }
        fftcore::irfft2_plane(re.data(), im.data(), H, W, plane.data());
        for (std::int64_t i = 0; i < H * W; ++i) out.data()[c * H * W + i] = static_cast<T>(plane[static_cast<std::size_t>(i)]);
    }
    detail::wire<T>(out, {&X}, [Xn = X.node(), C, H, W, Wh](Node<T>& self) {
        if (!Xn->requires_grad) return;
        // d/dX = forward DFT of the real grad, selected on kept bins; a
        // bin mirrored into the discarded half counts twice.
        std::vector<fftcore::cd> g(static_cast<std::size_t>(H * W));
        const double scale = 1.0 / std::sqrt(static_cast<double>(H) * static_cast<double>(W));
        for (std::int64_t c = 0; c < C; ++c) {
            for (std::int64_t i = 0; i < H * W; ++i)
                g[static_cast<std::size_t>(i)] = fftcore::cd(static_cast<double>(self.grad[static_cast<std::size_t>(c * H * W + i)]), 0.0);
            fftcore::fft2_c2c(g, H, W, false);
            for (std::int64_t u = 0; u < H; ++u)
                for (std::int64_t v = 0; v < Wh; ++v) {
                    const bool self_paired = (v == 0) || (W % 2 == 0 && v == W / 2);
                    const double mult = self_paired ? 1.0 : 2.0;
                    const fftcore::cd val = g[static_cast<std::size_t>(u * W + v)];
                    Xn->grad[static_cast<std::size_t>(c * H * Wh + u * Wh + v)] += static_cast<T>(mult * val.real() * scale);
                    Xn->grad[static_cast<std::size_t>((C + c) * H * Wh + u * Wh + v)] += static_cast<T>(mult * val.imag() * scale);
                }
        }
    });
    return out;
}

}  // namespace swinfsr

#pragma once

#include "swinfsr/fft.hpp"
#include "swinfsr/nn_ops.hpp"

namespace swinfsr {

// Frequency-domain sub-block of the FFB global branch: a 1x1 conv in the
// spatial domain, a 1x1 conv + ReLU on the stacked real/imag spectrum,
// and a 1x1 conv after the inverse transform.
template <typename T>
struct SpectrumParams {
    ConvParams<T> c_in;    // [C,C,1,1]
    ConvParams<T> c_freq;  // [2C,2C,1,1]
    ConvParams<T> c_out;   // [C,C,1,1]
};

template <typename T>
SpectrumParams<T> make_spectrum_params(std::int64_t C, Rng& rng) {
    SpectrumParams<T> p;
    p.c_in = detail::make_conv<T>(C, C, 1, rng);
    p.c_freq = detail::make_conv<T>(2 * C, 2 * C, 1, rng);
    p.c_out = detail::make_conv<T>(C, C, 1, rng);
    return p;
}

template <typename T>
void validate_spectrum_params(const SpectrumParams<T>& p) {
    const std::int64_t C = p.c_in.weight.size(0);
    auto check_1x1 = [](const ConvParams<T>& cp, const char* name) {
        if (cp.weight.dim() != 4 || cp.weight.size(2) != 1 || cp.weight.size(3) != 1)
            throw ShapeError(std::string("spectrum params: ") + name + " must be a 1x1 conv");
    };
    check_1x1(p.c_in, "c_in");
    check_1x1(p.c_freq, "c_freq");
    check_1x1(p.c_out, "c_out");
    if (p.c_in.weight.size(1) != C) throw ShapeError("spectrum params: c_in must preserve channels");
    if (p.c_freq.weight.size(0) != 2 * C || p.c_freq.weight.size(1) != 2 * C)
        throw ShapeError("spectrum params: c_freq must act on 2C stacked real/imag channels");
    if (p.c_out.weight.size(0) != C || p.c_out.weight.size(1) != C)
        throw ShapeError("spectrum params: c_out must preserve channels");
}

// Y = c_out( irfft2( relu(c_freq( rfft2(c_in(F)) )) ) + c_in(F) )
template <typename T>
Tensor<T> spectrum_transform(const Tensor<T>& F, const SpectrumParams<T>& p) {
    validate_spectrum_params(p);
    if (F.dim() != 3) throw ShapeError("spectrum_transform: input must be [C,H,W]");
    if (F.size(0) != p.c_in.weight.size(1))
        throw ShapeError("spectrum_transform: input channels " + std::to_string(F.size(0)) + " do not match params");
    const std::int64_t W = F.size(2);
    Tensor<T> Fp = conv2d(F, p.c_in);
    Tensor<T> spec = rfft2(Fp);
    Tensor<T> mixed = relu(conv2d(spec, p.c_freq));
    Tensor<T> spatial = irfft2(mixed, W);
    return conv2d(add(spatial, Fp), p.c_out);
}

}  // namespace swinfsr

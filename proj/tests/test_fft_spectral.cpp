#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <complex>
#include <swinfsr/gradcheck.hpp>
#include <swinfsr/spectral.hpp>

using namespace swinfsr;
using D = Tensor<double>;

namespace {

// Direct O(N^2) 2-D DFT oracle with orthonormal scaling.
std::vector<std::complex<double>> dft2_ref(const double* x, int H, int W) {
    std::vector<std::complex<double>> X(static_cast<std::size_t>(H) * W);
    const double scale = 1.0 / std::sqrt(double(H) * double(W));
    for (int u = 0; u < H; ++u)
        for (int v = 0; v < W; ++v) {
            std::complex<double> s = 0;
            for (int y = 0; y < H; ++y)
                for (int xx = 0; xx < W; ++xx) {
                    double ang = -2.0 * M_PI * (double(u) * y / H + double(v) * xx / W);
                    s += x[y * W + xx] * std::complex<double>(std::cos(ang), std::sin(ang));
                }
            X[static_cast<std::size_t>(u) * W + v] = s * scale;
        }
    return X;
}

ConvParams<double> identity_1x1(int c) {
    ConvParams<double> p;
    p.weight = D::zeros({c, c, 1, 1});
    for (int i = 0; i < c; ++i) p.weight[i * c + i] = 1.0;
    p.bias = D::zeros({c});
    return p;
}

}  // namespace

TEST_CASE("rfft2 matches direct DFT oracle across radices") {
    // covers pow2, mixed radix, primes <= 13, Bluestein primes (17), and degenerate extents
    const std::pair<int, int> sizes[] = {{4, 4},  {6, 15}, {8, 8},  {7, 13}, {5, 17}, {12, 10},
                                         {1, 1},  {3, 1},  {1, 8},  {9, 9},  {16, 5}, {17, 4},
                                         {2, 26}, {11, 3}, {30, 90}};
    Rng rng(101);
    for (auto [H, W] : sizes) {
        CAPTURE(H);
        CAPTURE(W);
        D x = D::uniform({1, H, W}, rng, -1, 1);
        D X = rfft2(x);
        const int Wh = W / 2 + 1;
        CHECK(X.shape() == Shape{2, H, Wh});
        auto ref = dft2_ref(x.data(), H, W);
        double worst = 0;
        for (int u = 0; u < H; ++u)
            for (int v = 0; v < Wh; ++v) {
                worst = std::max(worst, std::fabs(X[(0 * H + u) * Wh + v] - ref[u * W + v].real()));
                worst = std::max(worst, std::fabs(X[(1 * H + u) * Wh + v] - ref[u * W + v].imag()));
            }
        CHECK(worst < 1e-9);
    }
}

TEST_CASE("rfft2 special spectra: constant and impulse") {
    D c = D::full({1, 4, 4}, 3.5);
    D X = rfft2(c);
    CHECK(X[0] == doctest::Approx(4.0 * 3.5).epsilon(1e-12));  // DC = v*sqrt(HW)
    for (std::int64_t i = 1; i < X.numel(); ++i) CHECK(std::fabs(X[i]) < 1e-12);

    D imp = D::zeros({1, 5, 6});
    imp[0] = 1.0;
    D Xi = rfft2(imp);
    const double mag = 1.0 / std::sqrt(30.0);
    const int Wh = 4;
    for (int u = 0; u < 5; ++u)
        for (int v = 0; v < Wh; ++v) {
            double re = Xi[(0 * 5 + u) * Wh + v], im = Xi[(1 * 5 + u) * Wh + v];
            CHECK(std::sqrt(re * re + im * im) == doctest::Approx(mag).epsilon(1e-10));
        }
}

TEST_CASE("Parseval with Hermitian-half correction") {
    Rng rng(103);
    for (auto [H, W] : {std::pair<int, int>{8, 8}, {6, 15}, {5, 7}}) {
        D x = D::uniform({3, H, W}, rng, -2, 2);
        D X = rfft2(x);
        const int Wh = W / 2 + 1;
        for (int ch = 0; ch < 3; ++ch) {
            double space = 0;
            for (int i = 0; i < H * W; ++i) {
                double val = x[ch * H * W + i];
                space += val * val;
            }
            double freq = 0;
            for (int u = 0; u < H; ++u)
                for (int v = 0; v < Wh; ++v) {
                    double re = X[((0 + ch) * H + u) * Wh + v];
                    double im = X[((3 + ch) * H + u) * Wh + v];
                    double w = (v == 0 || (W % 2 == 0 && v == W / 2)) ? 1.0 : 2.0;
                    freq += w * (re * re + im * im);
                }
            CHECK(std::fabs(space - freq) < 1e-10);
        }
    }
}

TEST_CASE("irfft2 round trips, odd and even widths") {
    Rng rng(107);
    for (auto [C, H, W] : {std::tuple<int, int, int>{2, 6, 10}, {1, 4, 7}, {3, 15, 17}, {1, 1, 1}, {2, 30, 90}}) {
        D x = D::uniform({C, H, W}, rng, -1, 1);
        D back = irfft2(rfft2(x), W);
        CHECK(back.shape() == x.shape());
        double worst = 0;
        for (std::int64_t i = 0; i < x.numel(); ++i) worst = std::max(worst, std::fabs(back[i] - x[i]));
        CAPTURE(H);
        CAPTURE(W);
        CHECK(worst < 1e-10);
    }
    D bad = rfft2(D::zeros({1, 4, 10}));
    CHECK_THROWS_AS(irfft2(bad, 7), ShapeError);
}

TEST_CASE("DC-only spectrum reconstructs a constant image") {
    D X = D::zeros({2, 4, 3});
    X[0] = 8.0;  // real DC; H=W=4 -> constant 8/sqrt(16) = 2
    D img = irfft2(X, 4);
    for (std::int64_t i = 0; i < img.numel(); ++i) CHECK(img[i] == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("transform linearity") {
    Rng rng(109);
    D x = D::uniform({2, 6, 9}, rng, -1, 1);
    D y = D::uniform({2, 6, 9}, rng, -1, 1);
    const double al = 1.7, be = -0.3;
    D lhs = rfft2(add(mul_scalar(x, al), mul_scalar(y, be)));
    D rhs = add(mul_scalar(rfft2(x), al), mul_scalar(rfft2(y), be));
    for (std::int64_t i = 0; i < lhs.numel(); ++i) CHECK(std::fabs(lhs[i] - rhs[i]) < 1e-10);
}

TEST_CASE("rfft2/irfft2 gradients vs finite differences") {
    Rng rng(113);
    D x = D::uniform({2, 5, 6}, rng, -1, 1, true);
    D R = D::uniform({4, 5, 4}, rng, -1, 1);
    auto f = [&] { return sum_all(mul(rfft2(x), R)); };
    auto rep = gradcheck<double>(f, {{"x", x}});
    CHECK(rep.max_rel_err < 1e-6);

    // arbitrary (non-Hermitian) spectrum input: the op is linear, FD must still agree
    D X = D::uniform({4, 5, 4}, rng, -1, 1, true);
    D R2 = D::uniform({2, 5, 6}, rng, -1, 1);
    auto g = [&] { return sum_all(mul(irfft2(X, 6), R2)); };
    CHECK(gradcheck<double>(g, {{"X", X}}).max_rel_err < 1e-6);

    // odd width
    D X2 = D::uniform({2, 3, 4}, rng, -1, 1, true);
    D R3 = D::uniform({1, 3, 7}, rng, -1, 1);
    auto h = [&] { return sum_all(mul(irfft2(X2, 7), R3)); };
    CHECK(gradcheck<double>(h, {{"X", X2}}).max_rel_err < 1e-6);
}

TEST_CASE("spectrum_transform: zero-frequency-branch identity") {
    const int C = 3;
    SpectrumParams<double> p;
    p.c_in = identity_1x1(C);
    p.c_out = identity_1x1(C);
    p.c_freq.weight = D::zeros({2 * C, 2 * C, 1, 1});
    p.c_freq.bias = D::zeros({2 * C});
    Rng rng(127);
    D F = D::uniform({C, 6, 15}, rng, -1, 1);
    D out = spectrum_transform(F, p);
    CHECK(out.shape() == F.shape());
    for (std::int64_t i = 0; i < F.numel(); ++i) CHECK(out[i] == doctest::Approx(F[i]).epsilon(1e-10));
}

TEST_CASE("spectrum_transform shape preservation incl. odd widths") {
    Rng rng(131);
    for (auto [H, W] : {std::pair<int, int>{6, 15}, {4, 7}, {9, 9}}) {
        SpectrumParams<double> p = make_spectrum_params<double>(8, rng);
        D F = D::uniform({8, H, W}, rng, -1, 1);
        D out = spectrum_transform(F, p);
        CHECK(out.shape() == Shape{8, H, W});
    }
    SpectrumParams<double> p = make_spectrum_params<double>(8, rng);
    CHECK_THROWS_AS(spectrum_transform(D::zeros({4, 6, 6}), p), ShapeError);
}

TEST_CASE("spectrum_transform grad check") {
    Rng rng(137);
    SpectrumParams<double> p = make_spectrum_params<double>(2, rng);
    D F = D::uniform({2, 4, 5}, rng, -1, 1, true);
    D R = D::uniform({2, 4, 5}, rng, -1, 1);
    auto f = [&] { return sum_all(mul(spectrum_transform(F, p), R)); };
    auto rep = gradcheck<double>(f, {{"F", F},
                                     {"c_in.w", p.c_in.weight},
                                     {"c_freq.w", p.c_freq.weight},
                                     {"c_freq.b", p.c_freq.bias},
                                     {"c_out.w", p.c_out.weight}});
    INFO(rep.worst);
    CHECK(rep.max_rel_err < 1e-4);
}

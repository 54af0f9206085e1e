#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <swinfsr/gradcheck.hpp>
#include <swinfsr/swin.hpp>

using namespace swinfsr;
using D = Tensor<double>;

namespace {

void zero_fill(D& t) {
    for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = 0.0;
}

StlParams<double> zero_attention_params(std::int64_t C, std::int64_t heads, const WindowSpec& w, Rng& rng) {
    StlParams<double> p = make_stl_params<double>(C, heads, 2, w, 0.0, rng);
    zero_fill(p.qkv_w);
    zero_fill(p.qkv_b);
    zero_fill(p.bias_table);
    return p;
}

}  // namespace

TEST_CASE("window geometry: counts and round trips") {
    WindowSpec w{6, 15, 0, 0};
    Rng rng(201);
    D x = D::uniform({2, 30, 90}, rng, -1, 1);
    D t = window_partition(x, w);
    CHECK(t.shape() == Shape{30, 90, 2});  // 5*6 windows of 6*15 tokens

    D back = window_reverse(t, w, 30, 90);
    for (std::int64_t i = 0; i < x.numel(); ++i) CHECK(back[i] == x[i]);

    WindowSpec ws{6, 15, 3, 7};
    D ts = window_partition(x, ws);
    D backs = window_reverse(ts, ws, 30, 90);
    for (std::int64_t i = 0; i < x.numel(); ++i) CHECK(backs[i] == x[i]);

    CHECK_THROWS_AS(window_partition(D::zeros({1, 7, 15}), w), ShapeError);
    CHECK_THROWS_AS((WindowSpec{6, 15, 6, 0}, validate_window(WindowSpec{6, 15, 6, 0})), ShapeError);
}

TEST_CASE("window partition places shifted pixels where expected") {
    // single channel ramp encoding (y,x) so placement is directly readable
    const int H = 6, W = 10;
    std::vector<double> v(H * W);
    for (int i = 0; i < H * W; ++i) v[i] = i;
    D x = D::from_data({1, H, W}, v);
    WindowSpec w{3, 5, 1, 2};
    D t = window_partition(x, w);
    // token (wy,wx,iy,ix) must hold source pixel ((wy*wh+iy+sh)%H, (wx*ww+ix+sw)%W)
    for (int wy = 0; wy < 2; ++wy)
        for (int wx = 0; wx < 2; ++wx)
            for (int iy = 0; iy < 3; ++iy)
                for (int ix = 0; ix < 5; ++ix) {
                    int win = wy * 2 + wx, tok = iy * 5 + ix;
                    double expect = ((wy * 3 + iy + 1) % H) * W + (wx * 5 + ix + 2) % W;
                    CHECK(t[(win * 15 + tok) * 1] == expect);
                }
}

TEST_CASE("wmsa with degenerate weights produces projected-bias constant") {
    WindowSpec w{2, 3, 0, 0};
    Rng rng(203);
    const int C = 4;
    StlParams<double> p = zero_attention_params(C, 2, w, rng);
    zero_fill(p.proj_w);
    for (std::int64_t i = 0; i < C; ++i) p.proj_b[i] = 0.25 * double(i + 1);

    D tokens = D::uniform({3, 6, C}, rng, -1, 1);
    D out = wmsa(tokens, p, w);
    CHECK(out.shape() == tokens.shape());
    for (int n = 0; n < 3; ++n)
        for (int t = 0; t < 6; ++t)
            for (int c = 0; c < C; ++c) CHECK(out[(n * 6 + t) * C + c] == doctest::Approx(0.25 * (c + 1)).epsilon(1e-12));
}

TEST_CASE("attention rows are a probability distribution") {
    WindowSpec w{3, 5, 0, 0};
    Rng rng(207);
    StlParams<double> p = make_stl_params<double>(8, 4, 2, w, 0.0, rng);
    D tokens = D::uniform({4, 15, 8}, rng, -2, 2);
    D attn;
    wmsa(tokens, p, w, static_cast<const D*>(nullptr), &attn);
    CHECK(attn.shape() == Shape{4, 4, 15, 15});
    for (std::int64_t r = 0; r < 4 * 4 * 15; ++r) {
        double s = 0;
        for (int j = 0; j < 15; ++j) {
            double a = attn[r * 15 + j];
            CHECK(a >= 0.0);
            s += a;
        }
        CHECK(std::fabs(s - 1.0) < 1e-6);
    }
}

TEST_CASE("relative position bias indexing against direct construction") {
    // zero qkv makes logits equal the bias alone, so captured attention rows
    // must equal softmax of the relative-bias row computed by hand
    WindowSpec w{2, 3, 0, 0};
    Rng rng(211);
    StlParams<double> p = zero_attention_params(4, 2, w, rng);
    p.bias_table = D::uniform({(2 * 2 - 1) * (2 * 3 - 1), 2}, rng, -1, 1, true);

    D tokens = D::uniform({2, 6, 4}, rng, -1, 1);
    D attn;
    wmsa(tokens, p, w, static_cast<const D*>(nullptr), &attn);

    const int T = 6;
    for (int h = 0; h < 2; ++h)
        for (int i = 0; i < T; ++i) {
            std::vector<double> logits(T);
            for (int j = 0; j < T; ++j) {
                int iy = i / 3, ix = i % 3, jy = j / 3, jx = j % 3;
                int idx = (iy - jy + 1) * 5 + (ix - jx + 2);
                logits[j] = p.bias_table[idx * 2 + h];
            }
            double mx = *std::max_element(logits.begin(), logits.end());
            double z = 0;
            for (double& l : logits) z += std::exp(l - mx);
            for (int j = 0; j < T; ++j) {
                double ref = std::exp(logits[j] - mx) / z;
                // bias is identical across windows; check window 0 and 1
                CHECK(attn[((0 * 2 + h) * T + i) * T + j] == doctest::Approx(ref).epsilon(1e-9));
                CHECK(attn[((1 * 2 + h) * T + i) * T + j] == doctest::Approx(ref).epsilon(1e-9));
            }
        }
}

TEST_CASE("shift mask blocks cross-region attention") {
    const int H = 12, W = 30;
    WindowSpec w{6, 15, 3, 7};
    Rng rng(213);
    StlParams<double> p = make_stl_params<double>(8, 2, 2, w, 0.0, rng);

    D x = D::uniform({8, H, W}, rng, -1, 1);
    D tokens = window_partition(x, w);
    D mask = build_shift_mask<double>(H, W, w);
    D attn;
    wmsa(tokens, p, w, &mask, &attn);

    // independent region oracle: a token is "wrapped" on an axis when its
    // original coordinate fell inside the shifted-in strip
    const int nW = 2 * 2, T = 90;
    auto orig = [&](int win, int tok, int& oy, int& ox) {
        int wy = win / 2, wx = win % 2, iy = tok / 15, ix = tok % 15;
        oy = (wy * 6 + iy + 3) % H;
        ox = (wx * 15 + ix + 7) % W;
    };
    int blocked = 0;
    for (int win = 0; win < nW; ++win)
        for (int i = 0; i < T; ++i)
            for (int j = 0; j < T; ++j) {
                int iy, ix, jy, jx;
                orig(win, i, iy, ix);
                orig(win, j, jy, jx);
                bool same_region = ((iy < 3) == (jy < 3)) && ((ix < 7) == (jx < 7));
                if (!same_region) {
                    ++blocked;
                    for (int h = 0; h < 2; ++h) CHECK(attn[((win * 2 + h) * T + i) * T + j] < 1e-8);
                }
            }
    CHECK(blocked > 0);

    // rows must still normalize over the allowed set
    for (std::int64_t r = 0; r < std::int64_t(nW) * 2 * T; ++r) {
        double s = 0;
        for (int j = 0; j < T; ++j) s += attn[r * T + j];
        CHECK(std::fabs(s - 1.0) < 1e-6);
    }
}

TEST_CASE("token permutation equivariance with zero position bias") {
    WindowSpec w{2, 3, 0, 0};
    Rng rng(217);
    StlParams<double> p = make_stl_params<double>(6, 3, 2, w, 0.0, rng);
    zero_fill(p.bias_table);

    const int T = 6, C = 6;
    D tokens = D::uniform({2, T, C}, rng, -1, 1);
    D base = wmsa(tokens, p, w);

    std::vector<int> perm{3, 0, 5, 1, 4, 2};
    D permuted = D::zeros({2, T, C});
    for (int n = 0; n < 2; ++n)
        for (int t = 0; t < T; ++t)
            for (int c = 0; c < C; ++c) permuted[(n * T + t) * C + c] = tokens[(n * T + perm[t]) * C + c];
    D out = wmsa(permuted, p, w);
    for (int n = 0; n < 2; ++n)
        for (int t = 0; t < T; ++t)
            for (int c = 0; c < C; ++c)
                CHECK(out[(n * T + t) * C + c] == doctest::Approx(base[(n * T + perm[t]) * C + c]).epsilon(1e-6));
}

TEST_CASE("stl_forward: full stochastic depth is the identity") {
    WindowSpec w{3, 5, 1, 2};
    Rng rng(219);
    StlParams<double> p = make_stl_params<double>(8, 2, 2, w, 1.0, rng);
    D x = D::uniform({8, 6, 10}, rng, -1, 1);
    D y = stl_forward(x, p, w, true, rng);
    for (std::int64_t i = 0; i < x.numel(); ++i) CHECK(y[i] == x[i]);
}

TEST_CASE("stl_forward shape preservation incl. pad/crop path") {
    WindowSpec w{6, 15, 0, 0};
    Rng rng(223);
    StlParams<double> p = make_stl_params<double>(16, 4, 2, w, 0.0, rng);
    D x = D::uniform({16, 12, 30}, rng, -1, 1);
    CHECK(stl_forward(x, p, w, false, rng).shape() == Shape{16, 12, 30});

    // non-divisible dims go through reflect-pad and crop
    D odd = D::uniform({16, 13, 32}, rng, -1, 1);
    CHECK(stl_forward(odd, p, w, false, rng).shape() == Shape{16, 13, 32});
}

TEST_CASE("stl_forward grad check") {
    WindowSpec w{3, 5, 1, 2};
    Rng rng(227);
    StlParams<double> p = make_stl_params<double>(4, 2, 2, w, 0.0, rng);
    D x = D::uniform({4, 6, 10}, rng, -1, 1, true);
    D R = D::uniform({4, 6, 10}, rng, -1, 1);
    // mean keeps |loss| small: with the fixed 1e-8 denominator floor, finite-
    // difference rounding noise on structurally-zero gradients (the K bias —
    // softmax removes constant row shifts) must stay below 1e-12
    auto f = [&] {
        Rng fwd_rng(0);
        return mean_all(mul(stl_forward(x, p, w, false, fwd_rng), R));
    };
    std::vector<std::pair<std::string, D>> leaves{{"x", x}};
    std::vector<std::pair<std::string, Tensor<double>*>> named;
    collect_stl_params(p, named, "stl");
    for (auto& [name, t] : named) leaves.emplace_back(name, *t);
    auto rep = gradcheck<double>(f, leaves, 1e-5, 24);
    INFO(rep.worst);
    CHECK(rep.max_rel_err < 1e-4);
}

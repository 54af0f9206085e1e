#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <swinfsr/gradcheck.hpp>
#include <swinfsr/rcam.hpp>

using namespace swinfsr;
using D = Tensor<double>;

TEST_CASE("whiten: hand row, constants, idempotence, mean removal") {
    D row = D::from_data({1, 1, 3}, {1, 2, 3});
    D w = whiten(row);
    CHECK(w[0] == -1.0);
    CHECK(w[1] == 0.0);
    CHECK(w[2] == 1.0);

    D c = whiten(D::full({2, 3, 4}, 9.0));
    for (std::int64_t i = 0; i < c.numel(); ++i) CHECK(c[i] == 0.0);

    Rng rng(401);
    D x = D::uniform({3, 4, 7}, rng, -2, 2);
    D w1 = whiten(x);
    D w2 = whiten(w1);
    for (std::int64_t i = 0; i < x.numel(); ++i) CHECK(std::fabs(w2[i] - w1[i]) < 1e-7);
    for (int ch = 0; ch < 3; ++ch)
        for (int h = 0; h < 4; ++h) {
            double m = 0;
            for (int j = 0; j < 7; ++j) m += w1[(ch * 4 + h) * 7 + j];
            CHECK(std::fabs(m / 7.0) < 1e-6);
        }
}

TEST_CASE("cross_scores: one-hot rows, loop oracle, transpose symmetry") {
    // one-hot columns along W: S(h,i,j) = [i == j]
    const int C = 3, H = 2, W = 3;
    D oh = D::zeros({C, H, W});
    for (int h = 0; h < H; ++h)
        for (int j = 0; j < W; ++j) oh[(std::min(j, C - 1) * H + h) * W + j] = 1.0;
    // make them orthonormal per row: channel j has 1 at column j (C == W here)
    D S = cross_scores(oh, oh);
    for (int h = 0; h < H; ++h)
        for (int i = 0; i < W; ++i)
            for (int j = 0; j < W; ++j) CHECK(S[(h * W + i) * W + j] == (i == j ? 1.0 : 0.0));

    // H=2, W=3, C=1 hand case against a triple loop
    Rng rng(403);
    D q = D::uniform({1, 2, 3}, rng, -1, 1);
    D k = D::uniform({1, 2, 3}, rng, -1, 1);
    D s2 = cross_scores(q, k);
    for (int h = 0; h < 2; ++h)
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) CHECK(s2[(h * 3 + i) * 3 + j] == q[h * 3 + i] * k[h * 3 + j]);

    // multi-channel triple-loop oracle + per-row transpose symmetry
    D qc = D::uniform({4, 3, 5}, rng, -1, 1);
    D kc = D::uniform({4, 3, 5}, rng, -1, 1);
    D sf = cross_scores(qc, kc);
    D sb = cross_scores(kc, qc);
    for (int h = 0; h < 3; ++h)
        for (int i = 0; i < 5; ++i)
            for (int j = 0; j < 5; ++j) {
                double ref = 0;
                for (int ch = 0; ch < 4; ++ch) ref += qc[(ch * 3 + h) * 5 + i] * kc[(ch * 3 + h) * 5 + j];
                CHECK(sf[(h * 5 + i) * 5 + j] == doctest::Approx(ref).epsilon(1e-14));
                CHECK(sf[(h * 5 + i) * 5 + j] == sb[(h * 5 + j) * 5 + i]);
            }

    CHECK_THROWS_AS(cross_scores(qc, D::zeros({4, 3, 6})), ShapeError);
}

TEST_CASE("bidirectional_attention: uniform, near-one-hot, row-stochastic") {
    Rng rng(407);
    const int C = 3, H = 2, W = 4;
    D vL = D::uniform({C, H, W}, rng, -1, 1);
    D vR = D::uniform({C, H, W}, rng, -1, 1);

    auto [uL, uR] = bidirectional_attention(D::zeros({H, W, W}), vL, vR, C);
    for (int c = 0; c < C; ++c)
        for (int h = 0; h < H; ++h) {
            double mR = 0, mL = 0;
            for (int j = 0; j < W; ++j) {
                mR += vR[(c * H + h) * W + j];
                mL += vL[(c * H + h) * W + j];
            }
            mR /= W;
            mL /= W;
            for (int i = 0; i < W; ++i) {
                CHECK(uL[(c * H + h) * W + i] == doctest::Approx(mR).epsilon(1e-12));
                CHECK(uR[(c * H + h) * W + i] == doctest::Approx(mL).epsilon(1e-12));
            }
        }

    // dominant diagonal: logits +-50 after the 1/sqrt(C) scale
    D diag = D::zeros({H, W, W});
    for (int h = 0; h < H; ++h)
        for (int i = 0; i < W; ++i)
            for (int j = 0; j < W; ++j) diag[(h * W + i) * W + j] = (i == j ? 50.0 : -50.0) * std::sqrt(double(C));
    D ar2l, al2r;
    auto [dL, dR] = bidirectional_attention(diag, vL, vR, C, &ar2l, &al2r);
    for (std::int64_t i = 0; i < vR.numel(); ++i) {
        CHECK(std::fabs(dL[i] - vR[i]) < 1e-4);
        CHECK(std::fabs(dR[i] - vL[i]) < 1e-4);
    }
    for (const D& a : {ar2l, al2r})
        for (int r = 0; r < H * W; ++r) {
            double s = 0;
            for (int j = 0; j < W; ++j) s += a[r * W + j];
            CHECK(std::fabs(s - 1.0) < 1e-6);
        }
}

TEST_CASE("rcam_forward: identity at init, bit-exact") {
    Rng rng(409);
    RcamParams<double> p = make_rcam_params<double>(4, rng);
    for (std::int64_t i = 0; i < 4; ++i) {
        CHECK(p.gamma_l[i] == 0.0);
        CHECK(p.gamma_r[i] == 0.0);
    }
    D FL = D::uniform({4, 6, 8}, rng, -1, 1);
    D FR = D::uniform({4, 6, 8}, rng, -1, 1);
    auto [oL, oR] = rcam_forward(FL, FR, p, false, rng);
    for (std::int64_t i = 0; i < FL.numel(); ++i) {
        CHECK(oL[i] == FL[i]);
        CHECK(oR[i] == FR[i]);
    }
    CHECK_THROWS_AS(rcam_forward(FL, D::zeros({4, 6, 9}), p, false, rng), ShapeError);
}

TEST_CASE("rcam_forward: view swap symmetry with shared weights") {
    Rng rng(419);
    RcamParams<double> p = make_rcam_params<double>(4, rng);
    // same fusion scale for both directions so the swap is exact
    for (std::int64_t i = 0; i < 4; ++i) {
        double g = rng.uniform() - 0.5;
        p.gamma_l[i] = g;
        p.gamma_r[i] = g;
    }
    D FL = D::uniform({4, 5, 7}, rng, -1, 1);
    D FR = D::uniform({4, 5, 7}, rng, -1, 1);
    auto [oL, oR] = rcam_forward(FL, FR, p, false, rng);
    auto [sR, sL] = rcam_forward(FR, FL, p, false, rng);
    for (std::int64_t i = 0; i < FL.numel(); ++i) {
        CHECK(oL[i] == sL[i]);
        CHECK(oR[i] == sR[i]);
    }
}

TEST_CASE("rcam_forward grad check incl. gamma") {
    Rng rng(421);
    RcamParams<double> p = make_rcam_params<double>(4, rng);
    // nonzero gamma, otherwise every upstream parameter has an exactly zero gradient
    for (std::int64_t i = 0; i < 4; ++i) {
        p.gamma_l[i] = 0.3 + 0.1 * double(i);
        p.gamma_r[i] = -0.2 + 0.1 * double(i);
    }
    D FL = D::uniform({4, 3, 5}, rng, -1, 1, true);
    D FR = D::uniform({4, 3, 5}, rng, -1, 1, true);
    D RL = D::uniform({4, 3, 5}, rng, -1, 1);
    D RR = D::uniform({4, 3, 5}, rng, -1, 1);
    auto f = [&] {
        Rng fwd(0);
        auto [oL, oR] = rcam_forward(FL, FR, p, false, fwd);
        return mul_scalar(add(mean_all(mul(oL, RL)), mean_all(mul(oR, RR))), 0.02);
    };
    std::vector<std::pair<std::string, D>> leaves{{"FL", FL}, {"FR", FR}};
    std::vector<std::pair<std::string, Tensor<double>*>> named;
    collect_rcam_params(p, named, "rcam");
    for (auto& [name, t] : named) leaves.emplace_back(name, *t);
    auto rep = gradcheck<double>(f, leaves, 1e-6);
    INFO(rep.worst);
    CHECK(rep.max_rel_err < 1e-4);
}

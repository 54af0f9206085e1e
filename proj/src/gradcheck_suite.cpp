#include "swinfsr/gradcheck_suite.hpp"

#include <cstdio>
#include <functional>
#include <iomanip>

#include "swinfsr/gradcheck.hpp"
#include "swinfsr/model.hpp"
#include "swinfsr/training.hpp"

namespace swinfsr {
namespace {

using D = double;
constexpr double kTol = 1e-4;

// Small random-weighted mean keeps |loss| ~ 1e-3 so central-difference
// rounding noise stays below the 1e-8 relative-error denominator floor
// even for parameters whose true gradient is structurally zero.
Tensor<D> probe_loss(const Tensor<D>& out, const Tensor<D>& R) { return mul_scalar(mean_all(mul(out, R)), D(0.02)); }

struct Case {
    std::string name;
    std::string scope;  // module slug
    std::function<GradCheckReport()> run;
};

std::vector<std::pair<std::string, Tensor<D>>> conv_leaves(ConvParams<D>& c, const std::string& prefix) {
    return {{prefix + ".w", c.weight}, {prefix + ".b", c.bias}};
}

void append(std::vector<std::pair<std::string, Tensor<D>>>& to, std::vector<std::pair<std::string, Tensor<D>*>> named) {
    for (auto& [n, t] : named) to.emplace_back(n, *t);
}

std::vector<Case> build_cases(bool inject_fault) {
    std::vector<Case> cases;

    cases.push_back({"conv2d-3x3", "tensor-autodiff", [] {
                         Rng rng(11);
                         ConvParams<D> c = detail::make_conv<D>(4, 3, 3, rng);
                         Tensor<D> x = Tensor<D>::uniform({3, 6, 7}, rng, -1, 1, true);
                         Tensor<D> R = Tensor<D>::uniform({4, 6, 7}, rng, -1, 1);
                         auto fwd = [&] { return probe_loss(conv2d(x, c), R); };
                         auto leaves = conv_leaves(c, "conv");
                         leaves.emplace_back("x", x);
                         return gradcheck<D>(fwd, leaves);
                     }});

    cases.push_back({"conv2d-1x1", "tensor-autodiff", [] {
                         Rng rng(12);
                         ConvParams<D> c = detail::make_conv<D>(5, 4, 1, rng);
                         Tensor<D> x = Tensor<D>::uniform({4, 5, 6}, rng, -1, 1, true);
                         Tensor<D> R = Tensor<D>::uniform({5, 5, 6}, rng, -1, 1);
                         auto fwd = [&] { return probe_loss(conv2d(x, c), R); };
                         auto leaves = conv_leaves(c, "conv");
                         leaves.emplace_back("x", x);
                         return gradcheck<D>(fwd, leaves);
                     }});

    cases.push_back({"matmul", "tensor-autodiff", [] {
                         Rng rng(13);
                         Tensor<D> a = Tensor<D>::uniform({7, 5}, rng, -1, 1, true);
                         Tensor<D> b = Tensor<D>::uniform({5, 6}, rng, -1, 1, true);
                         Tensor<D> R = Tensor<D>::uniform({7, 6}, rng, -1, 1);
                         auto fwd = [&] { return probe_loss(matmul(a, b), R); };
                         return gradcheck<D>(fwd, {{"a", a}, {"b", b}});
                     }});

    cases.push_back({"linear", "tensor-autodiff", [] {
                         Rng rng(14);
                         Tensor<D> x = Tensor<D>::uniform({2, 9, 5}, rng, -1, 1, true);
                         Tensor<D> w = Tensor<D>::uniform({4, 5}, rng, -0.5, 0.5, true);
                         Tensor<D> b = Tensor<D>::uniform({4}, rng, -0.5, 0.5, true);
                         Tensor<D> R = Tensor<D>::uniform({2, 9, 4}, rng, -1, 1);
                         auto fwd = [&] { return probe_loss(linear(x, w, b), R); };
                         return gradcheck<D>(fwd, {{"x", x}, {"w", w}, {"b", b}});
                     }});

    cases.push_back({"layer-norm", "tensor-autodiff", [] {
                         Rng rng(15);
                         Tensor<D> x = Tensor<D>::uniform({3, 11, 6}, rng, -2, 2, true);
                         Tensor<D> g = Tensor<D>::uniform({6}, rng, 0.5, 1.5, true);
                         Tensor<D> b = Tensor<D>::uniform({6}, rng, -0.5, 0.5, true);
                         Tensor<D> R = Tensor<D>::uniform({3, 11, 6}, rng, -1, 1);
                         auto fwd = [&] { return probe_loss(layer_norm(x, g, b), R); };
                         return gradcheck<D>(fwd, {{"x", x}, {"g", g}, {"b", b}});
                     }});

    cases.push_back({"softmax", "tensor-autodiff", [] {
                         Rng rng(16);
                         Tensor<D> x = Tensor<D>::uniform({2, 5, 6}, rng, -3, 3, true);
                         Tensor<D> R = Tensor<D>::uniform({2, 5, 6}, rng, -1, 1);
                         auto fwd = [&] { return probe_loss(softmax(x, 2), R); };
                         return gradcheck<D>(fwd, {{"x", x}});
                     }});

    cases.push_back({"gelu", "tensor-autodiff", [] {
                         Rng rng(17);
                         Tensor<D> x = Tensor<D>::uniform({3, 4, 5}, rng, -2, 2, true);
                         Tensor<D> R = Tensor<D>::uniform({3, 4, 5}, rng, -1, 1);
                         auto fwd = [&] { return probe_loss(gelu(x), R); };
                         return gradcheck<D>(fwd, {{"x", x}});
                     }});

    // Kinked activations: h = 1e-6 keeps the odds of a central difference
    // straddling x = 0 (where the error is O(1), not O(h^2)) negligible.
    cases.push_back({"relu", "tensor-autodiff", [] {
                         Rng rng(18);
                         Tensor<D> x = Tensor<D>::uniform({60}, rng, -1, 1, true);
                         Tensor<D> R = Tensor<D>::uniform({60}, rng, -1, 1);
                         auto fwd = [&] { return probe_loss(relu(x), R); };
                         return gradcheck<D>(fwd, {{"x", x}}, 1e-6);
                     }});

    cases.push_back({"leaky-relu", "tensor-autodiff", [] {
                         Rng rng(19);
                         Tensor<D> x = Tensor<D>::uniform({60}, rng, -1, 1, true);
                         Tensor<D> R = Tensor<D>::uniform({60}, rng, -1, 1);
                         auto fwd = [&] { return probe_loss(leaky_relu(x), R); };
                         return gradcheck<D>(fwd, {{"x", x}}, 1e-6);
                     }});

    cases.push_back({"bilinear-resize", "tensor-autodiff", [] {
                         Rng rng(20);
                         Tensor<D> x = Tensor<D>::uniform({3, 5, 7}, rng, -1, 1, true);
                         Tensor<D> R = Tensor<D>::uniform({3, 20, 28}, rng, -1, 1);
                         auto fwd = [&] { return probe_loss(bilinear_resize(x, 4), R); };
                         return gradcheck<D>(fwd, {{"x", x}});
                     }});

    cases.push_back({"pixel-shuffle", "tensor-autodiff", [] {
                         Rng rng(21);
                         Tensor<D> x = Tensor<D>::uniform({8, 3, 4}, rng, -1, 1, true);
                         Tensor<D> R = Tensor<D>::uniform({2, 6, 8}, rng, -1, 1);
                         auto fwd = [&] { return probe_loss(pixel_shuffle(x, 2), R); };
                         return gradcheck<D>(fwd, {{"x", x}});
                     }});

    if (inject_fault) {
        // Self-test of the harness: the forward value is exact (the extra
        // term cancels bit-for-bit) but the same conv contributes twice to
        // the graph, so reverse mode reports 1.5x the true gradient.
        cases.push_back({"conv2d (corrupted backward)", "tensor-autodiff", [] {
                             Rng rng(22);
                             ConvParams<D> c = detail::make_conv<D>(3, 3, 3, rng);
                             Tensor<D> x = Tensor<D>::uniform({3, 5, 6}, rng, -1, 1, true);
                             Tensor<D> R = Tensor<D>::uniform({3, 5, 6}, rng, -1, 1);
                             auto fwd = [&] {
                                 Tensor<D> y = conv2d(x, c);
                                 Tensor<D> frozen;
                                 {
                                     NoGradGuard ng;
                                     frozen = conv2d(x, c);
                                 }
                                 Tensor<D> bad = add(y, mul_scalar(sub(y, frozen), D(0.5)));
                                 return probe_loss(bad, R);
                             };
                             auto leaves = conv_leaves(c, "conv");
                             leaves.emplace_back("x", x);
                             return gradcheck<D>(fwd, leaves);
                         }});
    }

    cases.push_back({"rfft2", "spectral", [] {
                         Rng rng(31);
                         Tensor<D> x = Tensor<D>::uniform({2, 6, 9}, rng, -1, 1, true);
                         Tensor<D> R = Tensor<D>::uniform({4, 6, 5}, rng, -1, 1);
                         auto fwd = [&] { return probe_loss(rfft2(x), R); };
                         return gradcheck<D>(fwd, {{"x", x}});
                     }});

    cases.push_back({"irfft2", "spectral", [] {
                         Rng rng(32);
                         Tensor<D> s = Tensor<D>::uniform({4, 6, 5}, rng, -1, 1, true);
                         Tensor<D> R = Tensor<D>::uniform({2, 6, 9}, rng, -1, 1);
                         auto fwd = [&] { return probe_loss(irfft2(s, 9), R); };
                         return gradcheck<D>(fwd, {{"s", s}});
                     }});

    cases.push_back({"spectrum-transform", "spectral", [] {
                         Rng rng(33);
                         SpectrumParams<D> p = make_spectrum_params<D>(3, rng);
                         Tensor<D> x = Tensor<D>::uniform({3, 6, 9}, rng, -1, 1, true);
                         Tensor<D> R = Tensor<D>::uniform({3, 6, 9}, rng, -1, 1);
                         auto fwd = [&] { return probe_loss(spectrum_transform(x, p), R); };
                         std::vector<std::pair<std::string, Tensor<D>>> leaves = {{"x", x}};
                         for (auto& [pref, cp] : {std::pair<const char*, ConvParams<D>*>{"c_in", &p.c_in},
                                                  {"c_freq", &p.c_freq},
                                                  {"c_out", &p.c_out}})
                             for (auto& kv : conv_leaves(*cp, pref)) leaves.push_back(kv);
                         return gradcheck<D>(fwd, leaves, 1e-6);
                     }});

    cases.push_back({"wmsa", "swin-stl", [] {
                         Rng rng(41);
                         WindowSpec w{3, 4, 0, 0};
                         StlParams<D> p = make_stl_params<D>(6, 2, 2, w, 0.0, rng);
                         Tensor<D> t = Tensor<D>::uniform({2, 12, 6}, rng, -1, 1, true);
                         Tensor<D> R = Tensor<D>::uniform({2, 12, 6}, rng, -1, 1);
                         auto fwd = [&] { return probe_loss(wmsa(t, p, w), R); };
                         std::vector<std::pair<std::string, Tensor<D>>> leaves = {{"t", t},
                                                                                  {"qkv_w", p.qkv_w},
                                                                                  {"qkv_b", p.qkv_b},
                                                                                  {"proj_w", p.proj_w},
                                                                                  {"proj_b", p.proj_b},
                                                                                  {"bias_table", p.bias_table}};
                         return gradcheck<D>(fwd, leaves);
                     }});

    cases.push_back({"stl-shifted", "swin-stl", [] {
                         Rng rng(42);
                         WindowSpec w{3, 4, 1, 2};
                         StlParams<D> p = make_stl_params<D>(4, 2, 2, w, 0.0, rng);
                         Tensor<D> x = Tensor<D>::uniform({4, 9, 12}, rng, -1, 1, true);
                         Tensor<D> R = Tensor<D>::uniform({4, 9, 12}, rng, -1, 1);
                         Rng dummy(0);
                         auto fwd = [&] { return probe_loss(stl_forward(x, p, w, false, dummy), R); };
                         std::vector<std::pair<std::string, Tensor<D>>> leaves = {{"x", x}};
                         append(leaves, [&] {
                             std::vector<std::pair<std::string, Tensor<D>*>> n;
                             collect_stl_params(p, n, "stl");
                             return n;
                         }());
                         return gradcheck<D>(fwd, leaves, 1e-5, 24);
                     }});

    cases.push_back({"stl-padded", "swin-stl", [] {
                         Rng rng(43);
                         WindowSpec w{3, 4, 0, 0};
                         StlParams<D> p = make_stl_params<D>(4, 2, 2, w, 0.0, rng);
                         Tensor<D> x = Tensor<D>::uniform({4, 7, 9}, rng, -1, 1, true);
                         Tensor<D> R = Tensor<D>::uniform({4, 7, 9}, rng, -1, 1);
                         Rng dummy(0);
                         auto fwd = [&] { return probe_loss(stl_forward(x, p, w, false, dummy), R); };
                         std::vector<std::pair<std::string, Tensor<D>>> leaves = {{"x", x}};
                         append(leaves, [&] {
                             std::vector<std::pair<std::string, Tensor<D>*>> n;
                             collect_stl_params(p, n, "stl");
                             return n;
                         }());
                         return gradcheck<D>(fwd, leaves, 1e-5, 24);
                     }});

    cases.push_back({"ffb", "ffb-rsftb", [] {
                         Rng rng(51);
                         FfbParams<D> p = make_ffb_params<D>(4, rng);
                         Tensor<D> x = Tensor<D>::uniform({4, 6, 9}, rng, -1, 1, true);
                         Tensor<D> R = Tensor<D>::uniform({4, 6, 9}, rng, -1, 1);
                         auto fwd = [&] { return probe_loss(ffb_forward(x, p), R); };
                         std::vector<std::pair<std::string, Tensor<D>>> leaves = {{"x", x}};
                         append(leaves, [&] {
                             std::vector<std::pair<std::string, Tensor<D>*>> n;
                             collect_ffb_params(p, n, "ffb");
                             return n;
                         }());
                         return gradcheck<D>(fwd, leaves, 1e-6, 24);
                     }});

    cases.push_back({"rsftb", "ffb-rsftb", [] {
                         Rng rng(52);
                         RsftbParams<D> p = make_rsftb_params<D>(4, 2, 2, 2, WindowSpec{3, 5, 0, 0}, 0.0, rng);
                         Tensor<D> x = Tensor<D>::uniform({4, 6, 10}, rng, -1, 1, true);
                         Tensor<D> R = Tensor<D>::uniform({4, 6, 10}, rng, -1, 1);
                         Rng dummy(0);
                         auto fwd = [&] { return probe_loss(rsftb_forward(x, p, false, dummy), R); };
                         std::vector<std::pair<std::string, Tensor<D>>> leaves = {{"x", x}};
                         append(leaves, [&] {
                             std::vector<std::pair<std::string, Tensor<D>*>> n;
                             collect_rsftb_params(p, n, "rsftb");
                             return n;
                         }());
                         return gradcheck<D>(fwd, leaves, 1e-6, 12);
                     }});

    cases.push_back({"rcam", "rcam", [] {
                         Rng rng(61);
                         RcamParams<D> p = make_rcam_params<D>(4, rng);
                         // gamma = 0 would zero every upstream gradient; give it
                         // real values so the cross path is exercised.
                         for (std::int64_t i = 0; i < 4; ++i) {
                             p.gamma_l[i] = rng.uniform(-0.5, 0.5);
                             p.gamma_r[i] = rng.uniform(-0.5, 0.5);
                         }
                         Tensor<D> fl = Tensor<D>::uniform({4, 5, 6}, rng, -1, 1, true);
                         Tensor<D> fr = Tensor<D>::uniform({4, 5, 6}, rng, -1, 1, true);
                         Tensor<D> Rl = Tensor<D>::uniform({4, 5, 6}, rng, -1, 1);
                         Tensor<D> Rr = Tensor<D>::uniform({4, 5, 6}, rng, -1, 1);
                         Rng dummy(0);
                         auto fwd = [&] {
                             auto [ol, orr] = rcam_forward(fl, fr, p, false, dummy);
                             return mul_scalar(add(mean_all(mul(ol, Rl)), mean_all(mul(orr, Rr))), D(0.02));
                         };
                         std::vector<std::pair<std::string, Tensor<D>>> leaves = {{"fl", fl}, {"fr", fr}};
                         append(leaves, [&] {
                             std::vector<std::pair<std::string, Tensor<D>*>> n;
                             collect_rcam_params(p, n, "rcam");
                             return n;
                         }());
                         return gradcheck<D>(fwd, leaves, 1e-6, 16);
                     }});

    cases.push_back({"model-micro", "model", [] {
                         SwinFsrConfig cfg;
                         cfg.n_rsftb = 1;
                         cfg.stl_per_block = 1;
                         cfg.embed_dim = 8;
                         cfg.num_heads = 2;
                         cfg.dropout_rate = 0.0;
                         cfg.drop_path_rate = 0.0;
                         Rng rng(71);
                         Model<D> m = build<D>(cfg, rng);
                         for (auto& [name, t] : m.named_params())
                             if (name.find("gamma") != std::string::npos)
                                 for (std::int64_t i = 0; i < t->numel(); ++i) (*t)[i] = rng.uniform(-0.3, 0.3);
                         Tensor<D> il = Tensor<D>::uniform({3, 6, 15}, rng, 0, 1, true);
                         Tensor<D> ir = Tensor<D>::uniform({3, 6, 15}, rng, 0, 1, true);
                         Tensor<D> Rl = Tensor<D>::uniform({3, 24, 60}, rng, -1, 1);
                         Tensor<D> Rr = Tensor<D>::uniform({3, 24, 60}, rng, -1, 1);
                         Rng dummy(0);
                         auto fwd = [&] {
                             auto [sl, sr] = forward(m, il, ir, false, dummy);
                             return mul_scalar(add(mean_all(mul(sl, Rl)), mean_all(mul(sr, Rr))), D(0.02));
                         };
                         std::vector<std::pair<std::string, Tensor<D>>> leaves = {{"in_l", il}, {"in_r", ir}};
                         append(leaves, m.named_params());
                         return gradcheck<D>(fwd, leaves, 1e-6, 6);
                     }});

    cases.push_back({"l1-loss", "training", [] {
                         Rng rng(81);
                         Tensor<D> sl = Tensor<D>::uniform({3, 5, 6}, rng, 0, 1, true);
                         Tensor<D> sr = Tensor<D>::uniform({3, 5, 6}, rng, 0, 1, true);
                         Tensor<D> hl = Tensor<D>::uniform({3, 5, 6}, rng, 0, 1);
                         Tensor<D> hr = Tensor<D>::uniform({3, 5, 6}, rng, 0, 1);
                         auto fwd = [&] { return l1_loss(sl, sr, hl, hr); };
                         return gradcheck<D>(fwd, {{"sl", sl}, {"sr", sr}}, 1e-6);
                     }});

    cases.push_back({"perceptual-loss", "training", [] {
                         Rng rng(82);
                         FeatureNet<D> net = FeatureNet<D>::seeded(99);
                         Tensor<D> sr = Tensor<D>::uniform({3, 8, 8}, rng, 0, 1, true);
                         Tensor<D> hr = Tensor<D>::uniform({3, 8, 8}, rng, 0, 1);
                         auto fwd = [&] { return perceptual_loss(sr, hr, net); };
                         return gradcheck<D>(fwd, {{"sr", sr}}, 1e-6);
                     }});

    return cases;
}

bool scope_matches(const std::string& scope, const std::string& case_scope) {
    if (scope == "all" || scope == case_scope) return true;
    // short aliases for the hyphenated module names
    if (scope == "tensor" && case_scope == "tensor-autodiff") return true;
    if (scope == "swin" && case_scope == "swin-stl") return true;
    if (scope == "ffb" && case_scope == "ffb-rsftb") return true;
    return false;
}

}  // namespace

bool run_gradcheck_suite(const std::string& scope, bool inject_fault, std::ostream& os,
                         std::vector<GradCaseResult>* results) {
    static const std::vector<std::string> known = {"all",       "tensor-autodiff", "tensor", "spectral", "swin-stl",
                                                   "swin",      "ffb-rsftb",       "ffb",    "rcam",     "model",
                                                   "training"};
    bool ok_scope = false;
    for (const auto& k : known) ok_scope |= (scope == k);
    if (!ok_scope) throw ShapeError("gradcheck: unknown scope '" + scope + "'");

    auto cases = build_cases(inject_fault);
    bool all_pass = true;
    int ran = 0, passed = 0;
    os << "gradcheck scope=" << scope << " tol=" << kTol << "\n";
    for (auto& c : cases) {
        if (!scope_matches(scope, c.scope)) continue;
        ++ran;
        GradCheckReport rep = c.run();
        const bool pass = rep.pass(kTol);
        all_pass &= pass;
        passed += pass ? 1 : 0;
        char buf[160];
        std::snprintf(buf, sizeof(buf), "  %-28s max rel err %.3e  (%lld checks)  %s", c.name.c_str(), rep.max_rel_err,
                      static_cast<long long>(rep.checked), pass ? "PASS" : "FAIL");
        os << buf << "\n";
        if (!pass) os << "    worst: " << rep.worst << "\n";
        if (results) results->push_back({c.name, rep.max_rel_err, pass});
    }
    if (ran == 0) {
        os << "gradcheck: no cases in scope '" << scope << "'\n";
        return false;
    }
    os << "gradcheck: " << passed << "/" << ran << " cases passed\n";
    return all_pass;
}

}  // namespace swinfsr

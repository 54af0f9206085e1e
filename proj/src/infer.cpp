#include "swinfsr/infer.hpp"

#include <algorithm>
#include <filesystem>

#include "swinfsr/png_io.hpp"

namespace fs = std::filesystem;

namespace swinfsr {

namespace {

constexpr std::int64_t kTileOverlapLr = 8;

std::int64_t round_up(std::int64_t v, std::int64_t m) { return ((v + m - 1) / m) * m; }

// linear seam ramp: weight (d+1)/(ov+1) at distance d from an interior
// tile edge; complementary ramps from the two overlapping tiles sum to 1
double edge_ramp(std::int64_t d, std::int64_t ov, bool has_neighbor) {
    if (!has_neighbor || d >= ov) return 1.0;
    return double(d + 1) / double(ov + 1);
}

std::pair<Tensor<float>, Tensor<float>> infer_tiled(Model<float>& m, const Tensor<float>& left,
                                                    const Tensor<float>& right, std::int64_t tile_lr) {
    const std::int64_t H = left.size(1), W = left.size(2);
    const std::int64_t wh = m.cfg.window.wh, ww = m.cfg.window.ww;
    const std::int64_t th = std::min(H, round_up(std::max(tile_lr, 2 * kTileOverlapLr), wh));
    const std::int64_t tw = std::min(W, round_up(std::max(tile_lr, 2 * kTileOverlapLr), ww));
    const std::int64_t r = m.cfg.scale;

    Tensor<float> acc_l = Tensor<float>::zeros({3, r * H, r * W});
    Tensor<float> acc_r = Tensor<float>::zeros({3, r * H, r * W});
    std::vector<double> wsum(static_cast<std::size_t>(r * H * r * W), 0.0);

    std::vector<std::int64_t> ys{0}, xs{0};
    while (ys.back() + th < H) ys.push_back(std::min(ys.back() + th - kTileOverlapLr, H - th));
    while (xs.back() + tw < W) xs.push_back(std::min(xs.back() + tw - kTileOverlapLr, W - tw));
    ys.erase(std::unique(ys.begin(), ys.end()), ys.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());

    Rng rng(0);
    for (std::int64_t y0 : ys)
        for (std::int64_t x0 : xs) {
            Tensor<float> tl = crop2d(left, y0, H - y0 - th, x0, W - x0 - tw);
            Tensor<float> tr = crop2d(right, y0, H - y0 - th, x0, W - x0 - tw);
            auto [sl, sr] = forward(m, tl, tr, false, rng);

            const std::int64_t hy0 = r * y0, hx0 = r * x0;
            const std::int64_t hth = r * th, htw = r * tw;
            const std::int64_t ov = r * kTileOverlapLr;
            const bool top = y0 > 0, bottom = y0 + th < H, lef = x0 > 0, rig = x0 + tw < W;
            for (std::int64_t y = 0; y < hth; ++y) {
                const double wy = edge_ramp(y, ov, top) * edge_ramp(hth - 1 - y, ov, bottom);
                for (std::int64_t x = 0; x < htw; ++x) {
                    const double w = wy * edge_ramp(x, ov, lef) * edge_ramp(htw - 1 - x, ov, rig);
                    const std::int64_t dst = (hy0 + y) * (r * W) + hx0 + x;
                    wsum[static_cast<std::size_t>(dst)] += w;
                    for (int c = 0; c < 3; ++c) {
                        acc_l[c * r * H * r * W + dst] += float(w) * sl[(c * hth + y) * htw + x];
                        acc_r[c * r * H * r * W + dst] += float(w) * sr[(c * hth + y) * htw + x];
                    }
                }
            }
        }

    for (std::int64_t i = 0; i < r * H * r * W; ++i) {
        const float inv = float(1.0 / wsum[static_cast<std::size_t>(i)]);
        for (int c = 0; c < 3; ++c) {
            acc_l[c * r * H * r * W + i] *= inv;
            acc_r[c * r * H * r * W + i] *= inv;
        }
    }
    return {acc_l, acc_r};
}

}  // namespace

std::pair<Tensor<float>, Tensor<float>> infer_pair(Model<float>& m, const Tensor<float>& left,
                                                   const Tensor<float>& right, std::int64_t tile_lr) {
    NoGradGuard ng;
    if (left.dim() != 3 || left.size(0) != 3 || left.shape() != right.shape())
        throw ShapeError("infer: inputs must be matching [3,H,W] images");
    if (tile_lr > 0 && (tile_lr < left.size(1) || tile_lr < left.size(2))) return infer_tiled(m, left, right, tile_lr);
    Rng rng(0);
    return forward(m, left, right, false, rng);
}

std::pair<Tensor<float>, Tensor<float>> tta_infer(const StereoRunner& run, const Tensor<float>& left,
                                                  const Tensor<float>& right, const TtaPlan& plan) {
    NoGradGuard ng;
    if (plan.variants.empty()) throw ShapeError("tta_infer: empty plan");
    bool has_identity = false;
    for (const auto& v : plan.variants) has_identity |= (!v.h && !v.v);
    if (!has_identity) throw ShapeError("tta_infer: plan must include the identity");

    Tensor<float> acc_l, acc_r;
    for (const auto& v : plan.variants) {
        Tensor<float> in_l = left, in_r = right;
        if (v.v) {
            in_l = vflip(in_l);
            in_r = vflip(in_r);
        }
        if (v.h) {
            // mirrored geometry: views swap
            Tensor<float> tmp = hflip(in_r);
            in_r = hflip(in_l);
            in_l = tmp;
        }
        auto [out_l, out_r] = run(in_l, in_r);
        if (v.h) {
            Tensor<float> tmp = hflip(out_r);
            out_r = hflip(out_l);
            out_l = tmp;
        }
        if (v.v) {
            out_l = vflip(out_l);
            out_r = vflip(out_r);
        }
        acc_l = acc_l.defined() ? add(acc_l, out_l) : out_l;
        acc_r = acc_r.defined() ? add(acc_r, out_r) : out_r;
    }
    const double inv = 1.0 / double(plan.variants.size());
    return {mul_scalar(acc_l, inv), mul_scalar(acc_r, inv)};
}

EvalSummary eval_dataset(Model<float>& m, const std::vector<StereoPair>& pairs, bool use_tta,
                         const std::string& report_path) {
    if (pairs.empty()) throw DataError("eval: empty dataset");
    NoGradGuard ng;
    EvalSummary summary;
    StereoRunner runner = [&m](const Tensor<float>& l, const Tensor<float>& r) { return infer_pair(m, l, r); };

    for (const auto& p : pairs) {
        if (!p.has_hr()) throw DataError("eval scene " + p.scene + " has no HR views");
        auto [sl, sr] = infer_pair(m, p.left, p.right);
        SceneScore row;
        row.scene = p.scene;
        row.psnr_l = psnr(sl, p.hr_left);
        row.psnr_r = psnr(sr, p.hr_right);
        row.ssim_l = ssim(sl, p.hr_left);
        row.ssim_r = ssim(sr, p.hr_right);
        summary.plain.push_back(row);

        if (use_tta) {
            auto [tl, tr] = tta_infer(runner, p.left, p.right, TtaPlan::full());
            SceneScore trow;
            trow.scene = p.scene;
            trow.psnr_l = psnr(tl, p.hr_left);
            trow.psnr_r = psnr(tr, p.hr_right);
            trow.ssim_l = ssim(tl, p.hr_left);
            trow.ssim_r = ssim(tr, p.hr_right);
            summary.tta.push_back(trow);
        }
    }

    std::tie(summary.plain_psnr, summary.plain_ssim) = stereo_score(summary.plain);
    write_metrics_csv(report_path, summary.plain);
    if (use_tta) {
        std::tie(summary.tta_psnr, summary.tta_ssim) = stereo_score(summary.tta);
        write_metrics_csv(report_path + ".tta.csv", summary.tta);
    }
    return summary;
}

void ensemble_dirs(const std::vector<std::string>& inputs, const std::string& out_dir) {
    if (inputs.size() < 2) throw DataError("ensemble: need at least two input sets");
    std::vector<std::string> names;
    for (const auto& e : fs::directory_iterator(inputs.front()))
        if (e.is_regular_file() && e.path().extension() == ".png") names.push_back(e.path().filename().string());
    std::sort(names.begin(), names.end());
    if (names.empty()) throw DataError("ensemble: no PNG files in " + inputs.front());

    fs::create_directories(out_dir);
    for (const std::string& name : names) {
        Tensor<float> acc;
        for (const std::string& dir : inputs) {
            const fs::path p = fs::path(dir) / name;
            if (!fs::exists(p)) throw DataError("ensemble: " + name + " missing from set " + dir);
            Tensor<float> img = png_read(p.string());
            if (acc.defined() && img.shape() != acc.shape())
                throw DataError("ensemble: size mismatch for " + name + " in set " + dir);
            acc = acc.defined() ? add(acc, img) : img;
        }
        png_write(mul_scalar(acc, 1.0 / double(inputs.size())), (fs::path(out_dir) / name).string());
    }
}

}  // namespace swinfsr

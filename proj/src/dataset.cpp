#include "swinfsr/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "swinfsr/png_io.hpp"

namespace fs = std::filesystem;

namespace swinfsr {

namespace {

// Catmull-Rom kernel, a = -0.5
double cubic_w(double t) {
    t = std::fabs(t);
    if (t <= 1.0) return (1.5 * t - 2.5) * t * t + 1.0;
    if (t < 2.0) return ((-0.5 * t + 2.5) * t - 4.0) * t + 2.0;
    return 0.0;
}

// Separable resample of the last axis of a [C,H,W] tensor by output width
// out_w, sampling source positions (o+0.5)*in_w/out_w - 0.5 with edge
// clamp.  Written in offset form (x0 + sum w_k (x_k - x0)) so constant
// inputs pass through exactly.
Tensor<float> resample_w(const Tensor<float>& in, std::int64_t out_w) {
    const std::int64_t C = in.size(0), H = in.size(1), W = in.size(2);
    const double step = double(W) / double(out_w);
    std::vector<std::int64_t> idx(static_cast<std::size_t>(out_w) * 4);
    std::vector<double> wgt(static_cast<std::size_t>(out_w) * 4);
    for (std::int64_t o = 0; o < out_w; ++o) {
        const double src = (double(o) + 0.5) * step - 0.5;
        const std::int64_t base = static_cast<std::int64_t>(std::floor(src));
        const double t = src - double(base);
        for (int k = -1; k <= 2; ++k) {
            std::int64_t j = base + k;
            j = std::clamp<std::int64_t>(j, 0, W - 1);
            idx[static_cast<std::size_t>(o * 4 + k + 1)] = j;
            wgt[static_cast<std::size_t>(o * 4 + k + 1)] = cubic_w(double(k) - t);
        }
    }
    Tensor<float> out = Tensor<float>::zeros({C, H, out_w});
    const float* src = in.data();
    float* dst = out.data();
    for (std::int64_t c = 0; c < C; ++c)
        for (std::int64_t y = 0; y < H; ++y) {
            const float* row = src + (c * H + y) * W;
            float* orow = dst + (c * H + y) * out_w;
            for (std::int64_t o = 0; o < out_w; ++o) {
                const std::int64_t* ji = &idx[static_cast<std::size_t>(o * 4)];
                const double* wi = &wgt[static_cast<std::size_t>(o * 4)];
                const double x0 = row[ji[0]];
                double acc = x0;
                for (int k = 0; k < 4; ++k) acc += wi[k] * (double(row[ji[k]]) - x0);
                orow[o] = static_cast<float>(acc);
            }
        }
    return out;
}

Tensor<float> transpose_hw(const Tensor<float>& in) {
    const std::int64_t C = in.size(0), H = in.size(1), W = in.size(2);
    Tensor<float> out = Tensor<float>::zeros({C, W, H});
    const float* s = in.data();
    float* d = out.data();
    for (std::int64_t c = 0; c < C; ++c)
        for (std::int64_t y = 0; y < H; ++y)
            for (std::int64_t x = 0; x < W; ++x) d[(c * W + x) * H + y] = s[(c * H + y) * W + x];
    return out;
}

Tensor<float> resample2(const Tensor<float>& in, std::int64_t out_h, std::int64_t out_w) {
    return transpose_hw(resample_w(transpose_hw(resample_w(in, out_w)), out_h));
}

Tensor<float> crop3(const Tensor<float>& t, std::int64_t y0, std::int64_t x0, std::int64_t h, std::int64_t w) {
    const std::int64_t C = t.size(0), H = t.size(1), W = t.size(2);
    if (y0 < 0 || x0 < 0 || y0 + h > H || x0 + w > W) throw ShapeError("crop outside image bounds");
    Tensor<float> out = Tensor<float>::zeros({C, h, w});
    const float* s = t.data();
    float* d = out.data();
    for (std::int64_t c = 0; c < C; ++c)
        for (std::int64_t y = 0; y < h; ++y)
            for (std::int64_t x = 0; x < w; ++x) d[(c * h + y) * w + x] = s[(c * H + y0 + y) * W + x0 + x];
    return out;
}

}  // namespace

std::vector<std::string> list_scenes(const std::string& root) {
    if (!fs::is_directory(root)) throw DataError("dataset root is not a directory: " + root);
    std::vector<std::string> scenes;
    for (const auto& e : fs::directory_iterator(root)) {
        if (!e.is_directory()) continue;
        const fs::path p = e.path();
        const bool hr = fs::exists(p / "hr0.png") && fs::exists(p / "hr1.png");
        const bool lr = fs::exists(p / "lr0.png") && fs::exists(p / "lr1.png");
        if (hr || lr) scenes.push_back(p.filename().string());
    }
    std::sort(scenes.begin(), scenes.end());
    return scenes;
}

StereoPair load_scene(const std::string& root, const std::string& scene) {
    const fs::path dir = fs::path(root) / scene;
    StereoPair pair;
    pair.scene = scene;
    const bool has_hr = fs::exists(dir / "hr0.png") && fs::exists(dir / "hr1.png");
    const bool has_lr = fs::exists(dir / "lr0.png") && fs::exists(dir / "lr1.png");
    if (!has_hr && !has_lr) throw DataError("scene has neither HR nor LR pair: " + dir.string());

    if (has_hr) {
        pair.hr_left = png_read((dir / "hr0.png").string());
        pair.hr_right = png_read((dir / "hr1.png").string());
        if (pair.hr_left.shape() != pair.hr_right.shape())
            throw DataError("HR views differ in size in scene " + scene);
    }
    if (has_lr) {
        pair.left = png_read((dir / "lr0.png").string());
        pair.right = png_read((dir / "lr1.png").string());
        if (pair.left.shape() != pair.right.shape()) throw DataError("LR views differ in size in scene " + scene);
    } else {
        pair.left = bicubic_downsample(pair.hr_left);
        pair.right = bicubic_downsample(pair.hr_right);
    }
    if (pair.has_hr()) {
        if (pair.hr_left.size(1) != 4 * pair.left.size(1) || pair.hr_left.size(2) != 4 * pair.left.size(2))
            throw DataError("HR dims are not 4x LR dims in scene " + scene);
    }
    return pair;
}

std::vector<StereoPair> load_dataset(const std::string& root) {
    std::vector<StereoPair> out;
    for (const std::string& s : list_scenes(root)) out.push_back(load_scene(root, s));
    return out;
}

Tensor<float> bicubic_downsample(const Tensor<float>& hr) {
    if (hr.dim() != 3) throw ShapeError("bicubic_downsample: input must be [C,H,W]");
    if (hr.size(1) % 4 != 0 || hr.size(2) % 4 != 0)
        throw ShapeError("bicubic_downsample: dims must be divisible by 4, got " + shape_str(hr.shape()));
    return resample2(hr, hr.size(1) / 4, hr.size(2) / 4);
}

Tensor<float> bicubic_upsample4(const Tensor<float>& lr) {
    if (lr.dim() != 3) throw ShapeError("bicubic_upsample4: input must be [C,H,W]");
    return resample2(lr, lr.size(1) * 4, lr.size(2) * 4);
}

StereoPair sample_patch(const StereoPair& pair, Rng& rng, std::int64_t ph, std::int64_t pw) {
    if (!pair.has_hr()) throw DataError("sample_patch: scene " + pair.scene + " has no HR views");
    const std::int64_t H = pair.left.size(1), W = pair.left.size(2);
    if (H < ph || W < pw)
        throw DataError("sample_patch: image " + std::to_string(W) + "x" + std::to_string(H) + " smaller than patch");
    const std::int64_t y0 = rng.uniform_int(H - ph + 1);
    const std::int64_t x0 = rng.uniform_int(W - pw + 1);
    StereoPair out;
    out.scene = pair.scene;
    out.left = crop3(pair.left, y0, x0, ph, pw);
    out.right = crop3(pair.right, y0, x0, ph, pw);
    out.hr_left = crop3(pair.hr_left, 4 * y0, 4 * x0, 4 * ph, 4 * pw);
    out.hr_right = crop3(pair.hr_right, 4 * y0, 4 * x0, 4 * ph, 4 * pw);
    return out;
}

Tensor<float> hflip(const Tensor<float>& img) {
    const std::int64_t C = img.size(0), H = img.size(1), W = img.size(2);
    Tensor<float> out = Tensor<float>::zeros(img.shape());
    const float* s = img.data();
    float* d = out.data();
    for (std::int64_t c = 0; c < C; ++c)
        for (std::int64_t y = 0; y < H; ++y)
            for (std::int64_t x = 0; x < W; ++x) d[(c * H + y) * W + x] = s[(c * H + y) * W + (W - 1 - x)];
    return out;
}

Tensor<float> vflip(const Tensor<float>& img) {
    const std::int64_t C = img.size(0), H = img.size(1), W = img.size(2);
    Tensor<float> out = Tensor<float>::zeros(img.shape());
    const float* s = img.data();
    float* d = out.data();
    for (std::int64_t c = 0; c < C; ++c)
        for (std::int64_t y = 0; y < H; ++y)
            for (std::int64_t x = 0; x < W; ++x) d[(c * H + y) * W + x] = s[(c * H + (H - 1 - y)) * W + x];
    return out;
}

Tensor<float> permute_channels(const Tensor<float>& img, const std::array<int, 3>& perm) {
    const std::int64_t H = img.size(1), W = img.size(2);
    Tensor<float> out = Tensor<float>::zeros(img.shape());
    const float* s = img.data();
    float* d = out.data();
    for (int c = 0; c < 3; ++c)
        for (std::int64_t i = 0; i < H * W; ++i) d[c * H * W + i] = s[perm[static_cast<std::size_t>(c)] * H * W + i];
    return out;
}

StereoPair augment(const StereoPair& pair, Rng& rng) {
    static const std::array<std::array<int, 3>, 6> perms{
        {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};
    if (!pair.has_hr()) throw DataError("augment: scene " + pair.scene + " has no HR views");
    StereoPair out = pair;
    if (rng.bernoulli(0.5)) {
        out.left = vflip(out.left);
        out.right = vflip(out.right);
        out.hr_left = vflip(out.hr_left);
        out.hr_right = vflip(out.hr_right);
    }
    if (rng.bernoulli(0.5)) {
        // a mirrored stereo pair is only geometrically consistent with the
        // views exchanged (disparity keeps its sign)
        Tensor<float> l = hflip(out.right), r = hflip(out.left);
        Tensor<float> hl = hflip(out.hr_right), hr = hflip(out.hr_left);
        out.left = l;
        out.right = r;
        out.hr_left = hl;
        out.hr_right = hr;
    }
    const auto& perm = perms[static_cast<std::size_t>(rng.uniform_int(6))];
    out.left = permute_channels(out.left, perm);
    out.right = permute_channels(out.right, perm);
    out.hr_left = permute_channels(out.hr_left, perm);
    out.hr_right = permute_channels(out.hr_right, perm);
    return out;
}

}  // namespace swinfsr

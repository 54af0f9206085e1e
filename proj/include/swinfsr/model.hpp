#pragma once

#include "swinfsr/rcam.hpp"

namespace swinfsr {

struct SwinFsrConfig {
    std::int64_t n_rsftb = 2;
    std::int64_t stl_per_block = 2;
    std::int64_t embed_dim = 16;
    std::int64_t num_heads = 4;
    WindowSpec window{6, 15, 0, 0};
    std::int64_t scale = 4;
    double dropout_rate = 0.1;
    double drop_path_rate = 0.2;
    std::int64_t mlp_ratio = 2;
};

inline void validate_config(const SwinFsrConfig& c) {
    if (c.scale != 4) throw ShapeError("config: scale is fixed at 4");
    if (c.n_rsftb < 1 || c.stl_per_block < 1) throw ShapeError("config: block counts must be >= 1");
    if (c.embed_dim < 1 || c.num_heads < 1 || c.embed_dim % c.num_heads != 0)
        throw ShapeError("config: embed_dim must be a positive multiple of num_heads");
    if (c.dropout_rate < 0.0 || c.dropout_rate >= 1.0) throw ShapeError("config: dropout_rate must be in [0,1)");
    if (c.drop_path_rate < 0.0 || c.drop_path_rate > 1.0) throw ShapeError("config: drop_path_rate must be in [0,1]");
    if (c.mlp_ratio < 1) throw ShapeError("config: mlp_ratio must be >= 1");
    validate_window(c.window);
}

// Siamese two-branch network: one parameter set serves both views, with
// cross-view attention after every residual block.
template <typename T>
struct Model {
    SwinFsrConfig cfg;
    ConvParams<T> shallow;                // 3x3, 3 -> C
    std::vector<RsftbParams<T>> blocks;
    std::vector<RcamParams<T>> rcams;     // one after every block
    FfbParams<T> tail_ffb;
    ConvParams<T> up_conv;                // 3x3, C -> 48
    ConvParams<T> final_conv;             // 3x3, 3 -> 3 (hosts the dropout hook)

    std::vector<std::pair<std::string, Tensor<T>*>> named_params() {
        std::vector<std::pair<std::string, Tensor<T>*>> out;
        detail::collect_conv(shallow, out, "shallow");
        for (std::size_t i = 0; i < blocks.size(); ++i) {
            collect_rsftb_params(blocks[i], out, "rsftb" + std::to_string(i));
            collect_rcam_params(rcams[i], out, "rcam" + std::to_string(i));
        }
        collect_ffb_params(tail_ffb, out, "tail_ffb");
        detail::collect_conv(up_conv, out, "up");
        detail::collect_conv(final_conv, out, "final");
        return out;
    }

    std::vector<Tensor<T>> param_tensors() {
        std::vector<Tensor<T>> out;
        for (auto& [name, t] : named_params()) out.push_back(*t);
        return out;
    }
};

template <typename T>
Model<T> build(const SwinFsrConfig& cfg, Rng& rng) {
    validate_config(cfg);
    Model<T> m;
    m.cfg = cfg;
    const std::int64_t C = cfg.embed_dim;
    m.shallow = detail::make_conv<T>(C, 3, 3, rng);
    for (std::int64_t i = 0; i < cfg.n_rsftb; ++i) {
        m.blocks.push_back(
            make_rsftb_params<T>(C, cfg.stl_per_block, cfg.num_heads, cfg.mlp_ratio, cfg.window, cfg.drop_path_rate, rng));
        m.rcams.push_back(make_rcam_params<T>(C, rng));
    }
    m.tail_ffb = make_ffb_params<T>(C, rng);
    m.up_conv = detail::make_conv<T>(48, C, 3, rng);
    m.final_conv = detail::make_conv<T>(3, 3, 3, rng);
    return m;
}

template <typename T>
std::int64_t count_params(Model<T>& m) {
    std::int64_t n = 0;
    for (auto& [name, t] : m.named_params()) n += t->numel();
    return n;
}

// (sr_left, sr_right), each exactly 4x the input extent.  Inputs are
// RGB in [0,1]; the network predicts the residual over a bilinear x4
// upsample of its input.
template <typename T>
std::pair<Tensor<T>, Tensor<T>> forward(Model<T>& m, const Tensor<T>& lr_left, const Tensor<T>& lr_right, bool training,
                                        Rng& rng) {
    if (lr_left.dim() != 3 || lr_left.size(0) != 3) throw ShapeError("forward: left input must be [3,H,W]");
    if (lr_right.shape() != lr_left.shape()) throw ShapeError("forward: left/right shapes differ");

    Tensor<T> xl = conv2d(lr_left, m.shallow);
    Tensor<T> xr = conv2d(lr_right, m.shallow);
    for (std::size_t i = 0; i < m.blocks.size(); ++i) {
        xl = rsftb_forward(xl, m.blocks[i], training, rng);
        xr = rsftb_forward(xr, m.blocks[i], training, rng);
        std::tie(xl, xr) = rcam_forward(xl, xr, m.rcams[i], training, rng);
    }
    xl = ffb_forward(xl, m.tail_ffb);
    xr = ffb_forward(xr, m.tail_ffb);

    auto head = [&](const Tensor<T>& deep, const Tensor<T>& lr) {
        Tensor<T> h = conv2d(deep, m.up_conv);
        h = pixel_shuffle(h, m.cfg.scale);
        h = dropout(h, m.cfg.dropout_rate, training, rng);
        h = conv2d(h, m.final_conv);
        return add(h, bilinear_resize(lr, m.cfg.scale));
    };
    Tensor<T> sl = head(xl, lr_left);
    Tensor<T> sr = head(xr, lr_right);
    return {sl, sr};
}

}  // namespace swinfsr

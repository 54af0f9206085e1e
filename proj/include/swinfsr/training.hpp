#pragma once

#include <functional>
#include <string>
#include <vector>

#include "swinfsr/data.hpp"
#include "swinfsr/model.hpp"
#include "swinfsr/optim.hpp"

namespace swinfsr {

enum class LossMode { L1, L1Perceptual };

struct TrainConfig {
    double lr_max = 1e-4;
    double lr_min = 1e-5;
    std::int64_t total_steps = 2000;
    std::uint64_t seed = 0;
    LossMode loss_mode = LossMode::L1;
    double perceptual_weight = 0.01;
    std::int64_t log_every = 10;
    std::int64_t val_every = 250;
    std::int64_t ckpt_every = 1000;
    std::int64_t patch_h = 30;
    std::int64_t patch_w = 90;
};

// Frozen random-weight conv pyramid standing in for a pretrained loss
// network: three stages of conv3x3 -> 2x average pool -> LeakyReLU.
// Identical seeds give identical features; weights never train.
template <typename T>
struct FeatureNet {
    std::vector<ConvParams<T>> stages;
    mutable std::int64_t eval_count = 0;  // call accounting for tests

    // process-wide counter so call accounting survives train_loop's
    // internal FeatureNet instance
    static std::int64_t& total_evals() {
        static std::int64_t n = 0;
        return n;
    }

    static FeatureNet seeded(std::uint64_t seed) {
        Rng rng(seed);
        FeatureNet net;
        const std::int64_t widths[4] = {3, 8, 16, 32};
        for (int s = 0; s < 3; ++s) {
            ConvParams<T> c = detail::make_conv<T>(widths[s + 1], widths[s], 3, rng);
            c.weight.set_requires_grad(false);
            c.bias.set_requires_grad(false);
            net.stages.push_back(c);
        }
        return net;
    }

    std::vector<Tensor<T>> features(const Tensor<T>& img) const {
        ++eval_count;
        ++total_evals();
        std::vector<Tensor<T>> out;
        Tensor<T> x = img;
        for (const auto& stage : stages) {
            x = conv2d(x, stage);
            // floor-style pooling: drop a trailing row/col on odd extents
            if (x.size(1) % 2 != 0 || x.size(2) % 2 != 0) x = crop2d(x, 0, x.size(1) % 2, 0, x.size(2) % 2);
            x = leaky_relu(avg_pool2(x));
            out.push_back(x);
        }
        return out;
    }
};

// Mean absolute error per view, summed over the two views.
template <typename T>
Tensor<T> l1_loss(const Tensor<T>& sr_l, const Tensor<T>& sr_r, const Tensor<T>& hr_l, const Tensor<T>& hr_r) {
    if (sr_l.shape() != hr_l.shape() || sr_r.shape() != hr_r.shape()) throw ShapeError("l1_loss: shape mismatch");
    return add(mean_all(swinfsr::abs(sub(sr_l, hr_l))), mean_all(swinfsr::abs(sub(sr_r, hr_r))));
}

// Mean over layers of size-normalized squared feature distances.
template <typename T>
Tensor<T> perceptual_loss(const Tensor<T>& sr, const Tensor<T>& hr, const FeatureNet<T>& net) {
    if (sr.shape() != hr.shape()) throw ShapeError("perceptual_loss: shape mismatch");
    std::vector<Tensor<T>> fs = net.features(sr);
    std::vector<Tensor<T>> fh;
    {
        NoGradGuard ng;
        fh = net.features(hr);
    }
    Tensor<T> acc;
    for (std::size_t j = 0; j < fs.size(); ++j) {
        Tensor<T> d = sub(fs[j], fh[j]);
        Tensor<T> term = mean_all(mul(d, d));
        acc = acc.defined() ? add(acc, term) : term;
    }
    return mul_scalar(acc, 1.0 / double(fs.size()));
}

struct TrainLogRow {
    std::int64_t step = 0;
    double lr = 0;
    double loss = 0;
    double val_psnr = -1;  // < 0 when not computed this step
};

struct TrainReport {
    std::vector<TrainLogRow> rows;  // one per step
    double initial_loss = 0;
    double final_loss = 0;
    std::string final_checkpoint;
};

// Batch-size-1 training loop: sample patch -> augment -> forward (training
// mode) -> L1 (+ weighted perceptual) -> backward -> Adam with cosine lr.
// Deterministic given cfg.seed.  Non-finite losses abort with a state dump.
TrainReport train_loop(Model<float>& m, const std::vector<StereoPair>& train_pairs, const TrainConfig& cfg,
                       const std::string& out_dir);

// Average PSNR of the model (eval mode) over full scenes of `pairs`.
double validation_psnr(Model<float>& m, const std::vector<StereoPair>& pairs);

}  // namespace swinfsr

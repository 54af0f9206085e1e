#include "swinfsr/training.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "swinfsr/checkpoint.hpp"
#include "swinfsr/metrics.hpp"

namespace fs = std::filesystem;

namespace swinfsr {

double validation_psnr(Model<float>& m, const std::vector<StereoPair>& pairs) {
    if (pairs.empty()) throw DataError("validation_psnr: no scenes");
    NoGradGuard ng;
    Rng rng(0);  // unused in eval mode, forward signature only
    double acc = 0;
    for (const auto& p : pairs) {
        if (!p.has_hr()) throw DataError("validation scene " + p.scene + " has no HR views");
        auto [sl, sr] = forward(m, p.left, p.right, false, rng);
        acc += 0.5 * (psnr(sl, p.hr_left) + psnr(sr, p.hr_right));
    }
    return acc / double(pairs.size());
}

TrainReport train_loop(Model<float>& m, const std::vector<StereoPair>& train_pairs, const TrainConfig& cfg,
                       const std::string& out_dir) {
    if (train_pairs.empty()) throw DataError("train_loop: empty dataset");
    for (const auto& p : train_pairs)
        if (!p.has_hr()) throw DataError("train scene " + p.scene + " has no HR views");
    if (cfg.total_steps < 1) throw ShapeError("train_loop: total_steps must be >= 1");
    fs::create_directories(out_dir);

#if defined(__GLIBC__)
    // Each step frees and reallocates multi-MB activation/grad buffers; keep
    // them on the heap instead of round-tripping pages through mmap/munmap.
    mallopt(M_MMAP_THRESHOLD, 64 * 1024 * 1024);
    mallopt(M_TRIM_THRESHOLD, 256 * 1024 * 1024);
#endif

    Rng rng(cfg.seed);
    FeatureNet<float> feature_net;
    if (cfg.loss_mode == LossMode::L1Perceptual) feature_net = FeatureNet<float>::seeded(cfg.seed ^ 0x9e3779b97f4a7c15ull);

    std::vector<Tensor<float>> params = m.param_tensors();
    Adam<float> opt;

    const std::string log_path = (fs::path(out_dir) / "train_log.csv").string();
    std::ofstream log(log_path);
    if (!log) throw DataError("cannot write training log: " + log_path);
    log << "step,lr,loss,val_psnr\n";

    TrainReport report;
    report.rows.reserve(static_cast<std::size_t>(cfg.total_steps));
    // denominator total_steps-1 puts the logged schedule exactly on
    // [lr_max, lr_min] at the first/last step
    const std::int64_t denom = std::max<std::int64_t>(1, cfg.total_steps - 1);

    for (std::int64_t step = 0; step < cfg.total_steps; ++step) {
        const std::size_t pick = static_cast<std::size_t>(rng.uniform_int(std::int64_t(train_pairs.size())));
        StereoPair patch = sample_patch(train_pairs[pick], rng, cfg.patch_h, cfg.patch_w);
        patch = augment(patch, rng);

        auto [sr_l, sr_r] = forward(m, patch.left, patch.right, true, rng);
        Tensor<float> loss = l1_loss(sr_l, sr_r, patch.hr_left, patch.hr_right);
        if (cfg.loss_mode == LossMode::L1Perceptual) {
            Tensor<float> per = add(perceptual_loss(sr_l, patch.hr_left, feature_net),
                                    perceptual_loss(sr_r, patch.hr_right, feature_net));
            loss = add(loss, mul_scalar(per, cfg.perceptual_weight));
        }

        const double loss_v = double(loss.item());
        if (!std::isfinite(loss_v)) {
            const std::string dump = (fs::path(out_dir) / "abort_dump.ckpt").string();
            save(m, dump);
            throw NumericError("non-finite loss at step " + std::to_string(step) + " (scene " + patch.scene +
                               "); state dumped to " + dump);
        }

        zero_grads(params);
        backward(loss);
        const double lr = cosine_lr(step, denom, cfg.lr_max, cfg.lr_min);
        opt.step(params, lr);

        TrainLogRow row;
        row.step = step;
        row.lr = lr;
        row.loss = loss_v;
        if (cfg.val_every > 0 && (step + 1) % cfg.val_every == 0) row.val_psnr = validation_psnr(m, train_pairs);
        report.rows.push_back(row);

        if (step % std::max<std::int64_t>(1, cfg.log_every) == 0 || row.val_psnr >= 0 || step == cfg.total_steps - 1) {
            char buf[128];
            if (row.val_psnr >= 0)
                std::snprintf(buf, sizeof buf, "%lld,%.8e,%.8e,%.4f\n", static_cast<long long>(step), lr, loss_v,
                              row.val_psnr);
            else
                std::snprintf(buf, sizeof buf, "%lld,%.8e,%.8e,\n", static_cast<long long>(step), lr, loss_v);
            log << buf;
            log.flush();
        }
        if (cfg.ckpt_every > 0 && (step + 1) % cfg.ckpt_every == 0) {
            save(m, (fs::path(out_dir) / ("step_" + std::to_string(step + 1) + ".ckpt")).string());
        }
    }

    report.initial_loss = report.rows.front().loss;
    report.final_loss = report.rows.back().loss;
    report.final_checkpoint = (fs::path(out_dir) / "final.ckpt").string();
    save(m, report.final_checkpoint);
    return report;
}

}  // namespace swinfsr

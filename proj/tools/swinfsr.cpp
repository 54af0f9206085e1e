// swinfsr: stereo x4 super-resolution driver.
//   train     fit a model on a scene directory
//   infer     upscale one stereo pair (optional flip TTA and tiling)
//   eval      PSNR/SSIM report over a dataset
//   ensemble  pixel-average several SR output sets
//   gradcheck finite-difference audit of every differentiable block

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "swinfsr/checkpoint.hpp"
#include "swinfsr/config.hpp"
#include "swinfsr/gradcheck_suite.hpp"
#include "swinfsr/infer.hpp"
#include "swinfsr/png_io.hpp"
#include "swinfsr/training.hpp"

namespace fs = std::filesystem;
using namespace swinfsr;

namespace {

std::vector<StereoPair> load_nonempty(const std::string& dir) {
    auto pairs = load_dataset(dir);
    if (pairs.empty()) throw DataError("no scenes found under " + dir);
    return pairs;
}

int cmd_train(const std::string& config_path, const std::string& data_dir, const std::string& out_dir,
              std::int64_t seed_override, bool has_seed) {
    auto [mcfg, tcfg] = parse_run_config(config_path);
    if (has_seed) tcfg.seed = seed_override;
    auto pairs = load_nonempty(data_dir);
    for (const auto& p : pairs)
        if (!p.has_hr()) throw DataError("train scene " + p.scene + " has no HR views");

    fs::create_directories(out_dir);
    Rng init_rng(tcfg.seed);
    Model<float> m = build<float>(mcfg, init_rng);
    std::cout << "training: " << count_params(m) << " params, " << pairs.size() << " scenes, " << tcfg.total_steps
              << " steps\n";
    TrainReport rep = train_loop(m, pairs, tcfg, out_dir);
    std::cout << "loss " << rep.initial_loss << " -> " << rep.final_loss << "\n";
    std::cout << "checkpoint: " << rep.final_checkpoint << "\n";
    return 0;
}

int cmd_infer(const std::string& ckpt, const std::string& left, const std::string& right, const std::string& out_left,
              const std::string& out_right, bool tta, std::int64_t tile) {
    Model<float> m = load<float>(ckpt);
    Tensor<float> l = png_read(left);
    Tensor<float> r = png_read(right);
    std::pair<Tensor<float>, Tensor<float>> sr;
    if (tta) {
        StereoRunner run = [&](const Tensor<float>& a, const Tensor<float>& b) { return infer_pair(m, a, b, tile); };
        sr = tta_infer(run, l, r, TtaPlan::full());
    } else {
        sr = infer_pair(m, l, r, tile);
    }
    png_write(sr.first, out_left);
    png_write(sr.second, out_right);
    std::cout << "wrote " << out_left << " and " << out_right << " (" << sr.first.size(1) << "x" << sr.first.size(2)
              << ")\n";
    return 0;
}

int cmd_eval(const std::string& ckpt, const std::string& data_dir, bool tta, const std::string& report) {
    Model<float> m = load<float>(ckpt);
    auto pairs = load_nonempty(data_dir);
    EvalSummary s = eval_dataset(m, pairs, tta, report);
    std::printf("plain: psnr %.4f  ssim %.4f\n", s.plain_psnr, s.plain_ssim);
    if (tta) std::printf("tta:   psnr %.4f  ssim %.4f\n", s.tta_psnr, s.tta_ssim);
    std::cout << "report: " << report << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"stereo x4 super-resolution"};
    app.require_subcommand(1);

    std::string config_path, data_dir, out_dir, ckpt, left, right, out_left, out_right, report, scope = "all";
    std::vector<std::string> inputs;
    std::int64_t seed = 0, tile = 0;
    bool tta = false, inject_fault = false;

    auto* train = app.add_subcommand("train", "fit a model");
    train->add_option("--config", config_path, "key=value run config")->required();
    train->add_option("--data", data_dir, "scene directory")->required();
    train->add_option("--out", out_dir, "output directory")->required();
    auto* seed_opt = train->add_option("--seed", seed, "override the configured rng seed");

    auto* infer = app.add_subcommand("infer", "upscale one stereo pair");
    infer->add_option("--ckpt", ckpt, "checkpoint file")->required();
    infer->add_option("--left", left, "left LR png")->required();
    infer->add_option("--right", right, "right LR png")->required();
    infer->add_option("--out-left", out_left, "left SR png")->required();
    infer->add_option("--out-right", out_right, "right SR png")->required();
    infer->add_flag("--tta", tta, "average flip-augmented passes");
    infer->add_option("--tile", tile, "tile size in LR pixels (0 = whole image)");

    auto* eval_cmd = app.add_subcommand("eval", "score a dataset");
    eval_cmd->add_option("--ckpt", ckpt, "checkpoint file")->required();
    eval_cmd->add_option("--data", data_dir, "scene directory with HR")->required();
    eval_cmd->add_flag("--tta", tta, "also score with flip TTA");
    eval_cmd->add_option("--report", report, "per-scene CSV path")->required();

    auto* ens = app.add_subcommand("ensemble", "pixel-average SR output sets");
    ens->add_option("--inputs", inputs, "two or more directories of PNGs")->required();
    ens->add_option("--out", out_dir, "output directory")->required();

    auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient audit");
    gc->add_option("--scope", scope, "all or a module name");
    gc->add_flag("--inject-fault", inject_fault, "add a deliberately broken backward (harness self-test)")->group("");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 1;  // help/version exit clean, bad usage -> 1
    }

    try {
        if (train->parsed()) return cmd_train(config_path, data_dir, out_dir, seed, seed_opt->count() > 0);
        if (infer->parsed()) return cmd_infer(ckpt, left, right, out_left, out_right, tta, tile);
        if (eval_cmd->parsed()) return cmd_eval(ckpt, data_dir, tta, report);
        if (ens->parsed()) {
            ensemble_dirs(inputs, out_dir);
            std::cout << "wrote ensemble of " << inputs.size() << " sets to " << out_dir << "\n";
            return 0;
        }
        if (gc->parsed()) {
            bool ok = run_gradcheck_suite(scope, inject_fault, std::cout);
            return ok ? 0 : 3;
        }
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 3;
    } catch (const ShapeError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}

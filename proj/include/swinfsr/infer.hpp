#pragma once

#include <functional>
#include <string>
#include <vector>

#include "swinfsr/data.hpp"
#include "swinfsr/metrics.hpp"
#include "swinfsr/model.hpp"

namespace swinfsr {

// A stereo SR runner: (lr_left, lr_right) -> (sr_left, sr_right).
using StereoRunner =
    std::function<std::pair<Tensor<float>, Tensor<float>>(const Tensor<float>&, const Tensor<float>&)>;

// Full-image inference in eval mode.  tile_lr > 0 splits the input into
// window-aligned tiles of roughly that LR size with an 8-pixel LR overlap
// and blends the seams linearly.
std::pair<Tensor<float>, Tensor<float>> infer_pair(Model<float>& m, const Tensor<float>& left,
                                                   const Tensor<float>& right, std::int64_t tile_lr = 0);

// Flip-based test-time augmentation plan; always contains the identity.
// A horizontal flip swaps the views on the way in and out.
struct TtaPlan {
    struct Variant {
        bool h = false, v = false;
    };
    std::vector<Variant> variants{{false, false}};
    static TtaPlan identity_only() { return TtaPlan{}; }
    static TtaPlan full() { return TtaPlan{{{false, false}, {true, false}, {false, true}, {true, true}}}; }
};

std::pair<Tensor<float>, Tensor<float>> tta_infer(const StereoRunner& run, const Tensor<float>& left,
                                                  const Tensor<float>& right, const TtaPlan& plan);

struct EvalSummary {
    std::vector<SceneScore> plain;
    std::vector<SceneScore> tta;  // empty unless requested
    double plain_psnr = 0, plain_ssim = 0;
    double tta_psnr = 0, tta_ssim = 0;
};

// Scores every scene (all must carry HR) without TTA, and with the full
// flip plan when use_tta is set.  Writes `report_path` and, for TTA,
// `report_path + ".tta.csv"`.
EvalSummary eval_dataset(Model<float>& m, const std::vector<StereoPair>& pairs, bool use_tta,
                         const std::string& report_path);

// Pixelwise mean of identically-named PNG sets from >= 2 directories.
void ensemble_dirs(const std::vector<std::string>& inputs, const std::string& out_dir);

}  // namespace swinfsr

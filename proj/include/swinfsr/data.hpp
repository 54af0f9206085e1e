#pragma once

#include <array>
#include <string>
#include <vector>

#include "swinfsr/tensor.hpp"

namespace swinfsr {

// One rectified stereo scene.  LR views are always present; HR views are
// present for training/eval scenes and undefined otherwise.
struct StereoPair {
    std::string scene;
    Tensor<float> left, right;        // [3,H,W] in [0,1]
    Tensor<float> hr_left, hr_right;  // [3,4H,4W] when defined
    bool has_hr() const { return hr_left.defined() && hr_right.defined(); }
};

// Directory of scene subdirectories, each holding hr0.png/hr1.png (left/
// right ground truth) and/or lr0.png/lr1.png.  Missing LR images are
// derived from HR by bicubic x4 downsampling at load time.
std::vector<std::string> list_scenes(const std::string& root);
StereoPair load_scene(const std::string& root, const std::string& scene);
std::vector<StereoPair> load_dataset(const std::string& root);

// Separable Catmull-Rom (a = -0.5) x4 downsample with half-pixel centers
// and edge clamp.  Constants pass through exactly.
Tensor<float> bicubic_downsample(const Tensor<float>& hr);

// x4 bicubic upsample with the same kernel/center conventions; the
// no-deep-model baseline for PSNR comparisons.
Tensor<float> bicubic_upsample4(const Tensor<float>& lr);

// Random aligned 30x90 LR crop (HR crop at 4x the offset).  Both views
// get the same offset so epipolar rows stay matched.
StereoPair sample_patch(const StereoPair& pair, Rng& rng, std::int64_t ph = 30, std::int64_t pw = 90);

// Flip / channel-permutation helpers (also used by TTA).
Tensor<float> hflip(const Tensor<float>& img);
Tensor<float> vflip(const Tensor<float>& img);
Tensor<float> permute_channels(const Tensor<float>& img, const std::array<int, 3>& perm);

// Training augmentation: p=0.5 vertical flip, p=0.5 horizontal flip with
// view swap, and a uniformly random channel permutation applied to all
// four images identically.
StereoPair augment(const StereoPair& pair, Rng& rng);

}  // namespace swinfsr

#pragma once

#include <cstdio>
#include <functional>
#include <string>

#include "swinfsr/tensor.hpp"

namespace swinfsr {

struct GradCheckReport {
    double max_rel_err = 0.0;
    std::int64_t checked = 0;
    std::string worst;  // "<leaf>[i]: ad=… fd=…"
    bool pass(double tol) const { return max_rel_err < tol; }
};

// Central-difference check of reverse-mode gradients.  `forward` must be
// a deterministic scalar function of the listed leaves (re-seed any RNG
// it uses on every call).  Large leaves are subsampled deterministically.
template <typename T>
GradCheckReport gradcheck(const std::function<Tensor<T>()>& forward, const std::vector<std::pair<std::string, Tensor<T>>>& leaves,
                          double h = 1e-5, std::int64_t max_per_leaf = 64, std::uint64_t sample_seed = 0x5eedULL) {
    for (auto& [name, leaf] : leaves)
        if (!leaf.requires_grad()) throw ShapeError("gradcheck: leaf '" + name + "' does not require grad");

    auto mutable_leaves = leaves;
    for (auto& [name, leaf] : mutable_leaves) leaf.zero_grad();
    Tensor<T> loss = forward();
    backward(loss);

    std::vector<std::vector<T>> ad;
    ad.reserve(leaves.size());
    for (auto& [name, leaf] : mutable_leaves) ad.push_back(leaf.grad());

    GradCheckReport rep;
    Rng pick(sample_seed);
    for (std::size_t li = 0; li < mutable_leaves.size(); ++li) {
        auto& [name, leaf] = mutable_leaves[li];
        const std::int64_t n = leaf.numel();
        std::vector<std::int64_t> idxs;
        if (n <= max_per_leaf) {
            idxs.resize(static_cast<std::size_t>(n));
            for (std::int64_t i = 0; i < n; ++i) idxs[static_cast<std::size_t>(i)] = i;
        } else {
            for (std::int64_t i = 0; i < max_per_leaf; ++i) idxs.push_back(pick.uniform_int(n));
        }
        for (std::int64_t i : idxs) {
            const T saved = leaf[i];
            const double step = h * std::max(1.0, std::fabs(static_cast<double>(saved)));
            double fp, fm;
            {
                NoGradGuard ng;
                leaf[i] = static_cast<T>(static_cast<double>(saved) + step);
                fp = static_cast<double>(forward().item());
                leaf[i] = static_cast<T>(static_cast<double>(saved) - step);
                fm = static_cast<double>(forward().item());
                leaf[i] = saved;
            }
            const double fd = (fp - fm) / (2.0 * step);
            const double adg = static_cast<double>(ad[li][static_cast<std::size_t>(i)]);
            const double rel = std::fabs(fd - adg) / std::max({std::fabs(adg), std::fabs(fd), 1e-8});
            ++rep.checked;
            if (rel > rep.max_rel_err) {
                rep.max_rel_err = rel;
                char buf[96];
                std::snprintf(buf, sizeof buf, "[%lld]: ad=%.6e fd=%.6e", static_cast<long long>(i), adg, fd);
                rep.worst = name + buf;
            }
        }
    }
    return rep;
}

}  // namespace swinfsr

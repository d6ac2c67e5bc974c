#pragma once

#include "pici/core.hpp"
#include "pici/image.hpp"
#include "pici/rng.hpp"

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <vector>

namespace pici {

/// Non-overlapping square patches in row-major grid order; each row of
/// `patches` is one patch flattened in (row, col, channel) order.
struct PatchSequence {
    Mat patches;
    int patch_size = 0;
    int grid_rows = 0;
    int grid_cols = 0;
    int channels = 3;

    int n_patches() const noexcept { return grid_rows * grid_cols; }
    int patch_dim() const noexcept { return patch_size * patch_size * channels; }
};

/// Split of the patch grid into visible and masked index sets (both sorted).
struct MaskPlan {
    std::vector<int> visible_idx;
    std::vector<int> masked_idx;
    double ratio = 0.0;

    int n_patches() const noexcept { return static_cast<int>(visible_idx.size() + masked_idx.size()); }

    /// Plan with every patch visible (inference mode).
    static MaskPlan none(int n_patches) {
        MaskPlan p;
        p.visible_idx.resize(static_cast<std::size_t>(n_patches));
        std::iota(p.visible_idx.begin(), p.visible_idx.end(), 0);
        return p;
    }
};

inline PatchSequence patchify(const Image& img, int patch_size) {
    if (patch_size <= 0) throw PatchGridError("patch size must be positive");
    if (img.empty() || img.height() % patch_size != 0 || img.width() % patch_size != 0)
        throw PatchGridError("image " + std::to_string(img.height()) + "x" + std::to_string(img.width()) +
                             " not divisible by patch size " + std::to_string(patch_size));
    PatchSequence seq;
    seq.patch_size = patch_size;
    seq.grid_rows = img.height() / patch_size;
    seq.grid_cols = img.width() / patch_size;
    seq.channels = img.channels();
    seq.patches.resize(seq.n_patches(), seq.patch_dim());
    for (int gr = 0; gr < seq.grid_rows; ++gr)
        for (int gc = 0; gc < seq.grid_cols; ++gc) {
            const int k = gr * seq.grid_cols + gc;
            int col = 0;
            for (int r = 0; r < patch_size; ++r)
                for (int c = 0; c < patch_size; ++c)
                    for (int ch = 0; ch < seq.channels; ++ch)
                        seq.patches(k, col++) = img.at(gr * patch_size + r, gc * patch_size + c, ch);
        }
    return seq;
}

inline Image unpatchify(const PatchSequence& seq) {
    if (seq.patch_size <= 0 || seq.grid_rows <= 0 || seq.grid_cols <= 0 || seq.channels <= 0 ||
        seq.patches.rows() != seq.n_patches() || seq.patches.cols() != seq.patch_dim())
        throw PatchGridError("patch sequence inconsistent with its grid");
    const int p = seq.patch_size;
    Image img(seq.grid_rows * p, seq.grid_cols * p, seq.channels);
    for (int gr = 0; gr < seq.grid_rows; ++gr)
        for (int gc = 0; gc < seq.grid_cols; ++gc) {
            const int k = gr * seq.grid_cols + gc;
            int col = 0;
            for (int r = 0; r < p; ++r)
                for (int c = 0; c < p; ++c)
                    for (int ch = 0; ch < seq.channels; ++ch) img.at(gr * p + r, gc * p + c, ch) = seq.patches(k, col++);
        }
    return img;
}

/// Uniform subset of round(ratio * n) patches, drawn as the prefix of a seeded shuffle.
inline MaskPlan sample_mask(int n_patches, double ratio, std::uint64_t seed) {
    if (!(ratio >= 0.0 && ratio < 1.0)) throw InvalidRatio("mask ratio must lie in [0, 1)");
    if (n_patches < 1) throw PatchGridError("mask needs at least one patch");
    std::vector<int> order(static_cast<std::size_t>(n_patches));
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    rng.shuffle(order);
    const std::size_t n_masked = round_half_up(ratio * n_patches);

    MaskPlan plan;
    plan.ratio = ratio;
    plan.masked_idx.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_masked));
    plan.visible_idx.assign(order.begin() + static_cast<std::ptrdiff_t>(n_masked), order.end());
    std::sort(plan.masked_idx.begin(), plan.masked_idx.end());
    std::sort(plan.visible_idx.begin(), plan.visible_idx.end());
    return plan;
}

}  // namespace pici

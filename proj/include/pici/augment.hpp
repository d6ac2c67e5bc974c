#pragma once

// Weak and strong view generation. The strong pipeline applies, in this order:
// resized crop, color jitter, grayscale, horizontal flip, gaussian blur,
// resize to target, channel normalization.

#include "pici/core.hpp"
#include "pici/image.hpp"
#include "pici/rng.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

namespace pici {

enum class AugmentKind { weak, strong };

struct AugmentPolicy {
    AugmentKind kind = AugmentKind::weak;
    int target_size = 224;
    double crop_scale_min = 0.5;
    double crop_scale_max = 1.0;
    double jitter_strength = 0.4;
    double grayscale_prob = 0.2;
    double flip_prob = 0.5;
    double blur_prob = 0.5;
    std::array<double, 3> normalize_mean{0.0, 0.0, 0.0};
    std::array<double, 3> normalize_std{1.0, 1.0, 1.0};

    static AugmentPolicy weak(int target_size) {
        AugmentPolicy p;
        p.kind = AugmentKind::weak;
        p.target_size = target_size;
        p.crop_scale_min = p.crop_scale_max = 1.0;
        p.jitter_strength = 0.0;
        p.grayscale_prob = p.flip_prob = p.blur_prob = 0.0;
        return p;
    }

    static AugmentPolicy strong(int target_size) {
        AugmentPolicy p;
        p.kind = AugmentKind::strong;
        p.target_size = target_size;
        return p;
    }

    void validate() const {
        if (target_size <= 0) throw ConfigError("augment: target_size must be positive");
        if (!(crop_scale_min > 0.0 && crop_scale_min <= crop_scale_max && crop_scale_max <= 1.0))
            throw ConfigError("augment: crop scale range must lie in (0, 1] with min <= max");
        if (jitter_strength < 0.0) throw ConfigError("augment: jitter_strength must be >= 0");
        for (double p : {grayscale_prob, flip_prob, blur_prob})
            if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("augment: probabilities must lie in [0, 1]");
        for (double s : normalize_std)
            if (!(s > 0.0)) throw ConfigError("augment: normalize_std must be positive");
    }
};

namespace detail {

inline void require_image(const Image& img) {
    if (img.empty() || img.height() <= 0 || img.width() <= 0) throw InvalidImage("zero-area image");
}

inline double gray_value(const Image& img, int r, int c) {
    return 0.299 * img.at(r, c, 0) + 0.587 * img.at(r, c, 1) + 0.114 * img.at(r, c, 2);
}

inline double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

}  // namespace detail

/// Bilinear resize with half-pixel centers and edge clamping. Same-size resize is the identity.
inline Image resize_bilinear(const Image& img, int out_h, int out_w) {
    detail::require_image(img);
    if (out_h == img.height() && out_w == img.width()) return img;
    Image out(out_h, out_w, img.channels());
    const double sy = static_cast<double>(img.height()) / out_h;
    const double sx = static_cast<double>(img.width()) / out_w;
    for (int r = 0; r < out_h; ++r) {
        const double fy = std::clamp((r + 0.5) * sy - 0.5, 0.0, img.height() - 1.0);
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, img.height() - 1);
        const double wy = fy - y0;
        for (int c = 0; c < out_w; ++c) {
            const double fx = std::clamp((c + 0.5) * sx - 0.5, 0.0, img.width() - 1.0);
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, img.width() - 1);
            const double wx = fx - x0;
            for (int ch = 0; ch < img.channels(); ++ch) {
                const double top = img.at(y0, x0, ch) * (1 - wx) + img.at(y0, x1, ch) * wx;
                const double bot = img.at(y1, x0, ch) * (1 - wx) + img.at(y1, x1, ch) * wx;
                out.at(r, c, ch) = top * (1 - wy) + bot * wy;
            }
        }
    }
    return out;
}

inline Image crop(const Image& img, int top, int left, int h, int w) {
    if (top < 0 || left < 0 || h <= 0 || w <= 0 || top + h > img.height() || left + w > img.width())
        throw InvalidImage("crop window outside image");
    Image out(h, w, img.channels());
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
            for (int ch = 0; ch < img.channels(); ++ch) out.at(r, c, ch) = img.at(top + r, left + c, ch);
    return out;
}

/// Largest centered square.
inline Image center_crop_square(const Image& img) {
    detail::require_image(img);
    const int side = std::min(img.height(), img.width());
    if (side == img.height() && side == img.width()) return img;
    return crop(img, (img.height() - side) / 2, (img.width() - side) / 2, side, side);
}

inline Image flip_horizontal(const Image& img) {
    Image out(img.height(), img.width(), img.channels());
    for (int r = 0; r < img.height(); ++r)
        for (int c = 0; c < img.width(); ++c)
            for (int ch = 0; ch < img.channels(); ++ch) out.at(r, c, ch) = img.at(r, img.width() - 1 - c, ch);
    return out;
}

inline Image to_grayscale(const Image& img) {
    Image out(img.height(), img.width(), img.channels());
    for (int r = 0; r < img.height(); ++r)
        for (int c = 0; c < img.width(); ++c) {
            const double g = detail::gray_value(img, r, c);
            for (int ch = 0; ch < img.channels(); ++ch) out.at(r, c, ch) = g;
        }
    return out;
}

/// Brightness, contrast, saturation factors; each channel result clamped to [0, 1].
inline Image color_jitter(const Image& img, double brightness, double contrast, double saturation) {
    Image out = img;
    for (double& v : out.pixels()) v = detail::clamp01(v * brightness);

    double mean_gray = 0.0;
    for (int r = 0; r < out.height(); ++r)
        for (int c = 0; c < out.width(); ++c) mean_gray += detail::gray_value(out, r, c);
    mean_gray /= static_cast<double>(out.height()) * out.width();
    for (double& v : out.pixels()) v = detail::clamp01((v - mean_gray) * contrast + mean_gray);

    for (int r = 0; r < out.height(); ++r)
        for (int c = 0; c < out.width(); ++c) {
            const double g = detail::gray_value(out, r, c);
            for (int ch = 0; ch < out.channels(); ++ch)
                out.at(r, c, ch) = detail::clamp01(g + (out.at(r, c, ch) - g) * saturation);
        }
    return out;
}

/// Separable gaussian blur, kernel radius ceil(3 sigma), replicate border.
inline Image gaussian_blur(const Image& img, double sigma) {
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> kernel(2 * radius + 1);
    double total = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        kernel[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
        total += kernel[i + radius];
    }
    for (double& k : kernel) k /= total;

    auto pass = [&](const Image& src, bool horizontal) {
        Image dst(src.height(), src.width(), src.channels());
        for (int r = 0; r < src.height(); ++r)
            for (int c = 0; c < src.width(); ++c)
                for (int ch = 0; ch < src.channels(); ++ch) {
                    double acc = 0.0;
                    for (int i = -radius; i <= radius; ++i) {
                        const int rr = horizontal ? r : std::clamp(r + i, 0, src.height() - 1);
                        const int cc = horizontal ? std::clamp(c + i, 0, src.width() - 1) : c;
                        acc += kernel[i + radius] * src.at(rr, cc, ch);
                    }
                    dst.at(r, c, ch) = acc;
                }
        return dst;
    };
    return pass(pass(img, true), false);
}

inline Image normalize_channels(const Image& img, const std::array<double, 3>& mean, const std::array<double, 3>& std) {
    Image out = img;
    for (int r = 0; r < img.height(); ++r)
        for (int c = 0; c < img.width(); ++c)
            for (int ch = 0; ch < img.channels(); ++ch) {
                const int k = std::min(ch, 2);
                out.at(r, c, ch) = (img.at(r, c, ch) - mean[k]) / std[k];
            }
    return out;
}

/// Window of a resized crop: area fraction from the scale range, aspect ratio
/// log-uniform in [3/4, 4/3]. Falls back to the full image after 10 rejected draws.
struct CropWindow {
    int top = 0, left = 0, height = 0, width = 0;
};

inline CropWindow sample_crop_window(int height, int width, double scale_min, double scale_max, Rng& rng) {
    const double area = static_cast<double>(height) * width;
    const double log_lo = std::log(3.0 / 4.0), log_hi = std::log(4.0 / 3.0);
    for (int attempt = 0; attempt < 10; ++attempt) {
        const double target_area = area * rng.uniform(scale_min, scale_max);
        const double ratio = std::exp(rng.uniform(log_lo, log_hi));
        const int w = static_cast<int>(std::lround(std::sqrt(target_area * ratio)));
        const int h = static_cast<int>(std::lround(std::sqrt(target_area / ratio)));
        if (w > 0 && h > 0 && w <= width && h <= height) {
            const int top = static_cast<int>(rng.below(static_cast<std::uint64_t>(height - h + 1)));
            const int left = static_cast<int>(rng.below(static_cast<std::uint64_t>(width - w + 1)));
            return {top, left, h, w};
        }
    }
    return {0, 0, height, width};
}

/// Resize to target_size x target_size and normalize. Deterministic.
inline Image weak_augment(const Image& img, const AugmentPolicy& policy) {
    detail::require_image(img);
    if (policy.kind != AugmentKind::weak) throw ConfigError("weak_augment requires a weak policy");
    const Image resized = resize_bilinear(img, policy.target_size, policy.target_size);
    return normalize_channels(resized, policy.normalize_mean, policy.normalize_std);
}

/// Pure function of (img, policy, seed). Inert transforms are skipped entirely, so an
/// inert policy reproduces weak_augment bit for bit.
inline Image strong_augment(const Image& img, const AugmentPolicy& policy, std::uint64_t seed) {
    detail::require_image(img);
    if (policy.kind != AugmentKind::strong) throw ConfigError("strong_augment requires a strong policy");
    Rng rng(seed);
    Image cur = img;

    if (policy.crop_scale_min < 1.0) {
        const CropWindow w =
            sample_crop_window(cur.height(), cur.width(), policy.crop_scale_min, policy.crop_scale_max, rng);
        if (w.height != cur.height() || w.width != cur.width()) cur = crop(cur, w.top, w.left, w.height, w.width);
    }
    if (policy.jitter_strength > 0.0) {
        const double s = policy.jitter_strength;
        const double b = rng.uniform(std::max(0.0, 1.0 - s), 1.0 + s);
        const double c = rng.uniform(std::max(0.0, 1.0 - s), 1.0 + s);
        const double sat = rng.uniform(std::max(0.0, 1.0 - s), 1.0 + s);
        cur = color_jitter(cur, b, c, sat);
    }
    if (rng.bernoulli(policy.grayscale_prob)) cur = to_grayscale(cur);
    if (rng.bernoulli(policy.flip_prob)) cur = flip_horizontal(cur);
    if (rng.bernoulli(policy.blur_prob)) cur = gaussian_blur(cur, rng.uniform(0.1, 2.0));

    cur = resize_bilinear(cur, policy.target_size, policy.target_size);
    return normalize_channels(cur, policy.normalize_mean, policy.normalize_std);
}

}  // namespace pici

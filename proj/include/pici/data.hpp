#pragma once

#include "pici/core.hpp"
#include "pici/image.hpp"
#include "pici/rng.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <string>
#include <vector>

namespace pici {

struct Dataset {
    struct Item {
        Image image;
        int label = 0;
        std::string id;
    };

    std::vector<Item> items;
    int n_classes = 0;
    std::string name;
    std::vector<std::string> class_names;

    std::size_t size() const noexcept { return items.size(); }

    Labels labels() const {
        Labels l;
        l.reserve(items.size());
        for (const auto& it : items) l.push_back(it.label);
        return l;
    }

    /// Per-channel pixel mean over the whole dataset.
    std::array<double, 3> channel_mean() const {
        std::array<double, 3> sum{};
        double count = 0.0;
        for (const auto& it : items) {
            const auto px = it.image.pixels();
            for (std::size_t i = 0; i < px.size(); ++i) sum[i % 3] += px[i];
            count += static_cast<double>(px.size()) / 3.0;
        }
        for (double& s : sum) s /= std::max(count, 1.0);
        return sum;
    }

    /// Per-channel population standard deviation, floored at 1e-6.
    std::array<double, 3> channel_std() const {
        const auto mean = channel_mean();
        std::array<double, 3> sum{};
        double count = 0.0;
        for (const auto& it : items) {
            const auto px = it.image.pixels();
            for (std::size_t i = 0; i < px.size(); ++i) sum[i % 3] += (px[i] - mean[i % 3]) * (px[i] - mean[i % 3]);
            count += static_cast<double>(px.size()) / 3.0;
        }
        for (double& s : sum) s = std::max(std::sqrt(s / std::max(count, 1.0)), 1e-6);
        return sum;
    }
};

namespace detail {

inline std::array<double, 3> hsv_to_rgb(double h, double s, double v) {
    const double hh = std::fmod(h, 1.0) * 6.0;
    const int sector = static_cast<int>(hh) % 6;
    const double f = hh - std::floor(hh);
    const double p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
    switch (sector) {
        case 0: return {v, t, p};
        case 1: return {q, v, p};
        case 2: return {p, v, t};
        case 3: return {p, q, v};
        case 4: return {t, p, v};
        default: return {v, p, q};
    }
}

}  // namespace detail

/// Synthetic class-structured images. Class k has its own base hue, stripe
/// frequency/orientation and blob location; samples add positional jitter and
/// gaussian pixel noise (sigma 0.05). Items are ordered class by class.
inline Dataset synth_blobs(int n_classes, int per_class, int image_size, std::uint64_t seed) {
    if (n_classes < 1 || per_class < 1 || image_size < 1) throw InputError("synth_blobs: counts and size must be positive");
    Dataset ds;
    ds.n_classes = n_classes;
    ds.name = "synth_blobs";
    Rng rng(seed);
    const double size = image_size;
    for (int k = 0; k < n_classes; ++k) {
        ds.class_names.push_back("class_" + std::to_string(k));
        const double hue = static_cast<double>(k) / n_classes;
        const auto base = detail::hsv_to_rgb(hue, 0.6, 0.85);
        const auto blob = detail::hsv_to_rgb(hue + 0.5, 0.8, 0.95);
        const double freq = 1.0 + k;
        const double theta = std::numbers::pi * k / n_classes;
        const double angle = 2.0 * std::numbers::pi * k / n_classes;
        const double cx = 0.5 * size + 0.25 * size * std::cos(angle);
        const double cy = 0.5 * size + 0.25 * size * std::sin(angle);
        const double radius = 0.18 * size;
        for (int s = 0; s < per_class; ++s) {
            const double jx = rng.uniform(-0.06, 0.06) * size;
            const double jy = rng.uniform(-0.06, 0.06) * size;
            const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
            Image img(image_size, image_size, 3);
            for (int r = 0; r < image_size; ++r)
                for (int c = 0; c < image_size; ++c) {
                    const double u = (c * std::cos(theta) + r * std::sin(theta)) / size;
                    const double stripe = 0.75 + 0.25 * std::sin(2.0 * std::numbers::pi * freq * u + phase);
                    const double dx = c + 0.5 - (cx + jx), dy = r + 0.5 - (cy + jy);
                    const bool inside = dx * dx + dy * dy <= radius * radius;
                    for (int ch = 0; ch < 3; ++ch) {
                        const double v = inside ? blob[static_cast<std::size_t>(ch)] : base[static_cast<std::size_t>(ch)] * stripe;
                        img.at(r, c, ch) = std::clamp(v + rng.normal(0.0, 0.05), 0.0, 1.0);
                    }
                }
            ds.items.push_back({std::move(img), k, "synth_" + std::to_string(k) + "_" + std::to_string(s)});
        }
    }
    return ds;
}

/// Seeded shuffle of item indices cut into batches. With drop_last the trailing
/// partial batch is discarded.
inline std::vector<std::vector<int>> batches(std::size_t n_items, int batch_size, std::uint64_t epoch_seed,
                                             bool drop_last) {
    if (batch_size < 1) throw InputError("batch size must be >= 1");
    std::vector<int> order(n_items);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(epoch_seed);
    rng.shuffle(order);
    std::vector<std::vector<int>> out;
    const std::size_t bs = static_cast<std::size_t>(batch_size);
    for (std::size_t start = 0; start < n_items; start += bs) {
        const std::size_t end = std::min(n_items, start + bs);
        if (drop_last && end - start < bs) break;
        out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start), order.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return out;
}

}  // namespace pici

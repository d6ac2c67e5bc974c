#pragma once

#include "pici/core.hpp"

#include <cmath>
#include <span>
#include <vector>

namespace pici {

/// Dense height x width x channels pixel array, stored interleaved in
/// (row, col, channel) order.
class Image {
public:
    Image() = default;
    Image(int height, int width, int channels, double fill = 0.0)
        : height_(height), width_(width), channels_(channels) {
        if (height <= 0 || width <= 0 || channels <= 0) {
            throw InvalidImage("image dimensions must be positive");
        }
        pixels_.assign(static_cast<std::size_t>(height) * width * channels, fill);
    }

    int height() const noexcept { return height_; }
    int width() const noexcept { return width_; }
    int channels() const noexcept { return channels_; }
    bool empty() const noexcept { return pixels_.empty(); }
    std::size_t size() const noexcept { return pixels_.size(); }

    double& at(int row, int col, int ch) { return pixels_[index(row, col, ch)]; }
    double at(int row, int col, int ch) const { return pixels_[index(row, col, ch)]; }

    std::span<double> pixels() noexcept { return pixels_; }
    std::span<const double> pixels() const noexcept { return pixels_; }

    bool all_finite() const {
        for (double v : pixels_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    /// True when every pixel lies in [0, 1].
    bool in_unit_range() const {
        for (double v : pixels_)
            if (!(v >= 0.0 && v <= 1.0)) return false;
        return true;
    }

    friend bool operator==(const Image&, const Image&) = default;

private:
    std::size_t index(int row, int col, int ch) const {
        return (static_cast<std::size_t>(row) * width_ + col) * channels_ + ch;
    }

    int height_ = 0;
    int width_ = 0;
    int channels_ = 0;
    std::vector<double> pixels_;
};

}  // namespace pici

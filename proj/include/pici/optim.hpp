#pragma once

#include "pici/core.hpp"
#include "pici/nn.hpp"

#include <cmath>
#include <vector>

namespace pici {

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Adam with bias correction and per-parameter step counters, so a parameter
/// that starts updating late is corrected from its own first step.
class Adam {
public:
    Adam() = default;
    Adam(const AdamConfig& cfg, const ParamStore& params) : cfg_(cfg) {
        m_ = params.zeros_like();
        v_ = params.zeros_like();
        steps_.assign(params.size(), 0);
    }

    const AdamConfig& config() const noexcept { return cfg_; }

    /// Updates parameter i from gradient g[i].
    void step(ParamStore& params, std::size_t i, const Mat& grad) {
        const long long t = ++steps_[i];
        m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * grad;
        v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * grad.cwiseAbs2();
        const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t));
        const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t));
        params[i].array() -= cfg_.lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + cfg_.eps);
    }

    std::vector<Mat>& first_moments() noexcept { return m_; }
    std::vector<Mat>& second_moments() noexcept { return v_; }
    std::vector<long long>& steps() noexcept { return steps_; }
    const std::vector<Mat>& first_moments() const noexcept { return m_; }
    const std::vector<Mat>& second_moments() const noexcept { return v_; }
    const std::vector<long long>& steps() const noexcept { return steps_; }

private:
    AdamConfig cfg_;
    std::vector<Mat> m_, v_;
    std::vector<long long> steps_;
};

}  // namespace pici

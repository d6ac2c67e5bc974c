#pragma once

// Transformer building blocks with explicit forward caches and backward passes.
// Parameters live in a ParamStore and layers refer to them by index, so one
// gradient buffer (Grads) mirrors the whole model.

#include "pici/core.hpp"
#include "pici/rng.hpp"

#include <cmath>
#include <numbers>
#include <string>
#include <unordered_map>
#include <vector>

namespace pici {

using Grads = std::vector<Mat>;

class ParamStore {
public:
    std::size_t add(std::string name, Mat value) {
        if (index_.contains(name)) throw ConfigError("duplicate parameter name: " + name);
        index_.emplace(name, values_.size());
        names_.push_back(std::move(name));
        values_.push_back(std::move(value));
        return values_.size() - 1;
    }

    std::size_t size() const noexcept { return values_.size(); }
    const std::string& name(std::size_t i) const { return names_[i]; }
    const std::vector<std::string>& names() const noexcept { return names_; }
    Mat& operator[](std::size_t i) { return values_[i]; }
    const Mat& operator[](std::size_t i) const { return values_[i]; }

    std::size_t index_of(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw ConfigError("unknown parameter: " + name);
        return it->second;
    }
    bool contains(const std::string& name) const { return index_.contains(name); }

    Grads zeros_like() const {
        Grads g;
        g.reserve(values_.size());
        for (const Mat& v : values_) g.push_back(Mat::Zero(v.rows(), v.cols()));
        return g;
    }

    std::size_t scalar_count() const {
        std::size_t n = 0;
        for (const Mat& v : values_) n += static_cast<std::size_t>(v.size());
        return n;
    }

    bool all_finite() const {
        for (const Mat& v : values_)
            if (!v.allFinite()) return false;
        return true;
    }

private:
    std::vector<std::string> names_;
    std::vector<Mat> values_;
    std::unordered_map<std::string, std::size_t> index_;
};

inline void add_into(Grads& dst, const Grads& src) {
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

inline Mat truncated_normal(Rng& rng, Eigen::Index rows, Eigen::Index cols, double std) {
    Mat m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.truncated_normal(std);
    return m;
}

// ---------------------------------------------------------------------------

struct Linear {
    std::size_t w = 0, b = 0;

    static Linear create(ParamStore& ps, const std::string& name, int in, int out, Rng& rng, double init_std) {
        Linear l;
        l.w = ps.add(name + ".weight", truncated_normal(rng, in, out, init_std));
        l.b = ps.add(name + ".bias", Mat::Zero(1, out));
        return l;
    }

    Mat forward(const ParamStore& ps, const Mat& x) const {
        Mat y = x * ps[w];
        y.rowwise() += ps[b].row(0);
        return y;
    }

    /// Accumulates weight/bias gradients, returns d input.
    Mat backward(const ParamStore& ps, const Mat& x, const Mat& dy, Grads& g) const {
        g[w].noalias() += x.transpose() * dy;
        g[b].row(0) += dy.colwise().sum();
        return dy * ps[w].transpose();
    }
};

struct LayerNorm {
    static constexpr double eps = 1e-6;
    std::size_t gamma = 0, beta = 0;

    struct Cache {
        Mat xhat;
        Eigen::VectorXd inv_std;
    };

    static LayerNorm create(ParamStore& ps, const std::string& name, int dim) {
        LayerNorm ln;
        ln.gamma = ps.add(name + ".weight", Mat::Ones(1, dim));
        ln.beta = ps.add(name + ".bias", Mat::Zero(1, dim));
        return ln;
    }

    Mat forward(const ParamStore& ps, const Mat& x, Cache& cache) const {
        const Eigen::Index n = x.cols();
        cache.xhat.resize(x.rows(), n);
        cache.inv_std.resize(x.rows());
        for (Eigen::Index r = 0; r < x.rows(); ++r) {
            const double mu = x.row(r).mean();
            const double var = (x.row(r).array() - mu).square().sum() / static_cast<double>(n);
            const double is = 1.0 / std::sqrt(var + eps);
            cache.inv_std(r) = is;
            cache.xhat.row(r) = (x.row(r).array() - mu) * is;
        }
        Mat y = cache.xhat.array().rowwise() * ps[gamma].row(0).array();
        y.rowwise() += ps[beta].row(0);
        return y;
    }

    Mat backward(const ParamStore& ps, const Cache& cache, const Mat& dy, Grads& g) const {
        g[gamma].row(0) += (dy.array() * cache.xhat.array()).colwise().sum().matrix();
        g[beta].row(0) += dy.colwise().sum();
        const Mat dxhat = dy.array().rowwise() * ps[gamma].row(0).array();
        Mat dx(dy.rows(), dy.cols());
        for (Eigen::Index r = 0; r < dy.rows(); ++r) {
            const double mean_d = dxhat.row(r).mean();
            const double mean_dx = dxhat.row(r).dot(cache.xhat.row(r)) / static_cast<double>(dy.cols());
            dx.row(r) = cache.inv_std(r) * (dxhat.row(r).array() - mean_d - cache.xhat.row(r).array() * mean_dx);
        }
        return dx;
    }
};

/// Exact (erf) GELU.
inline Mat gelu(const Mat& x) {
    return x.unaryExpr([](double v) { return 0.5 * v * (1.0 + std::erf(v * std::numbers::sqrt2 / 2.0)); });
}

inline Mat gelu_backward(const Mat& x, const Mat& dy) {
    const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
    Mat d = x.unaryExpr([&](double v) {
        const double cdf = 0.5 * (1.0 + std::erf(v * std::numbers::sqrt2 / 2.0));
        return cdf + v * inv_sqrt_2pi * std::exp(-0.5 * v * v);
    });
    return d.cwiseProduct(dy);
}

/// Row-wise softmax, max-shifted.
inline Mat softmax_rows(const Mat& logits) {
    Mat out(logits.rows(), logits.cols());
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
        const double m = logits.row(r).maxCoeff();
        out.row(r) = (logits.row(r).array() - m).exp();
        out.row(r) /= out.row(r).sum();
    }
    return out;
}

/// Given softmax output p and upstream dp, returns d logits.
inline Mat softmax_rows_backward(const Mat& p, const Mat& dp) {
    const Eigen::VectorXd inner = (p.array() * dp.array()).rowwise().sum();
    Mat d = dp;
    d.colwise() -= inner;
    return p.cwiseProduct(d);
}

// ---------------------------------------------------------------------------

struct MultiHeadAttention {
    Linear qkv, proj;
    int dim = 0;
    int heads = 1;

    struct Cache {
        Mat x;
        Mat qkv;
        std::vector<Mat> attn;
        Mat merged;
    };

    static MultiHeadAttention create(ParamStore& ps, const std::string& name, int dim, int heads, Rng& rng,
                                     double init_std) {
        if (heads <= 0 || dim % heads != 0) throw ConfigError("attention dim must be divisible by heads");
        MultiHeadAttention a;
        a.dim = dim;
        a.heads = heads;
        a.qkv = Linear::create(ps, name + ".qkv", dim, 3 * dim, rng, init_std);
        a.proj = Linear::create(ps, name + ".proj", dim, dim, rng, init_std);
        return a;
    }

    Mat forward(const ParamStore& ps, const Mat& x, Cache& cache) const {
        const int hd = dim / heads;
        const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
        cache.x = x;
        cache.qkv = qkv.forward(ps, x);
        cache.attn.resize(static_cast<std::size_t>(heads));
        cache.merged.resize(x.rows(), dim);
        for (int h = 0; h < heads; ++h) {
            const auto q = cache.qkv.middleCols(h * hd, hd);
            const auto k = cache.qkv.middleCols(dim + h * hd, hd);
            const auto v = cache.qkv.middleCols(2 * dim + h * hd, hd);
            Mat scores = (q * k.transpose()) * scale;
            cache.attn[static_cast<std::size_t>(h)] = softmax_rows(scores);
            cache.merged.middleCols(h * hd, hd).noalias() = cache.attn[static_cast<std::size_t>(h)] * v;
        }
        return proj.forward(ps, cache.merged);
    }

    Mat backward(const ParamStore& ps, const Cache& cache, const Mat& dy, Grads& g) const {
        const int hd = dim / heads;
        const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
        const Mat dmerged = proj.backward(ps, cache.merged, dy, g);
        Mat dqkv(cache.qkv.rows(), cache.qkv.cols());
        for (int h = 0; h < heads; ++h) {
            const Mat& a = cache.attn[static_cast<std::size_t>(h)];
            const auto q = cache.qkv.middleCols(h * hd, hd);
            const auto k = cache.qkv.middleCols(dim + h * hd, hd);
            const auto v = cache.qkv.middleCols(2 * dim + h * hd, hd);
            const auto dout = dmerged.middleCols(h * hd, hd);
            const Mat da = dout * v.transpose();
            const Mat ds = softmax_rows_backward(a, da) * scale;
            dqkv.middleCols(h * hd, hd).noalias() = ds * k;
            dqkv.middleCols(dim + h * hd, hd).noalias() = ds.transpose() * q;
            dqkv.middleCols(2 * dim + h * hd, hd).noalias() = a.transpose() * dout;
        }
        return qkv.backward(ps, cache.x, dqkv, g);
    }
};

/// Pre-norm Transformer block: x + attn(ln1(x)), then + mlp(ln2(.)) with a 4x GELU MLP.
struct TransformerBlock {
    LayerNorm ln1, ln2;
    MultiHeadAttention attn;
    Linear fc1, fc2;

    struct Cache {
        LayerNorm::Cache ln1, ln2;
        MultiHeadAttention::Cache attn;
        Mat attn_in, mlp_in, hidden, activated;
    };

    static TransformerBlock create(ParamStore& ps, const std::string& name, int dim, int heads, Rng& rng,
                                   double init_std) {
        TransformerBlock b;
        b.ln1 = LayerNorm::create(ps, name + ".norm1", dim);
        b.attn = MultiHeadAttention::create(ps, name + ".attn", dim, heads, rng, init_std);
        b.ln2 = LayerNorm::create(ps, name + ".norm2", dim);
        b.fc1 = Linear::create(ps, name + ".mlp.fc1", dim, 4 * dim, rng, init_std);
        b.fc2 = Linear::create(ps, name + ".mlp.fc2", 4 * dim, dim, rng, init_std);
        return b;
    }

    Mat forward(const ParamStore& ps, const Mat& x, Cache& c) const {
        c.attn_in = ln1.forward(ps, x, c.ln1);
        Mat x1 = x + attn.forward(ps, c.attn_in, c.attn);
        c.mlp_in = ln2.forward(ps, x1, c.ln2);
        c.hidden = fc1.forward(ps, c.mlp_in);
        c.activated = gelu(c.hidden);
        return x1 + fc2.forward(ps, c.activated);
    }

    Mat backward(const ParamStore& ps, const Cache& c, const Mat& dy, Grads& g) const {
        const Mat dact = fc2.backward(ps, c.activated, dy, g);
        const Mat dhidden = gelu_backward(c.hidden, dact);
        const Mat dmlp_in = fc1.backward(ps, c.mlp_in, dhidden, g);
        const Mat dx1 = dy + ln2.backward(ps, c.ln2, dmlp_in, g);
        const Mat dattn_in = attn.backward(ps, c.attn, dx1, g);
        return dx1 + ln1.backward(ps, c.ln1, dattn_in, g);
    }
};

}  // namespace pici

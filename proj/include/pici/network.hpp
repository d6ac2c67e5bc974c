#pragma once

// Masked-patch Transformer autoencoder with instance and cluster projection heads.
//
// Parameter names are prefixed by the sub-network they belong to
// ("encoder.", "decoder.", "instance_head.", "cluster_head."); the trainer
// selects update sets by these prefixes.

#include "pici/core.hpp"
#include "pici/masking.hpp"
#include "pici/nn.hpp"
#include "pici/rng.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace pici {

struct NetworkConfig {
    int embed_dim = 384;
    int n_layers = 6;
    int n_heads = 12;
    int decoder_dim = 512;
    int decoder_layers = 8;
    int decoder_heads = 16;
    int patch_size = 16;
    int image_size = 224;
    int instance_dim = 128;
    int n_clusters = 4;
    int channels = 3;

    int grid_side() const noexcept { return image_size / patch_size; }
    int n_patches() const noexcept { return grid_side() * grid_side(); }
    int patch_dim() const noexcept { return patch_size * patch_size * channels; }

    void validate() const {
        if (embed_dim <= 0 || n_layers < 0 || n_heads <= 0 || embed_dim % n_heads != 0)
            throw ConfigError("model: embed_dim must be positive and divisible by heads");
        if (decoder_dim <= 0 || decoder_layers < 0 || decoder_heads <= 0 || decoder_dim % decoder_heads != 0)
            throw ConfigError("model: decoder_dim must be positive and divisible by decoder_heads");
        if (patch_size <= 0 || image_size <= 0 || image_size % patch_size != 0)
            throw ConfigError("model: image_size must be a positive multiple of patch_size");
        if (instance_dim < 1) throw ConfigError("model: instance_dim must be >= 1");
        if (n_clusters < 2) throw ConfigError("model: clusters must be >= 2");
        if (channels != 3) throw ConfigError("model: only 3-channel inputs are supported");
    }

    friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;

    /// Encoder presets; decoder is the 512-dim, 8-block, 16-head MAE decoder.
    static NetworkConfig vit_tiny(int clusters) { return with_encoder(192, 4, 12, clusters); }
    static NetworkConfig vit_small(int clusters) { return with_encoder(384, 6, 12, clusters); }
    static NetworkConfig vit_base(int clusters) { return with_encoder(768, 12, 12, clusters); }

    /// Small configuration used by the tests and the toy end-to-end run.
    static NetworkConfig tiny(int clusters) {
        NetworkConfig c;
        c.embed_dim = 32;
        c.n_layers = 2;
        c.n_heads = 4;
        c.decoder_dim = 32;
        c.decoder_layers = 2;
        c.decoder_heads = 4;
        c.image_size = 32;
        c.patch_size = 8;
        c.n_clusters = clusters;
        return c;
    }

private:
    static NetworkConfig with_encoder(int dim, int layers, int heads, int clusters) {
        NetworkConfig c;
        c.embed_dim = dim;
        c.n_layers = layers;
        c.n_heads = heads;
        c.n_clusters = clusters;
        return c;
    }
};

enum class ParamGroup { encoder, decoder, instance_head, cluster_head };

inline ParamGroup group_of(std::string_view name) {
    if (name.starts_with("encoder.")) return ParamGroup::encoder;
    if (name.starts_with("decoder.")) return ParamGroup::decoder;
    if (name.starts_with("instance_head.")) return ParamGroup::instance_head;
    if (name.starts_with("cluster_head.")) return ParamGroup::cluster_head;
    throw ConfigError("parameter outside every group: " + std::string(name));
}

/// Forward state of one image through the encoder.
struct EncoderPass {
    Mat visible_patches;  // |visible| x patch_dim
    std::vector<TransformerBlock::Cache> blocks;
    LayerNorm::Cache norm;
    Mat output;  // (1 + |visible|) x embed_dim, row 0 is the class token

    RowVec class_token() const { return output.row(0); }
    Mat visible_tokens() const { return output.bottomRows(output.rows() - 1); }
};

struct DecoderPass {
    Mat encoded;  // encoder output fed to the decoder embedding
    std::vector<TransformerBlock::Cache> blocks;
    LayerNorm::Cache norm;
    Mat normed;
    Mat prediction;  // n_patches x patch_dim
};

struct InstanceHeadPass {
    Mat input, hidden, activated, raw;
    Eigen::VectorXd scale;  // sqrt(|raw_i|^2 + eps^2)
    Mat z;
};

struct ClusterHeadPass {
    Mat input, hidden, activated;
    Mat probs;
};

class Network {
public:
    /// Added in quadrature to embedding norms before L2 normalization.
    static constexpr double norm_eps = 1e-12;

    Network() = default;

    explicit Network(const NetworkConfig& cfg, std::uint64_t seed = 0, double init_std = 0.02) : cfg_(cfg) {
        cfg_.validate();
        Rng rng(seed);
        const int d = cfg_.embed_dim, dd = cfg_.decoder_dim, n = cfg_.n_patches(), p = cfg_.patch_dim();

        patch_embed_ = Linear::create(params_, "encoder.patch_embed", p, d, rng, init_std);
        cls_token_ = params_.add("encoder.cls_token", normal_init(rng, 1, d, init_std));
        enc_pos_ = params_.add("encoder.pos_embed", truncated_normal(rng, n + 1, d, init_std));
        for (int i = 0; i < cfg_.n_layers; ++i)
            enc_blocks_.push_back(TransformerBlock::create(params_, "encoder.blocks." + std::to_string(i), d,
                                                           cfg_.n_heads, rng, init_std));
        enc_norm_ = LayerNorm::create(params_, "encoder.norm", d);

        dec_embed_ = Linear::create(params_, "decoder.embed", d, dd, rng, init_std);
        mask_token_ = params_.add("decoder.mask_token", normal_init(rng, 1, dd, init_std));
        dec_pos_ = params_.add("decoder.pos_embed", truncated_normal(rng, n + 1, dd, init_std));
        for (int i = 0; i < cfg_.decoder_layers; ++i)
            dec_blocks_.push_back(TransformerBlock::create(params_, "decoder.blocks." + std::to_string(i), dd,
                                                           cfg_.decoder_heads, rng, init_std));
        dec_norm_ = LayerNorm::create(params_, "decoder.norm", dd);
        dec_pred_ = Linear::create(params_, "decoder.pred", dd, p, rng, init_std);

        inst_fc1_ = Linear::create(params_, "instance_head.fc1", d, d, rng, init_std);
        inst_fc2_ = Linear::create(params_, "instance_head.fc2", d, cfg_.instance_dim, rng, init_std);
        clu_fc1_ = Linear::create(params_, "cluster_head.fc1", d, d, rng, init_std);
        clu_fc2_ = Linear::create(params_, "cluster_head.fc2", d, cfg_.n_clusters, rng, init_std);
    }

    const NetworkConfig& config() const noexcept { return cfg_; }
    ParamStore& params() noexcept { return params_; }
    const ParamStore& params() const noexcept { return params_; }
    Grads zero_grads() const { return params_.zeros_like(); }

    // -- encoder -------------------------------------------------------------

    EncoderPass encode(const PatchSequence& seq, const MaskPlan& plan) const {
        check_inputs(seq, plan);
        EncoderPass pass;
        const auto& vis = plan.visible_idx;
        const Eigen::Index nv = static_cast<Eigen::Index>(vis.size());
        pass.visible_patches.resize(nv, cfg_.patch_dim());
        for (Eigen::Index i = 0; i < nv; ++i) pass.visible_patches.row(i) = seq.patches.row(vis[static_cast<std::size_t>(i)]);

        const Mat& pos = params_[enc_pos_];
        Mat x(nv + 1, cfg_.embed_dim);
        x.row(0) = params_[cls_token_].row(0) + pos.row(0);
        if (nv > 0) x.bottomRows(nv) = patch_embed_.forward(params_, pass.visible_patches);
        for (Eigen::Index i = 0; i < nv; ++i) x.row(i + 1) += pos.row(vis[static_cast<std::size_t>(i)] + 1);

        pass.blocks.resize(enc_blocks_.size());
        for (std::size_t b = 0; b < enc_blocks_.size(); ++b) x = enc_blocks_[b].forward(params_, x, pass.blocks[b]);
        pass.output = enc_norm_.forward(params_, x, pass.norm);
        return pass;
    }

    /// Back-propagates d(output) into grads; returns d(visible patches).
    Mat encode_backward(const EncoderPass& pass, const MaskPlan& plan, const Mat& d_output, Grads& g) const {
        Mat dx = enc_norm_.backward(params_, pass.norm, d_output, g);
        for (std::size_t b = enc_blocks_.size(); b-- > 0;) dx = enc_blocks_[b].backward(params_, pass.blocks[b], dx, g);

        const auto& vis = plan.visible_idx;
        const Eigen::Index nv = static_cast<Eigen::Index>(vis.size());
        g[cls_token_].row(0) += dx.row(0);
        g[enc_pos_].row(0) += dx.row(0);
        for (Eigen::Index i = 0; i < nv; ++i) g[enc_pos_].row(vis[static_cast<std::size_t>(i)] + 1) += dx.row(i + 1);
        if (nv == 0) return Mat(0, cfg_.patch_dim());
        return patch_embed_.backward(params_, pass.visible_patches, dx.bottomRows(nv), g);
    }

    // -- decoder -------------------------------------------------------------

    /// Full-grid pixel prediction from the encoder output (class token + visible tokens).
    DecoderPass decode(const Mat& encoded, const MaskPlan& plan) const {
        const int n = cfg_.n_patches();
        if (plan.n_patches() != n || encoded.rows() != static_cast<Eigen::Index>(plan.visible_idx.size()) + 1 ||
            encoded.cols() != cfg_.embed_dim)
            throw ConfigError("decode: encoder output inconsistent with mask plan");
        DecoderPass pass;
        pass.encoded = encoded;
        const Mat embedded = dec_embed_.forward(params_, encoded);

        Mat x(n + 1, cfg_.decoder_dim);
        x.row(0) = embedded.row(0);
        for (int k = 0; k < n; ++k) x.row(k + 1) = params_[mask_token_].row(0);
        for (std::size_t i = 0; i < plan.visible_idx.size(); ++i)
            x.row(plan.visible_idx[i] + 1) = embedded.row(static_cast<Eigen::Index>(i) + 1);
        x += params_[dec_pos_];

        pass.blocks.resize(dec_blocks_.size());
        for (std::size_t b = 0; b < dec_blocks_.size(); ++b) x = dec_blocks_[b].forward(params_, x, pass.blocks[b]);
        const Mat normed = dec_norm_.forward(params_, x, pass.norm);
        pass.normed = normed.bottomRows(n);
        pass.prediction = dec_pred_.forward(params_, pass.normed);
        return pass;
    }

    PatchSequence prediction_sequence(const DecoderPass& pass) const {
        PatchSequence seq;
        seq.patches = pass.prediction;
        seq.patch_size = cfg_.patch_size;
        seq.grid_rows = seq.grid_cols = cfg_.grid_side();
        seq.channels = cfg_.channels;
        return seq;
    }

    /// Returns d(encoder output).
    Mat decode_backward(const DecoderPass& pass, const MaskPlan& plan, const Mat& d_prediction, Grads& g) const {
        const int n = cfg_.n_patches();
        Mat dnormed = Mat::Zero(n + 1, cfg_.decoder_dim);
        dnormed.bottomRows(n) = dec_pred_.backward(params_, pass.normed, d_prediction, g);
        Mat dx = dec_norm_.backward(params_, pass.norm, dnormed, g);
        for (std::size_t b = dec_blocks_.size(); b-- > 0;) dx = dec_blocks_[b].backward(params_, pass.blocks[b], dx, g);

        g[dec_pos_] += dx;
        Mat dembedded(static_cast<Eigen::Index>(plan.visible_idx.size()) + 1, cfg_.decoder_dim);
        dembedded.row(0) = dx.row(0);
        for (int k : plan.masked_idx) g[mask_token_].row(0) += dx.row(k + 1);
        for (std::size_t i = 0; i < plan.visible_idx.size(); ++i)
            dembedded.row(static_cast<Eigen::Index>(i) + 1) = dx.row(plan.visible_idx[i] + 1);
        return dec_embed_.backward(params_, pass.encoded, dembedded, g);
    }

    // -- projection heads ----------------------------------------------------

    /// Two-layer MLP followed by row-wise L2 normalization.
    InstanceHeadPass project_instance(const Mat& h) const {
        check_head_input(h);
        InstanceHeadPass pass;
        pass.input = h;
        pass.hidden = inst_fc1_.forward(params_, h);
        pass.activated = gelu(pass.hidden);
        pass.raw = inst_fc2_.forward(params_, pass.activated);
        pass.scale = (pass.raw.rowwise().squaredNorm().array() + norm_eps * norm_eps).sqrt();
        pass.z = pass.raw.array().colwise() / pass.scale.array();
        return pass;
    }

    Mat project_instance_backward(const InstanceHeadPass& pass, const Mat& dz, Grads& g) const {
        Mat draw(dz.rows(), dz.cols());
        for (Eigen::Index r = 0; r < dz.rows(); ++r) {
            const double s = pass.scale(r);
            draw.row(r) = dz.row(r) / s - pass.raw.row(r) * (pass.raw.row(r).dot(dz.row(r)) / (s * s * s));
        }
        const Mat dact = inst_fc2_.backward(params_, pass.activated, draw, g);
        return inst_fc1_.backward(params_, pass.input, gelu_backward(pass.hidden, dact), g);
    }

    /// Two-layer MLP followed by row-wise softmax.
    ClusterHeadPass project_cluster(const Mat& h) const {
        check_head_input(h);
        ClusterHeadPass pass;
        pass.input = h;
        pass.hidden = clu_fc1_.forward(params_, h);
        pass.activated = gelu(pass.hidden);
        pass.probs = softmax_rows(clu_fc2_.forward(params_, pass.activated));
        return pass;
    }

    Mat project_cluster_backward(const ClusterHeadPass& pass, const Mat& dprobs, Grads& g) const {
        const Mat dlogits = softmax_rows_backward(pass.probs, dprobs);
        const Mat dact = clu_fc2_.backward(params_, pass.activated, dlogits, g);
        return clu_fc1_.backward(params_, pass.input, gelu_backward(pass.hidden, dact), g);
    }

    /// Last-layer attention maps of a pass, for inspection.
    const std::vector<Mat>& attention_maps(const EncoderPass& pass, std::size_t block) const {
        return pass.blocks.at(block).attn.attn;
    }

private:
    static Mat normal_init(Rng& rng, Eigen::Index rows, Eigen::Index cols, double std) {
        Mat m(rows, cols);
        for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal(0.0, std);
        return m;
    }

    void check_inputs(const PatchSequence& seq, const MaskPlan& plan) const {
        if (seq.patches.rows() != cfg_.n_patches() || seq.patches.cols() != cfg_.patch_dim() ||
            seq.patch_size != cfg_.patch_size)
            throw ConfigError("encode: patch sequence does not match the network configuration");
        if (plan.n_patches() != cfg_.n_patches()) throw ConfigError("encode: mask plan does not match the patch grid");
        for (int v : plan.visible_idx)
            if (v < 0 || v >= cfg_.n_patches()) throw ConfigError("encode: visible index out of range");
    }

    void check_head_input(const Mat& h) const {
        if (h.cols() != cfg_.embed_dim) throw ConfigError("projector: input width must equal embed_dim");
        if (!h.allFinite()) throw InputError("projector: non-finite input");
    }

    NetworkConfig cfg_;
    ParamStore params_;

    Linear patch_embed_;
    std::size_t cls_token_ = 0, enc_pos_ = 0;
    std::vector<TransformerBlock> enc_blocks_;
    LayerNorm enc_norm_;

    Linear dec_embed_;
    std::size_t mask_token_ = 0, dec_pos_ = 0;
    std::vector<TransformerBlock> dec_blocks_;
    LayerNorm dec_norm_;
    Linear dec_pred_;

    Linear inst_fc1_, inst_fc2_, clu_fc1_, clu_fc2_;
};

}  // namespace pici

#pragma once

// Three-stage training: masked reconstruction pre-training, joint reconstruction
// plus dual contrastive training, and boosting with cross-level alignment.
//
// All randomness is derived from (seed, stage, epoch, item, view) counters, so an
// epoch is a pure function of the training state and the dataset.

#include "pici/augment.hpp"
#include "pici/core.hpp"
#include "pici/crosslevel.hpp"
#include "pici/data.hpp"
#include "pici/losses.hpp"
#include "pici/masking.hpp"
#include "pici/metrics.hpp"
#include "pici/network.hpp"
#include "pici/optim.hpp"
#include "pici/parallel.hpp"
#include "pici/rng.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace pici {

enum class Stage { pretrain = 0, train = 1, boost = 2, done = 3 };

inline std::string_view stage_name(Stage s) {
    switch (s) {
        case Stage::pretrain: return "pretrain";
        case Stage::train: return "train";
        case Stage::boost: return "boost";
        default: return "done";
    }
}

inline Stage parse_stage(std::string_view s) {
    if (s == "pretrain") return Stage::pretrain;
    if (s == "train") return Stage::train;
    if (s == "boost") return Stage::boost;
    if (s == "done") return Stage::done;
    throw ConfigError("unknown stage: " + std::string(s));
}

struct TrainConfig {
    int e1 = 200;
    int e2 = 800;
    int e3 = 50;
    int batch_size = 96;
    AdamConfig adam{};
    std::uint64_t seed = 0;
    Temperatures temps{};
    double mask_ratio = 0.5;
    bool mask_shared = false;
    bool include_self = false;
    bool recon_all_patches = false;
    bool eps_column = false;
    int kmeans_max_iters = 100;
    AugmentPolicy strong = AugmentPolicy::strong(224);
    /// When set, the normalization constants are taken from the training data.
    bool normalize_from_data = true;
    std::array<double, 3> normalize_mean{0.0, 0.0, 0.0};
    std::array<double, 3> normalize_std{1.0, 1.0, 1.0};
    NmiNorm nmi_norm = NmiNorm::sqrt;

    int stage_epochs(Stage s) const {
        switch (s) {
            case Stage::pretrain: return e1;
            case Stage::train: return e2;
            case Stage::boost: return e3;
            default: return 0;
        }
    }

    void validate() const {
        if (e1 < 0 || e2 < 0 || e3 < 0) throw ConfigError("train: stage epochs must be >= 0");
        if (batch_size < 1) throw ConfigError("train: batch must be >= 1");
        if ((e2 > 0 || e3 > 0) && batch_size < 2) throw ConfigError("train: batch must be >= 2 for contrastive stages");
        if (!(adam.lr > 0.0)) throw ConfigError("train: lr must be > 0");
        if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 && adam.beta2 < 1.0))
            throw ConfigError("train: adam betas must lie in [0, 1)");
        if (!(adam.eps > 0.0)) throw ConfigError("train: adam eps must be > 0");
        if (kmeans_max_iters < 1) throw ConfigError("train: kmeans_iters must be >= 1");
        if (!(mask_ratio >= 0.0 && mask_ratio < 1.0)) throw ConfigError("mask: ratio must lie in [0, 1)");
        try {
            temps.validate();
        } catch (const InvalidTemperature& e) {
            throw ConfigError(std::string("losses: ") + e.what());
        }
        strong.validate();
        for (double s : normalize_std)
            if (!(s > 0.0)) throw ConfigError("augment: normalization std must be > 0");
    }
};

struct TrainState {
    Network net;
    Adam adam;
    Stage stage = Stage::pretrain;
    int epoch = 0;  // epochs completed in the current stage
};

/// Both views of one item, patchified and masked.
struct ItemViews {
    PatchSequence seq_a, seq_b;
    MaskPlan plan_a, plan_b;
};

struct Prediction {
    Labels labels;
    Mat embeddings;     // N x instance_dim, unit rows
    Mat probabilities;  // N x M
};

struct EpochReport {
    Stage stage = Stage::pretrain;
    int epoch = 0;  // 1-based within the stage
    LossBreakdown losses;
    ClusterScores scores;
};

namespace seed_tag {
inline constexpr std::uint64_t init = 1, augment = 2, mask = 3, batches = 4, kmeans = 5;
}

/// Cluster labels and instance embeddings from unmasked weak views.
inline Prediction predict(const Network& net, const Dataset& data, const AugmentPolicy& weak) {
    const NetworkConfig& nc = net.config();
    const MaskPlan plan = MaskPlan::none(nc.n_patches());
    Mat h(static_cast<Eigen::Index>(data.size()), nc.embed_dim);
    parallel_for(data.size(), [&](std::size_t i) {
        const PatchSequence seq = patchify(weak_augment(data.items[i].image, weak), nc.patch_size);
        h.row(static_cast<Eigen::Index>(i)) = net.encode(seq, plan).class_token();
    });
    Prediction out;
    out.embeddings = net.project_instance(h).z;
    out.probabilities = net.project_cluster(h).probs;
    out.labels = hard_labels(out.probabilities);
    return out;
}

struct BatchGradient {
    LossBreakdown losses;
    Grads grads;
};

/// Loss of one batch and its gradient with respect to every parameter.
///  pretrain: L_PISD
///  train:    L_PISD + L_ins + L_clu
///  boost:    L_ins + L_clu + L_CLI against one-hot targets (rows aligned with views)
inline BatchGradient batch_gradient(const Network& net, const TrainConfig& cfg, const std::vector<ItemViews>& views,
                                    Stage stage, const Mat& targets_a = {}, const Mat& targets_b = {}) {
    const std::size_t n = views.size();
    const bool use_decoder = stage != Stage::boost;
    const bool contrastive = stage != Stage::pretrain;
    const int dim = net.config().embed_dim;

    struct ViewPass {
        EncoderPass enc;
        DecoderPass dec;
        Mat d_pred;
    };
    std::vector<ViewPass> pa(n), pb(n);
    BatchGradient out;
    out.grads = net.zero_grads();
    LossBreakdown& loss = out.losses;

    const Eigen::Index nn = static_cast<Eigen::Index>(n);
    Mat h_a(nn, dim), h_b(nn, dim);
    double recon_a = 0.0, recon_b = 0.0;
    const double recon_scale = 0.5 / static_cast<double>(n);
    auto forward_view = [&](const PatchSequence& seq, const MaskPlan& plan, ViewPass& vp, double& recon) {
        vp.enc = net.encode(seq, plan);
        if (!use_decoder) return;
        vp.dec = net.decode(vp.enc.output, plan);
        const ReconstructionLoss r =
            reconstruction_loss_grad(net.prediction_sequence(vp.dec), seq, plan, cfg.recon_all_patches);
        recon += r.value;
        vp.d_pred = r.d_pred * recon_scale;
    };
    for (std::size_t i = 0; i < n; ++i) {
        forward_view(views[i].seq_a, views[i].plan_a, pa[i], recon_a);
        forward_view(views[i].seq_b, views[i].plan_b, pb[i], recon_b);
        h_a.row(static_cast<Eigen::Index>(i)) = pa[i].enc.class_token();
        h_b.row(static_cast<Eigen::Index>(i)) = pb[i].enc.class_token();
    }
    if (use_decoder) loss.l_pisd = pisd_loss(recon_a / static_cast<double>(n), recon_b / static_cast<double>(n));

    Mat dh_a = Mat::Zero(nn, dim), dh_b = Mat::Zero(nn, dim);
    if (contrastive) {
        const InstanceHeadPass ia = net.project_instance(h_a), ib = net.project_instance(h_b);
        const ClusterHeadPass ca = net.project_cluster(h_a), cb = net.project_cluster(h_b);

        const PairLoss ins = instance_loss_grad(ia.z, ib.z, cfg.temps.tau_i, cfg.include_self);
        const ClusterLoss clu =
            cluster_loss_grad(ca.probs, cb.probs, cfg.temps.tau_c, cfg.include_self, cfg.eps_column ? 1e-8 : 0.0);
        loss.l_ins = ins.value;
        loss.l_clu = clu.value;
        loss.l_entropy = clu.entropy;
        loss.l_picd = loss.l_ins + loss.l_clu;
        Mat dc_a = clu.d_a, dc_b = clu.d_b;
        if (stage == Stage::boost) {
            const PairLoss cli = cli_loss_grad(targets_a, ca.probs, targets_b, cb.probs);
            loss.l_cli = cli.value;
            dc_a += cli.d_a;
            dc_b += cli.d_b;
        }
        dh_a = net.project_instance_backward(ia, ins.d_a, out.grads) + net.project_cluster_backward(ca, dc_a, out.grads);
        dh_b = net.project_instance_backward(ib, ins.d_b, out.grads) + net.project_cluster_backward(cb, dc_b, out.grads);
    }

    auto backward_view = [&](const ViewPass& vp, const MaskPlan& plan, const Mat& dh, Eigen::Index row) {
        Mat d_out = Mat::Zero(vp.enc.output.rows(), vp.enc.output.cols());
        if (use_decoder) d_out = net.decode_backward(vp.dec, plan, vp.d_pred, out.grads);
        d_out.row(0) += dh.row(row);
        net.encode_backward(vp.enc, plan, d_out, out.grads);
    };
    for (std::size_t i = 0; i < n; ++i) {
        backward_view(pa[i], views[i].plan_a, dh_a, static_cast<Eigen::Index>(i));
        backward_view(pb[i], views[i].plan_b, dh_b, static_cast<Eigen::Index>(i));
    }
    return out;
}

class Trainer {
public:
    Trainer(const NetworkConfig& net_cfg, TrainConfig cfg, const Dataset& data) : cfg_(std::move(cfg)), data_(&data) {
        prepare_config();
        state_.net = Network(net_cfg, derive_seed(cfg_.seed, seed_tag::init));
        state_.adam = Adam(cfg_.adam, state_.net.params());
        state_.stage = Stage::pretrain;
        state_.epoch = 0;
        skip_empty_stages();
    }

    /// Resumes from an existing state; normalization constants come from cfg as given.
    Trainer(TrainState state, TrainConfig cfg, const Dataset& data)
        : cfg_(std::move(cfg)), data_(&data), state_(std::move(state)) {
        cfg_.normalize_from_data = false;
        prepare_config();
        skip_empty_stages();
    }

    const TrainConfig& config() const noexcept { return cfg_; }
    TrainState& state() noexcept { return state_; }
    const TrainState& state() const noexcept { return state_; }
    Network& network() noexcept { return state_.net; }
    const Network& network() const noexcept { return state_.net; }
    Stage stage() const noexcept { return state_.stage; }

    AugmentPolicy weak_policy() const {
        AugmentPolicy p = AugmentPolicy::weak(state_.net.config().image_size);
        p.normalize_mean = cfg_.normalize_mean;
        p.normalize_std = cfg_.normalize_std;
        return p;
    }

    AugmentPolicy strong_policy() const {
        AugmentPolicy p = cfg_.strong;
        p.kind = AugmentKind::strong;
        p.target_size = state_.net.config().image_size;
        p.normalize_mean = cfg_.normalize_mean;
        p.normalize_std = cfg_.normalize_std;
        return p;
    }

    /// Views of item `item` for the given stage/epoch (0-based epoch).
    ItemViews make_views(std::size_t item, Stage stage, int epoch) const {
        const auto& img = data_->items.at(item).image;
        const int s = static_cast<int>(stage);
        const NetworkConfig& nc = state_.net.config();
        ItemViews v;
        v.seq_a = patchify(weak_augment(img, weak_policy()), nc.patch_size);
        v.seq_b = patchify(strong_augment(img, strong_policy(), derive_seed(cfg_.seed, seed_tag::augment, s, epoch, item)),
                           nc.patch_size);
        v.plan_a = sample_mask(nc.n_patches(), cfg_.mask_ratio, derive_seed(cfg_.seed, seed_tag::mask, s, epoch, item, 0));
        v.plan_b = cfg_.mask_shared
                       ? v.plan_a
                       : sample_mask(nc.n_patches(), cfg_.mask_ratio, derive_seed(cfg_.seed, seed_tag::mask, s, epoch, item, 1));
        return v;
    }

    std::vector<std::vector<int>> epoch_batches(Stage stage, int epoch) const {
        const bool drop_last = stage != Stage::pretrain;
        return batches(data_->size(), cfg_.batch_size,
                       derive_seed(cfg_.seed, seed_tag::batches, static_cast<int>(stage), epoch), drop_last);
    }

    LossBreakdown pretrain_epoch() { return checked_epoch(Stage::pretrain); }
    LossBreakdown train_epoch() { return checked_epoch(Stage::train); }
    LossBreakdown boost_epoch() { return checked_epoch(Stage::boost); }

    /// Runs one epoch of whatever stage is current.
    LossBreakdown run_epoch() {
        if (state_.stage == Stage::done) throw StageError("training already finished");
        return checked_epoch(state_.stage);
    }

    Prediction predict(const Dataset& data) const { return pici::predict(state_.net, data, weak_policy()); }

    ClusterScores evaluate(const Dataset& data) const {
        return score_clustering(data.labels(), predict(data).labels, cfg_.nmi_norm);
    }

    /// One-hot alignment targets for every item, per view, for a boosting epoch.
    std::pair<Mat, Mat> boost_targets(int epoch) const {
        const std::size_t n = data_->size();
        const NetworkConfig& nc = state_.net.config();
        if (n < static_cast<std::size_t>(nc.n_clusters)) throw InputError("boosting needs at least M items");
        Mat h_a(static_cast<Eigen::Index>(n), nc.embed_dim), h_b(static_cast<Eigen::Index>(n), nc.embed_dim);
        parallel_for(n, [&](std::size_t i) {
            const ItemViews v = make_views(i, Stage::boost, epoch);
            h_a.row(static_cast<Eigen::Index>(i)) = state_.net.encode(v.seq_a, v.plan_a).class_token();
            h_b.row(static_cast<Eigen::Index>(i)) = state_.net.encode(v.seq_b, v.plan_b).class_token();
        });
        auto targets = [&](const Mat& h, int view) {
            const Mat z = state_.net.project_instance(h).z;
            const Labels q = hard_labels(state_.net.project_cluster(h).probs);
            const Labels p = kmeans(z, nc.n_clusters, derive_seed(cfg_.seed, seed_tag::kmeans, epoch, view),
                                    cfg_.kmeans_max_iters)
                                 .labels;
            return modify_pseudo(p, match_clusters(p, q, nc.n_clusters));
        };
        return {targets(h_a, 0), targets(h_b, 1)};
    }

private:
    void prepare_config() {
        if (cfg_.normalize_from_data) {
            cfg_.normalize_mean = data_->channel_mean();
            cfg_.normalize_std = data_->channel_std();
            cfg_.normalize_from_data = false;
        }
        cfg_.validate();
    }

    void skip_empty_stages() {
        while (state_.stage != Stage::done && state_.epoch >= cfg_.stage_epochs(state_.stage)) {
            state_.stage = static_cast<Stage>(static_cast<int>(state_.stage) + 1);
            state_.epoch = 0;
        }
    }

    static bool updates(Stage stage, ParamGroup g) {
        switch (stage) {
            case Stage::pretrain: return g == ParamGroup::encoder || g == ParamGroup::decoder;
            case Stage::train: return true;
            case Stage::boost: return g != ParamGroup::decoder;
            default: return false;
        }
    }

    LossBreakdown checked_epoch(Stage stage) {
        if (state_.stage != stage)
            throw StageError("cannot run a " + std::string(stage_name(stage)) + " epoch while in stage " +
                             std::string(stage_name(state_.stage)));
        const int epoch = state_.epoch;
        std::pair<Mat, Mat> targets;
        if (stage == Stage::boost) targets = boost_targets(epoch);

        const auto plan = epoch_batches(stage, epoch);
        LossBreakdown sum;
        for (std::size_t b = 0; b < plan.size(); ++b) {
            const LossBreakdown l = step_batch(plan[b], stage, epoch, b, targets);
            sum.l_pisd += l.l_pisd;
            sum.l_ins += l.l_ins;
            sum.l_clu += l.l_clu;
            sum.l_entropy += l.l_entropy;
            sum.l_cli += l.l_cli;
        }
        const double nb = plan.empty() ? 1.0 : static_cast<double>(plan.size());
        LossBreakdown mean{sum.l_pisd / nb, sum.l_ins / nb, sum.l_clu / nb, sum.l_entropy / nb, 0.0, sum.l_cli / nb};
        mean.l_picd = mean.l_ins + mean.l_clu;

        ++state_.epoch;
        skip_empty_stages();
        return mean;
    }

    LossBreakdown step_batch(const std::vector<int>& items, Stage stage, int epoch, std::size_t batch_index,
                             const std::pair<Mat, Mat>& targets) {
        std::vector<ItemViews> views(items.size());
        parallel_for(items.size(), [&](std::size_t i) {
            views[i] = make_views(static_cast<std::size_t>(items[i]), stage, epoch);
        });
        Mat t_a, t_b;
        if (stage == Stage::boost) {
            const Eigen::Index m = state_.net.config().n_clusters;
            t_a.resize(static_cast<Eigen::Index>(items.size()), m);
            t_b.resize(static_cast<Eigen::Index>(items.size()), m);
            for (std::size_t i = 0; i < items.size(); ++i) {
                t_a.row(static_cast<Eigen::Index>(i)) = targets.first.row(items[i]);
                t_b.row(static_cast<Eigen::Index>(i)) = targets.second.row(items[i]);
            }
        }
        BatchGradient bg = batch_gradient(state_.net, cfg_, views, stage, t_a, t_b);
        const double total = bg.losses.l_pisd + bg.losses.l_picd + bg.losses.l_cli;
        if (!std::isfinite(total)) throw DivergenceError("non-finite loss in " + std::string(stage_name(stage)), batch_index);

        ParamStore& params = state_.net.params();
        for (std::size_t p = 0; p < params.size(); ++p)
            if (updates(stage, group_of(params.name(p)))) state_.adam.step(params, p, bg.grads[p]);
        if (!params.all_finite())
            throw DivergenceError("non-finite parameters in " + std::string(stage_name(stage)), batch_index);
        return bg.losses;
    }

    TrainConfig cfg_;
    const Dataset* data_;
    TrainState state_;
};

}  // namespace pici

#pragma once

// Command implementations behind tools/pici. Each returns the process exit code:
// 0 success, 2 usage/config/checkpoint problems, 3 numerical divergence.

#include "pici/checkpoint.hpp"
#include "pici/config.hpp"
#include "pici/data.hpp"
#include "pici/image_folder.hpp"
#include "pici/trainer.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace pici {

namespace fs = std::filesystem;

inline constexpr int exit_ok = 0;
inline constexpr int exit_config = 2;
inline constexpr int exit_divergence = 3;

inline constexpr const char* metrics_header = "stage,epoch,l_pisd,l_ins,l_clu,l_cli,nmi,acc,ari,wall_seconds";

inline Dataset load_dataset(const DataSpec& spec) {
    if (spec.synth) return synth_blobs(spec.synth_classes, spec.synth_per_class, spec.synth_image_size, spec.synth_seed);
    FolderLoadReport report;
    Dataset ds = load_image_folder(spec.path, &report);
    if (report.skipped > 0) std::cerr << "warning: skipped " << report.skipped << " unreadable image file(s)\n";
    return ds;
}

// -- checkpoints of the training state ----------------------------------------

/// `cfg` must carry resolved normalization constants.
inline Checkpoint make_checkpoint(const RunConfig& cfg, const TrainState& st) {
    Checkpoint ck;
    ck.config_text = cfg.to_text() + "state.stage = " + std::string(stage_name(st.stage)) +
                     "\nstate.epoch = " + std::to_string(st.epoch) + "\n";
    const ParamStore& ps = st.net.params();
    for (std::size_t i = 0; i < ps.size(); ++i) ck.arrays.emplace_back(ps.name(i), ps[i]);
    for (std::size_t i = 0; i < ps.size(); ++i) ck.arrays.emplace_back("adam.m." + ps.name(i), st.adam.first_moments()[i]);
    for (std::size_t i = 0; i < ps.size(); ++i) ck.arrays.emplace_back("adam.v." + ps.name(i), st.adam.second_moments()[i]);
    Mat steps(1, static_cast<Eigen::Index>(ps.size()));
    for (std::size_t i = 0; i < ps.size(); ++i) steps(0, static_cast<Eigen::Index>(i)) = static_cast<double>(st.adam.steps()[i]);
    ck.arrays.emplace_back("adam.steps", steps);
    return ck;
}

struct LoadedCheckpoint {
    RunConfig config;
    TrainState state;
};

/// Rebuilds the network (and optimizer state when present) from a checkpoint.
inline LoadedCheckpoint restore_checkpoint(const Checkpoint& ck) {
    LoadedCheckpoint out;
    out.config = RunConfig::from_text(ck.config_text);
    out.config.model.validate();
    std::string stage = "pretrain", epoch = "0";
    for (const auto& [k, v] : detail::parse_key_values(ck.config_text)) {
        if (k == "state.stage") stage = v;
        if (k == "state.epoch") epoch = v;
    }
    out.state.stage = parse_stage(stage);
    out.state.epoch = detail::parse_number<int>("state.epoch", epoch);

    out.state.net = Network(out.config.model);
    ParamStore& ps = out.state.net.params();
    for (std::size_t i = 0; i < ps.size(); ++i) {
        const Mat* m = ck.find(ps.name(i));
        if (!m) throw CheckpointError("checkpoint lacks parameter " + ps.name(i));
        if (m->rows() != ps[i].rows() || m->cols() != ps[i].cols())
            throw CheckpointError("checkpoint parameter " + ps.name(i) + " has the wrong shape");
        ps[i] = *m;
    }
    out.state.adam = Adam(out.config.train.adam, ps);
    if (const Mat* steps = ck.find("adam.steps"); steps && steps->cols() == static_cast<Eigen::Index>(ps.size())) {
        for (std::size_t i = 0; i < ps.size(); ++i) {
            const Mat* m = ck.find("adam.m." + ps.name(i));
            const Mat* v = ck.find("adam.v." + ps.name(i));
            if (!m || !v) throw CheckpointError("checkpoint lacks optimizer moments for " + ps.name(i));
            out.state.adam.first_moments()[i] = *m;
            out.state.adam.second_moments()[i] = *v;
            out.state.adam.steps()[i] = static_cast<long long>((*steps)(0, static_cast<Eigen::Index>(i)));
        }
    }
    return out;
}

// -- output directory ----------------------------------------------------------

/// Exclusive ownership of an output directory for the lifetime of a run.
class OutDirLock {
public:
    explicit OutDirLock(const fs::path& dir) : path_(dir / ".lock") {
        std::FILE* f = std::fopen(path_.c_str(), "wx");
        if (!f) throw ConfigError("out.dir: " + dir.string() + " is locked by another run (remove .lock if stale)");
        std::fclose(f);
    }
    ~OutDirLock() {
        std::error_code ec;
        fs::remove(path_, ec);
    }
    OutDirLock(const OutDirLock&) = delete;
    OutDirLock& operator=(const OutDirLock&) = delete;

private:
    fs::path path_;
};

inline std::string fmt_real(const char* spec, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

inline std::string metrics_row(const EpochReport& r, double wall_seconds) {
    std::string row = std::string(stage_name(r.stage)) + "," + std::to_string(r.epoch);
    for (double v : {r.losses.l_pisd, r.losses.l_ins, r.losses.l_clu, r.losses.l_cli, r.scores.nmi, r.scores.acc, r.scores.ari})
        row += "," + fmt_real("%.10f", v);
    row += "," + fmt_real("%.3f", wall_seconds);
    return row;
}

/// Keeps the header and rows up to (and including) the given training position.
inline void truncate_metrics(const fs::path& path, Stage stage, int epoch) {
    std::vector<std::string> keep{metrics_header};
    if (std::ifstream in(path); in) {
        std::string line;
        std::getline(in, line);
        while (std::getline(in, line)) {
            const auto c1 = line.find(',');
            const auto c2 = line.find(',', c1 + 1);
            if (c1 == std::string::npos || c2 == std::string::npos) continue;
            const Stage s = parse_stage(line.substr(0, c1));
            const int e = std::stoi(line.substr(c1 + 1, c2 - c1 - 1));
            if (s < stage || (s == stage && e <= epoch)) keep.push_back(line);
        }
    }
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    for (const auto& l : keep) out << l << '\n';
}

// -- commands ----------------------------------------------------------------------

struct RunOptions {
    fs::path config;
    std::string stage = "all";
    std::optional<std::string> out_dir;
    std::optional<std::uint64_t> seed;
};

inline int cmd_run(const RunOptions& opt, std::ostream& log = std::cout, std::ostream& err = std::cerr) {
    try {
        RunConfig cfg = RunConfig::from_file(opt.config);
        if (opt.out_dir) cfg.out_dir = *opt.out_dir;
        if (opt.seed) cfg.train.seed = *opt.seed;
        std::optional<Stage> only;
        if (opt.stage != "all") {
            only = parse_stage(opt.stage);
            if (*only == Stage::done) throw ConfigError("--stage: expected all, pretrain, train or boost");
        }
        cfg.validate();

        const Dataset data = load_dataset(cfg.data);
        const fs::path out = cfg.out_dir;
        fs::create_directories(out);
        OutDirLock lock(out);

        const fs::path latest = out / "latest.pici";
        std::optional<LoadedCheckpoint> resume;
        if (fs::exists(latest)) {
            resume = restore_checkpoint(load_checkpoint(latest));
            if (!(resume->config.model == cfg.model))
                throw ConfigError("model: configuration differs from the checkpoint in " + out.string());
        }
        if (only) {
            if (!resume && *only != Stage::pretrain)
                throw StageError("--stage " + opt.stage + " requires a checkpoint in " + out.string());
            if (resume && resume->state.stage != *only)
                throw StageError("--stage " + opt.stage + ": checkpoint is at stage " +
                                 std::string(stage_name(resume->state.stage)));
        }

        std::optional<Trainer> trainer;
        if (resume) {
            TrainConfig tc = cfg.train;
            tc.normalize_mean = resume->config.train.normalize_mean;
            tc.normalize_std = resume->config.train.normalize_std;
            tc.normalize_from_data = false;
            trainer.emplace(std::move(resume->state), tc, data);
        } else {
            trainer.emplace(cfg.model, cfg.train, data);
        }
        RunConfig resolved = cfg;
        resolved.train = trainer->config();
        {
            std::ofstream snap(out / "config.resolved", std::ios::trunc | std::ios::binary);
            snap << resolved.to_text();
        }

        const auto& t = resolved.train;
        log << "pici run: data=" << data.name << " (" << data.size() << " images, " << data.n_classes << " classes)\n"
            << "  model dim=" << cfg.model.embed_dim << " layers=" << cfg.model.n_layers << " heads=" << cfg.model.n_heads
            << " decoder=" << cfg.model.decoder_dim << "/" << cfg.model.decoder_layers << "/" << cfg.model.decoder_heads
            << " patch=" << cfg.model.patch_size << " image=" << cfg.model.image_size
            << " instance_dim=" << cfg.model.instance_dim << " clusters=" << cfg.model.n_clusters << "\n"
            << "  tau_i=" << t.temps.tau_i << " tau_c=" << t.temps.tau_c << " mask_ratio=" << t.mask_ratio
            << " batch=" << t.batch_size << " lr=" << t.adam.lr << " epochs=" << t.e1 << "/" << t.e2 << "/" << t.e3
            << " seed=" << t.seed << "\n";

        const fs::path metrics = out / "metrics.csv";
        truncate_metrics(metrics, trainer->stage(), trainer->state().epoch);
        std::ofstream rows(metrics, std::ios::app | std::ios::binary);

        while (trainer->stage() != Stage::done && (!only || trainer->stage() == *only)) {
            const Stage stage = trainer->stage();
            const int epoch = trainer->state().epoch + 1;
            const auto t0 = std::chrono::steady_clock::now();
            EpochReport report{stage, epoch, trainer->run_epoch(), {}};
            report.scores = trainer->evaluate(data);
            const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            rows << metrics_row(report, cfg.wall_time ? secs : 0.0) << '\n' << std::flush;
            log << stage_name(stage) << " " << epoch << "/" << t.stage_epochs(stage) << "  pisd=" << report.losses.l_pisd
                << " ins=" << report.losses.l_ins << " clu=" << report.losses.l_clu << " cli=" << report.losses.l_cli
                << "  nmi=" << report.scores.nmi << " acc=" << report.scores.acc << " ari=" << report.scores.ari << "  ("
                << fmt_real("%.2f", secs) << "s)\n";

            if (trainer->stage() != stage || epoch % cfg.checkpoint_every == 0) {
                const Checkpoint ck = make_checkpoint(resolved, trainer->state());
                char name[64];
                std::snprintf(name, sizeof name, "%s_e%04d.pici", std::string(stage_name(stage)).c_str(), epoch);
                save_checkpoint(ck, out / name);
                save_checkpoint(ck, latest);
            }
        }
        return exit_ok;
    } catch (const DivergenceError& e) {
        err << "error: divergence: " << e.what() << "\n";
        return exit_divergence;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return exit_config;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return exit_config;
    }
}

struct EvalOptions {
    fs::path checkpoint;
    std::optional<std::string> data;  // directory or synth:C,P,S,SEED; defaults to the run's data
    fs::path out_dir = ".";
};

struct EvalContext {
    LoadedCheckpoint model;
    Dataset data;
    Prediction prediction;
};

inline EvalContext prepare_eval(const EvalOptions& opt) {
    EvalContext ctx;
    ctx.model = restore_checkpoint(load_checkpoint(opt.checkpoint));
    const DataSpec spec = opt.data ? DataSpec::parse(*opt.data) : ctx.model.config.data;
    ctx.data = load_dataset(spec);
    if (ctx.data.n_classes != ctx.model.config.model.n_clusters)
        throw ConfigError("data has " + std::to_string(ctx.data.n_classes) + " classes but the model has " +
                          std::to_string(ctx.model.config.model.n_clusters) + " clusters");
    AugmentPolicy weak = AugmentPolicy::weak(ctx.model.config.model.image_size);
    const TrainConfig& tc = ctx.model.config.train;
    weak.normalize_mean = tc.normalize_from_data ? ctx.data.channel_mean() : tc.normalize_mean;
    weak.normalize_std = tc.normalize_from_data ? ctx.data.channel_std() : tc.normalize_std;
    ctx.prediction = predict(ctx.model.state.net, ctx.data, weak);
    fs::create_directories(opt.out_dir);
    return ctx;
}

inline int cmd_eval(const EvalOptions& opt, std::ostream& log = std::cout, std::ostream& err = std::cerr) {
    try {
        const EvalContext ctx = prepare_eval(opt);
        const Labels truth = ctx.data.labels();
        const ClusterScores s = score_clustering(truth, ctx.prediction.labels, ctx.model.config.train.nmi_norm);
        {
            std::ofstream out(opt.out_dir / "eval.csv", std::ios::trunc | std::ios::binary);
            out << "nmi,acc,ari,n_samples\n"
                << fmt_real("%.10f", s.nmi) << "," << fmt_real("%.10f", s.acc) << "," << fmt_real("%.10f", s.ari) << ","
                << truth.size() << "\n";
        }
        {
            std::ofstream out(opt.out_dir / "labels.csv", std::ios::trunc | std::ios::binary);
            out << "id,true,pred\n";
            for (std::size_t i = 0; i < truth.size(); ++i)
                out << ctx.data.items[i].id << "," << truth[i] << "," << ctx.prediction.labels[i] << "\n";
        }
        log << "nmi=" << s.nmi << " acc=" << s.acc << " ari=" << s.ari << " n=" << truth.size() << "\n";
        return exit_ok;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return exit_config;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return exit_config;
    }
}

inline int cmd_export_embeddings(const EvalOptions& opt, std::ostream& log = std::cout, std::ostream& err = std::cerr) {
    try {
        const EvalContext ctx = prepare_eval(opt);
        const Mat& z = ctx.prediction.embeddings;
        std::ofstream out(opt.out_dir / "embeddings.csv", std::ios::trunc | std::ios::binary);
        out << "id,true_label,pred_label";
        for (Eigen::Index j = 0; j < z.cols(); ++j) out << ",z_" << j;
        out << "\n";
        for (std::size_t i = 0; i < ctx.data.size(); ++i) {
            out << ctx.data.items[i].id << "," << ctx.data.items[i].label << "," << ctx.prediction.labels[i];
            for (Eigen::Index j = 0; j < z.cols(); ++j) out << "," << fmt_real("%.17g", z(static_cast<Eigen::Index>(i), j));
            out << "\n";
        }
        log << "wrote " << ctx.data.size() << " embeddings of dimension " << z.cols() << "\n";
        return exit_ok;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return exit_config;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return exit_config;
    }
}

}  // namespace pici

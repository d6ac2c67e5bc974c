#include "pici/cli.hpp"

#include <CLI11.hpp>

int main(int argc, char** argv) {
    CLI::App app{"pici: masked-image pretraining and contrastive image clustering"};
    app.require_subcommand(1);

    pici::RunOptions run;
    std::string out_dir, seed;
    auto* run_cmd = app.add_subcommand("run", "train through the stages, resuming from out/latest.pici");
    run_cmd->add_option("--config", run.config, "key=value configuration file")->required();
    run_cmd->add_option("--stage", run.stage, "all, pretrain, train or boost")->capture_default_str();
    run_cmd->add_option("--out", out_dir, "output directory (overrides out.dir)");
    run_cmd->add_option("--seed", seed, "base seed (overrides train.seed)");

    pici::EvalOptions eval;
    std::string eval_data;
    auto* eval_cmd = app.add_subcommand("eval", "cluster a dataset with a checkpoint and score it");
    auto* emb_cmd = app.add_subcommand("export-embeddings", "write instance embeddings and predicted clusters");
    for (auto* cmd : {eval_cmd, emb_cmd}) {
        cmd->add_option("--checkpoint", eval.checkpoint, "checkpoint file")->required();
        cmd->add_option("--data", eval_data, "image folder or synth:CLASSES,PER_CLASS,SIZE,SEED");
        cmd->add_option("--out", eval.out_dir, "output directory")->capture_default_str();
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return pici::exit_config;
    }

    if (*run_cmd) {
        if (!out_dir.empty()) run.out_dir = out_dir;
        if (!seed.empty()) {
            try {
                run.seed = pici::detail::parse_number<std::uint64_t>("--seed", seed);
            } catch (const pici::Error& e) {
                std::cerr << "error: " << e.what() << "\n";
                return pici::exit_config;
            }
        }
        return pici::cmd_run(run);
    }
    if (!eval_data.empty()) eval.data = eval_data;
    if (*eval_cmd) return pici::cmd_eval(eval);
    return pici::cmd_export_embeddings(eval);
}

#include "oracles.hpp"

#include "pici/cli.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace pici;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("pici_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string> lines_of(const fs::path& p) {
    std::vector<std::string> out;
    std::ifstream in(p);
    for (std::string line; std::getline(in, line);) out.push_back(line);
    return out;
}

std::vector<std::string> split(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    for (std::string f; std::getline(ss, f, ',');) out.push_back(f);
    return out;
}

constexpr const char* small_model =
    "model.dim = 16\nmodel.layers = 1\nmodel.heads = 2\nmodel.decoder_dim = 16\nmodel.decoder_layers = 1\n"
    "model.decoder_heads = 2\nmodel.patch_size = 8\nmodel.image_size = 16\nmodel.instance_dim = 8\nmodel.clusters = 2\n";

fs::path write_config(const fs::path& dir, const std::string& extra) {
    const fs::path cfg = dir / "run.cfg";
    std::ofstream(cfg) << small_model << "data.synth = 2,6,16,3\ntrain.e1 = 2\ntrain.e2 = 2\ntrain.e3 = 2\n"
                       << "train.batch = 4\ntrain.lr = 1e-3\ntrain.checkpoint_every = 1\nout.dir = " << (dir / "out").string()
                       << "\n"
                       << extra;
    return cfg;
}

int run(const fs::path& cfg, const std::string& stage = "all", std::string* err_text = nullptr) {
    std::ostringstream log, err;
    RunOptions o;
    o.config = cfg;
    o.stage = stage;
    const int rc = cmd_run(o, log, err);
    if (err_text) *err_text = err.str();
    return rc;
}

}  // namespace

TEST(Config, RoundTripsThroughText) {
    RunConfig c;
    c.model = NetworkConfig::tiny(3);
    c.train.temps.tau_i = 0.1 + 0.2;
    c.train.adam.lr = 3.3e-4;
    c.train.seed = 18446744073709551615ull;
    c.train.normalize_from_data = false;
    c.train.normalize_mean = {0.1, 0.25, 1.0 / 3.0};
    c.data = DataSpec::parse("synth:3,4,32,9");
    c.wall_time = true;
    const RunConfig back = RunConfig::from_text(c.to_text());
    EXPECT_EQ(back.to_text(), c.to_text());
    EXPECT_EQ(back.model, c.model);
    EXPECT_EQ(back.train.temps.tau_i, c.train.temps.tau_i);
    EXPECT_EQ(back.train.normalize_mean, c.train.normalize_mean);
    EXPECT_EQ(back.train.seed, c.train.seed);
}

TEST(Config, ErrorsNameTheField) {
    try {
        RunConfig::from_text("train.batch = many\n");
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("train.batch"), std::string::npos);
    }
    EXPECT_THROW(RunConfig::from_text("model.depth = 3\n"), ConfigError);
    EXPECT_THROW(RunConfig::from_text("just words\n"), ConfigError);
    EXPECT_THROW(RunConfig::from_text("mask.shared = maybe\n"), ConfigError);
    EXPECT_NO_THROW(RunConfig::from_text("# comment\n\nstate.epoch = 4\n"));
}

TEST(Config, ShippedConfigsParse) {
    const RunConfig base = RunConfig::from_file(fs::path(PICI_SOURCE_DIR) / "configs" / "default.cfg");
    EXPECT_EQ(base.model, NetworkConfig::vit_small(10));
    EXPECT_EQ(base.train.temps.tau_i, 0.5);
    EXPECT_EQ(base.train.batch_size, 96);
    const RunConfig toy = RunConfig::from_file(fs::path(PICI_SOURCE_DIR) / "configs" / "toy.cfg");
    EXPECT_EQ(toy.model, NetworkConfig::tiny(3));
    EXPECT_NO_THROW(toy.validate());
}

TEST(Checkpoint, BinaryLayout) {
    Checkpoint ck;
    ck.config_text = "a = 1\n";
    Mat m(1, 2);
    m << 1.0, -2.5;
    ck.arrays.emplace_back("w", m);
    std::ostringstream os(std::ios::binary);
    write_checkpoint(ck, os);
    const std::string b = os.str();
    ASSERT_EQ(b.size(), 4u + 4 + 8 + 6 + 4 + 4 + 1 + 16 + 16);
    EXPECT_EQ(b.substr(0, 4), "PICI");
    EXPECT_EQ(static_cast<unsigned char>(b[4]), 1u);
    EXPECT_EQ(b[5], 0);
    EXPECT_EQ(static_cast<unsigned char>(b[8]), 6u);
    // 1.0 is 0x3FF0000000000000, stored low byte first
    const std::size_t first = 4 + 4 + 8 + 6 + 4 + 4 + 1 + 16;
    EXPECT_EQ(static_cast<unsigned char>(b[first + 7]), 0x3Fu);
    EXPECT_EQ(static_cast<unsigned char>(b[first + 6]), 0xF0u);
    std::istringstream is(b, std::ios::binary);
    const Checkpoint back = read_checkpoint(is);
    EXPECT_EQ(back.config_text, ck.config_text);
    EXPECT_EQ(*back.find("w"), m);
}

TEST(Checkpoint, RejectsForeignAndTruncatedFiles) {
    std::istringstream bad("NOPE....");
    EXPECT_THROW(read_checkpoint(bad), CheckpointError);
    Checkpoint ck;
    ck.arrays.emplace_back("w", Mat::Ones(3, 3));
    std::ostringstream os;
    write_checkpoint(ck, os);
    std::istringstream cut(os.str().substr(0, os.str().size() - 5));
    EXPECT_THROW(read_checkpoint(cut), CheckpointError);
}

TEST(Checkpoint, TrainingStateRoundTrip) {
    const Dataset data = synth_blobs(2, 4, 16, 1);
    RunConfig cfg = RunConfig::from_text(std::string(small_model) + "train.e1 = 1\ntrain.batch = 4\n");
    Trainer tr(cfg.model, cfg.train, data);
    tr.run_epoch();
    cfg.train = tr.config();
    std::stringstream ss;
    write_checkpoint(make_checkpoint(cfg, tr.state()), ss);
    const LoadedCheckpoint back = restore_checkpoint(read_checkpoint(ss));
    EXPECT_EQ(back.state.stage, tr.stage());
    EXPECT_EQ(back.state.epoch, tr.state().epoch);
    for (std::size_t i = 0; i < tr.network().params().size(); ++i) {
        EXPECT_EQ(back.state.net.params()[i], tr.network().params()[i]);
        EXPECT_EQ(back.state.adam.first_moments()[i], tr.state().adam.first_moments()[i]);
        EXPECT_EQ(back.state.adam.steps()[i], tr.state().adam.steps()[i]);
    }
    EXPECT_EQ(back.config.train.normalize_mean, tr.config().normalize_mean);
}

TEST(CmdRun, FullScheduleWritesArtifacts) {
    const fs::path dir = fresh_dir("full");
    ASSERT_EQ(run(write_config(dir, "")), exit_ok);
    const fs::path out = dir / "out";
    const auto rows = lines_of(out / "metrics.csv");
    ASSERT_EQ(rows.size(), 1u + 6u);
    EXPECT_EQ(rows[0], metrics_header);
    const char* expected[] = {"pretrain,1,", "pretrain,2,", "train,1,", "train,2,", "boost,1,", "boost,2,"};
    for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(rows[i + 1].rfind(expected[i], 0), 0u) << rows[i + 1];
    int checkpoints = 0;
    for (const auto& e : fs::directory_iterator(out)) checkpoints += e.path().extension() == ".pici";
    EXPECT_GE(checkpoints, 3);
    EXPECT_TRUE(fs::exists(out / "config.resolved"));
    EXPECT_FALSE(fs::exists(out / ".lock"));
    const RunConfig resolved = RunConfig::from_file(out / "config.resolved");
    EXPECT_FALSE(resolved.train.normalize_from_data);
}

TEST(CmdRun, StagesRunSeparatelyMatchOneShot) {
    const fs::path a = fresh_dir("oneshot"), b = fresh_dir("staged");
    ASSERT_EQ(run(write_config(a, "")), exit_ok);
    const fs::path cfg_b = write_config(b, "");
    EXPECT_EQ(run(cfg_b, "train"), exit_config);
    ASSERT_EQ(run(cfg_b, "pretrain"), exit_ok);
    EXPECT_EQ(run(cfg_b, "boost"), exit_config);
    ASSERT_EQ(run(cfg_b, "train"), exit_ok);
    ASSERT_EQ(run(cfg_b, "boost"), exit_ok);
    EXPECT_EQ(slurp(a / "out" / "metrics.csv"), slurp(b / "out" / "metrics.csv"));
}

TEST(CmdRun, BoostWithoutCheckpointIsUsageError) {
    const fs::path dir = fresh_dir("nockpt");
    EXPECT_EQ(run(write_config(dir, ""), "boost"), exit_config);
    EXPECT_EQ(run(write_config(dir, ""), "sideways"), exit_config);
}

TEST(CmdRun, InvalidConfigIsUsageError) {
    const fs::path dir = fresh_dir("invalid");
    std::string err;
    EXPECT_EQ(run(write_config(dir, "losses.tau_c = 0\n"), "all", &err), exit_config);
    EXPECT_NE(err.find("losses"), std::string::npos);
    EXPECT_EQ(run(dir / "missing.cfg"), exit_config);
    EXPECT_EQ(run(write_config(dir, "train.batch = 1\n")), exit_config);
}

TEST(CmdRun, LockedOutputDirectoryRefused) {
    const fs::path dir = fresh_dir("locked");
    fs::create_directories(dir / "out");
    std::ofstream(dir / "out" / ".lock") << "";
    EXPECT_EQ(run(write_config(dir, "")), exit_config);
}

TEST(CmdRun, DivergenceExitCode) {
    const fs::path dir = fresh_dir("diverge");
    EXPECT_EQ(run(write_config(dir, "train.lr = 1e300\ntrain.e1 = 3\n")), exit_divergence);
}

TEST(CmdRun, HeaderEchoesHyperparameters) {
    const fs::path dir = fresh_dir("header");
    const fs::path cfg = dir / "full.cfg";
    std::ofstream(cfg) << slurp(fs::path(PICI_SOURCE_DIR) / "configs" / "default.cfg")
                       << "data.synth = 10,1,32,1\ntrain.e1 = 0\ntrain.e2 = 0\ntrain.e3 = 0\nout.dir = "
                       << (dir / "out").string() << "\n";
    std::ostringstream log, err;
    RunOptions o;
    o.config = cfg;
    ASSERT_EQ(cmd_run(o, log, err), exit_ok) << err.str();
    const std::string h = log.str();
    EXPECT_NE(h.find("tau_i=0.5"), std::string::npos);
    EXPECT_NE(h.find("tau_c=1"), std::string::npos);
    EXPECT_NE(h.find("mask_ratio=0.5"), std::string::npos);
    EXPECT_NE(h.find("batch=96"), std::string::npos);
}

TEST(CmdRun, SeedOverrideChangesTrajectory) {
    const fs::path a = fresh_dir("seed_a"), b = fresh_dir("seed_b");
    ASSERT_EQ(run(write_config(a, "train.e2 = 0\ntrain.e3 = 0\n")), exit_ok);
    RunOptions o;
    o.config = write_config(b, "train.e2 = 0\ntrain.e3 = 0\n");
    o.seed = 99;
    std::ostringstream log, err;
    ASSERT_EQ(cmd_run(o, log, err), exit_ok);
    EXPECT_NE(slurp(a / "out" / "metrics.csv"), slurp(b / "out" / "metrics.csv"));
    EXPECT_NE(slurp(b / "out" / "config.resolved").find("train.seed = 99"), std::string::npos);
}

TEST(CmdEval, WritesConsistentReports) {
    const fs::path dir = fresh_dir("eval");
    ASSERT_EQ(run(write_config(dir, "")), exit_ok);
    EvalOptions o;
    o.checkpoint = dir / "out" / "latest.pici";
    o.out_dir = dir / "eval1";
    std::ostringstream log, err;
    ASSERT_EQ(cmd_eval(o, log, err), exit_ok) << err.str();
    const std::string first = slurp(o.out_dir / "eval.csv");
    o.out_dir = dir / "eval2";
    ASSERT_EQ(cmd_eval(o, log, err), exit_ok);
    EXPECT_EQ(slurp(o.out_dir / "eval.csv"), first);

    const auto labels = lines_of(o.out_dir / "labels.csv");
    ASSERT_EQ(labels.size(), 13u);
    EXPECT_EQ(labels[0], "id,true,pred");
    Labels truth, pred;
    for (std::size_t i = 1; i < labels.size(); ++i) {
        const auto f = split(labels[i]);
        truth.push_back(std::stoi(f[1]));
        pred.push_back(std::stoi(f[2]));
        EXPECT_GE(pred.back(), 0);
        EXPECT_LT(pred.back(), 2);
    }
    const auto eval = lines_of(o.out_dir / "eval.csv");
    EXPECT_EQ(eval[0], "nmi,acc,ari,n_samples");
    const auto f = split(eval[1]);
    EXPECT_NEAR(std::stod(f[0]), nmi(truth, pred), 1e-9);
    EXPECT_NEAR(std::stod(f[1]), accuracy(truth, pred), 1e-9);
    EXPECT_NEAR(std::stod(f[2]), ari(truth, pred), 1e-9);
    EXPECT_EQ(f[3], "12");
}

TEST(CmdEval, MismatchedDataIsUsageError) {
    const fs::path dir = fresh_dir("eval_bad");
    ASSERT_EQ(run(write_config(dir, "train.e2 = 0\ntrain.e3 = 0\n")), exit_ok);
    EvalOptions o;
    o.checkpoint = dir / "out" / "latest.pici";
    o.data = "synth:3,2,16,1";
    o.out_dir = dir / "e";
    std::ostringstream log, err;
    EXPECT_EQ(cmd_eval(o, log, err), exit_config);
    o.checkpoint = dir / "missing.pici";
    EXPECT_EQ(cmd_eval(o, log, err), exit_config);
    std::ofstream(dir / "junk.pici") << "junk";
    o.checkpoint = dir / "junk.pici";
    EXPECT_EQ(cmd_export_embeddings(o, log, err), exit_config);
}

TEST(CmdExport, EmbeddingsUnitRows) {
    const fs::path dir = fresh_dir("export");
    ASSERT_EQ(run(write_config(dir, "train.e3 = 0\n")), exit_ok);
    EvalOptions o;
    o.checkpoint = dir / "out" / "latest.pici";
    o.out_dir = dir / "emb";
    std::ostringstream log, err;
    ASSERT_EQ(cmd_export_embeddings(o, log, err), exit_ok) << err.str();
    const auto rows = lines_of(o.out_dir / "embeddings.csv");
    ASSERT_EQ(rows.size(), 13u);
    const auto header = split(rows[0]);
    ASSERT_EQ(header.size(), 3u + 8u);
    EXPECT_EQ(header[3], "z_0");
    EXPECT_EQ(header.back(), "z_7");
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto f = split(rows[i]);
        double sq = 0.0;
        for (std::size_t j = 3; j < f.size(); ++j) sq += std::stod(f[j]) * std::stod(f[j]);
        EXPECT_NEAR(std::sqrt(sq), 1.0, 1e-6);
    }
}

TEST(CmdExport, DefaultInstanceDimension) {
    EXPECT_EQ(RunConfig{}.model.instance_dim, 128);
}

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "srulab/cli.hpp"
#include "support.hpp"

using namespace srulab;
using srulab::testing::scratch_dir;

namespace {

struct Run {
    int code;
    std::string out, err;
};

Run run(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = cli_main(args, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

bool exists(const std::string& p) { return std::filesystem::exists(p); }

/// Small synthetic dataset written through the CLI.
std::string synthetic_dir(const std::string& name) {
    const auto dir = scratch_dir(name);
    const auto r = run({"generate-synthetic", "--seed", "0", "--out-dir", dir, "--n-train", "12", "--n-val", "4",
                        "--n-test", "4", "--length", "20"});
    EXPECT_EQ(r.code, 0) << r.err;
    return dir;
}

const std::vector<std::string> kSmallModel{"--num-units", "4", "--num-stats", "3", "--summary-dims", "2",
                                           "--batch-size", "4", "--max-iterations", "12", "--eval-every", "4"};

std::vector<std::string> with(std::vector<std::string> a, const std::vector<std::string>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

}  // namespace

TEST(Cli, GenerateSyntheticWritesDatasetAndManifest) {
    const auto dir = scratch_dir("cli_gen");
    const auto r = run({"generate-synthetic", "--seed", "0", "--out-dir", dir, "--n-train", "5", "--n-val", "2",
                        "--n-test", "2", "--length", "8", "--export-csv"});
    ASSERT_EQ(r.code, 0) << r.err;
    for (const char* f : {"train.seqd", "validation.seqd", "test.seqd", "manifest.cfg", "dataset.csv"})
        EXPECT_TRUE(exists(dir + "/" + f)) << f;
    const auto ds = load_dataset(dir);
    EXPECT_EQ(ds.train.size(), 5u);
    EXPECT_EQ(ds.train[0].length(), 8u);
    const auto manifest = KeyValues::load(dir + "/manifest.cfg");
    EXPECT_EQ(manifest.get("command"), "generate-synthetic");
    EXPECT_EQ(manifest.get("model_seed"), "5904");
    EXPECT_EQ(manifest.get("n_train"), "5");
}

TEST(Cli, TrainWritesMetricsAndCheckpoint) {
    const auto data = synthetic_dir("cli_train_data");
    const auto dir = scratch_dir("cli_train");
    const auto r = run(with({"train", "--data", data, "--out-dir", dir, "--cell", "sru"}, kSmallModel));
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(exists(dir + "/metrics.csv"));
    EXPECT_TRUE(exists(dir + "/model.sruf"));
    EXPECT_TRUE(exists(dir + "/manifest.cfg"));
    const auto table = read_csv(dir + "/metrics.csv");
    EXPECT_EQ(table.header, (std::vector<std::string>{"iteration", "lr", "train_loss", "val_metric", "seconds"}));
    EXPECT_EQ(table.rows.size(), 4u);

    const auto ev = scratch_dir("cli_eval");
    const auto e = run({"evaluate", "--data", data, "--checkpoint", dir + "/model.sruf", "--out-dir", ev, "--split",
                        "validation"});
    ASSERT_EQ(e.code, 0) << e.err;
    EXPECT_TRUE(exists(ev + "/evaluation.csv"));

    const auto in = scratch_dir("cli_inspect");
    const auto i = run({"inspect-checkpoint", "--checkpoint", dir + "/model.sruf", "--out-dir", in});
    ASSERT_EQ(i.code, 0) << i.err;
    EXPECT_NE(slurp(in + "/checkpoint.txt").find("num_units=4"), std::string::npos);
}

TEST(Cli, TrainReplaysBitForBitFromManifest) {
    const auto data = synthetic_dir("cli_replay_data");
    const auto a = scratch_dir("cli_replay_a");
    const auto b = scratch_dir("cli_replay_b");
    ASSERT_EQ(run(with({"train", "--data", data, "--out-dir", a, "--dropout-keep-rate", "0.7", "--seed", "3"},
                       kSmallModel)).code, 0);
    const auto r = run({"train", "--config", a + "/manifest.cfg", "--out-dir", b});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(slurp(a + "/metrics.csv"), slurp(b + "/metrics.csv"));
    EXPECT_EQ(slurp(a + "/model.sruf"), slurp(b + "/model.sruf"));
}

TEST(Cli, ExplicitFlagsOverrideConfigFile) {
    const auto data = synthetic_dir("cli_override_data");
    const auto a = scratch_dir("cli_override_a");
    const auto b = scratch_dir("cli_override_b");
    ASSERT_EQ(run(with({"train", "--data", data, "--out-dir", a}, kSmallModel)).code, 0);
    ASSERT_EQ(run({"train", "--config", a + "/manifest.cfg", "--out-dir", b, "--max-iterations", "8"}).code, 0);
    EXPECT_EQ(KeyValues::load(b + "/manifest.cfg").get("max_iterations"), "8");
    EXPECT_EQ(KeyValues::load(b + "/manifest.cfg").get("num_units"), "4");
}

TEST(Cli, SearchWritesSweepAndBestConfig) {
    const auto data = synthetic_dir("cli_search_data");
    const auto dir = scratch_dir("cli_search");
    const auto r = run(with({"search", "--data", data, "--out-dir", dir, "--n-trials", "2", "--units-max", "4",
                             "--stats-max", "3", "--summary-max", "2", "--lr-min", "0.01", "--lr-max", "0.1"},
                            kSmallModel));
    ASSERT_EQ(r.code, 0) << r.err;
    for (const char* f : {"sweep.csv", "best.cfg", "best.sruf", "manifest.cfg", "trials/trial_0_metrics.csv"})
        EXPECT_TRUE(exists(dir + "/" + f)) << f;
    EXPECT_EQ(read_csv(dir + "/sweep.csv").rows.size(), 2u);

    const auto again = scratch_dir("cli_search_again");
    ASSERT_EQ(run({"search", "--config", dir + "/manifest.cfg", "--out-dir", again}).code, 0);
    EXPECT_EQ(slurp(dir + "/sweep.csv"), slurp(again + "/sweep.csv"));
    EXPECT_EQ(slurp(dir + "/trials/trial_1_metrics.csv"), slurp(again + "/trials/trial_1_metrics.csv"));
}

TEST(Cli, AnalyzeViewpointsPresets) {
    const auto dir = scratch_dir("cli_viewpoints");
    const auto r = run({"analyze-viewpoints", "--out-dir", dir, "--horizon", "300"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto table = read_csv(dir + "/viewpoints.csv");
    ASSERT_EQ(table.header.size(), 5u);  // lag + four kernels
    EXPECT_EQ(table.rows.size(), 300u);
    EXPECT_EQ(parse_double(table.rows[0][1]), 0.0);
    const auto extra = scratch_dir("cli_viewpoints_extra");
    ASSERT_EQ(run({"analyze-viewpoints", "--out-dir", extra, "--horizon", "10", "--alphas", "0.5"}).code, 0);
    EXPECT_EQ(read_csv(extra + "/viewpoints.csv").header.size(), 6u);
}

TEST(Cli, UnknownFlagIsUsageError) {
    const auto r = run({"train", "--no-such-flag", "3"});
    EXPECT_EQ(r.code, 2);
    EXPECT_EQ(r.err.rfind("error: usage_error: ", 0), 0u);
    EXPECT_EQ(std::count(r.err.begin(), r.err.end(), '\n'), 1);
    EXPECT_EQ(run({}).code, 2);
    EXPECT_EQ(run({"frobnicate"}).code, 2);
}

TEST(Cli, UnknownConfigKeyIsConfigError) {
    const auto dir = scratch_dir("cli_badkey");
    write_text_file(dir + "/x.cfg", "# comment\nhorizon=5\nbogus_key=1\n");
    const auto r = run({"analyze-viewpoints", "--config", dir + "/x.cfg", "--out-dir", dir});
    EXPECT_EQ(r.code, 1);
    EXPECT_EQ(r.err.rfind("error: config_error: ", 0), 0u) << r.err;
    EXPECT_NE(r.err.find("bogus_key"), std::string::npos);
}

TEST(Cli, ManifestFromAnotherCommandIsRejected) {
    const auto dir = scratch_dir("cli_wrong_manifest");
    ASSERT_EQ(run({"analyze-viewpoints", "--out-dir", dir, "--horizon", "5"}).code, 0);
    const auto r = run({"generate-synthetic", "--config", dir + "/manifest.cfg", "--out-dir", dir});
    EXPECT_EQ(r.code, 1);
    EXPECT_EQ(r.err.rfind("error: config_error: ", 0), 0u) << r.err;
}

TEST(Cli, RuntimeFailuresPrintOneCategorizedLine) {
    const auto dir = scratch_dir("cli_fail");
    auto r = run({"evaluate", "--data", dir + "/missing", "--checkpoint", dir + "/none.sruf", "--out-dir", dir});
    EXPECT_EQ(r.code, 1);
    EXPECT_EQ(r.err.rfind("error: io_error: ", 0), 0u) << r.err;
    r = run({"train", "--out-dir", dir});
    EXPECT_EQ(r.code, 1);
    EXPECT_EQ(r.err.rfind("error: config_error: ", 0), 0u) << r.err;
    r = run({"analyze-viewpoints", "--out-dir", dir, "--horizon", "abc"});
    EXPECT_EQ(r.code, 1);
    EXPECT_EQ(std::count(r.err.begin(), r.err.end(), '\n'), 1) << r.err;
}

TEST(Cli, TrainsOnPixelSequences) {
    const auto dir = scratch_dir("cli_pixels");
    const std::string data = SRULAB_DATA_DIR;
    const auto r = run({"train", "--idx-images", data + "/mnist5k/images-idx3-ubyte.gz", "--idx-labels",
                        data + "/mnist5k/labels-idx1-ubyte.gz", "--pool", "4", "--n-train", "40", "--n-val", "20",
                        "--n-test", "20", "--num-units", "4", "--num-stats", "3", "--summary-dims", "2",
                        "--max-iterations", "2", "--eval-every", "1", "--out-dir", dir});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("error_rate"), std::string::npos);
    EXPECT_NE(slurp(dir + "/manifest.cfg").find("pool=4"), std::string::npos);
}

TEST(Cli, HelpExitsZero) {
    EXPECT_EQ(run({"--help"}).code, 0);
    EXPECT_EQ(run({"train", "--help"}).code, 0);
}

#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "cta/checkpoint.hpp"
#include "cta/cli.hpp"
#include "cta/errors.hpp"
#include "test_support.hpp"

using namespace cta;
using namespace cta::cli;
namespace fs = std::filesystem;

namespace {

// A benchmark and network small enough for a few seconds per command.
const std::vector<std::string> kTiny = {
    "--set", "synth.num_classes=4",   "--set", "synth.videos_per_class=3", "--set",
    "synth.image_side=32",            "--set", "synth.object_size=8",      "--set",
    "synth.hand_radius=3",            "--set", "synth.min_length=6",       "--set",
    "synth.max_length=9",             "--set", "model.trunk=8x3s2,8x3s2",  "--set",
    "model.head=8x3s1",               "--set", "model.hidden=4",           "--set",
    "train.frames=6",                 "--set", "train.epochs=2",           "--set",
    "split.val_fraction=0.34",        "--set", "split.test_fraction=0.33"};

struct Result {
  int code;
  std::string out, err;
};

Result invoke(std::vector<std::string> args, bool tiny = false) {
  if (tiny) args.insert(args.end(), kTiny.begin(), kTiny.end());
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  const auto bytes = cta::testing::read_bytes(p);
  return std::string(bytes.begin(), bytes.end());
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) out.push_back(line);
  return out;
}

Tensor constant_map(std::size_t c, std::size_t h, std::size_t w, double v) {
  return Tensor::full({c, h, w}, v);
}

}  // namespace

// ---- config ---------------------------------------------------------------

TEST(RunConfig, DefaultsMatchModuleDefaults) {
  const RunConfig c = load_run_config({});
  EXPECT_EQ(c.synth_spec().num_classes(), 6u);
  EXPECT_EQ(c.model.glimpse.num_branches, 3u);
  EXPECT_EQ(c.train.frames, 12u);
  EXPECT_EQ(c.train.lr0, 0.001);
  EXPECT_EQ(c.ablate_seeds, (std::vector<std::uint64_t>{1, 2, 3}));
  const CtaNetConfig m = c.model_for(64, 6);
  EXPECT_EQ(m.glimpse.frames, 12u);
  EXPECT_NO_THROW(m.validate());
}

TEST(RunConfig, FileOverridesAndEchoRoundTrip) {
  const fs::path dir = cta::testing::scratch_dir("cfg");
  {
    std::ofstream os(dir / "a.txt");
    os << "# comment\n train.lr0 = 0.005  \nmodel.trunk = 8x5s1, 16x3s2\nablate.seeds = 4,9\n\n"
          "train.use_branches = off # trailing\nmodel.gate_mode = vector\n";
  }
  const RunConfig c = load_run_config(dir / "a.txt", {"train.epochs=7"});
  EXPECT_EQ(c.train.lr0, 0.005);
  EXPECT_EQ(c.train.epochs, 7u);
  ASSERT_EQ(c.model.glimpse.trunk.size(), 2u);
  EXPECT_EQ(c.model.glimpse.trunk[0].kernel, 5u);
  EXPECT_EQ(c.model.glimpse.trunk[1].stride, 2u);
  EXPECT_FALSE(c.train.switches.use_branches);
  EXPECT_EQ(c.model.gate_mode, GateMode::vector);
  EXPECT_EQ(c.ablate_seeds, (std::vector<std::uint64_t>{4, 9}));

  const std::string echo = format_run_config(c);
  {
    std::ofstream os(dir / "b.txt");
    os << echo;
  }
  EXPECT_EQ(format_run_config(load_run_config(dir / "b.txt")), echo);
  EXPECT_NE(echo.find("train.lr0 = 0.005\n"), std::string::npos) << echo;
}

TEST(RunConfig, ErrorsAreConfigErrors) {
  EXPECT_THROW(load_run_config({}, {"train.nope=1"}), ConfigError);
  EXPECT_THROW(load_run_config({}, {"train.epochs=-1"}), ConfigError);
  EXPECT_THROW(load_run_config({}, {"train.jitter=maybe"}), ConfigError);
  EXPECT_THROW(load_run_config({}, {"model.trunk=8x3"}), ConfigError);
  EXPECT_THROW(load_run_config({}, {"noequals"}), ConfigError);
  EXPECT_THROW(load_run_config("/nonexistent/cfg.txt"), ConfigError);
  const fs::path dir = cta::testing::scratch_dir("cfg_err");
  {
    std::ofstream os(dir / "c.txt");
    os << "train.lr0 = 0.1\nbroken line\n";
  }
  try {
    load_run_config(dir / "c.txt");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("c.txt:2"), std::string::npos) << e.what();
  }
}

// ---- evaluation -----------------------------------------------------------

TEST(Evaluate, OraclePredictorIsPerfectAndDiagonal) {
  Dataset ds;
  for (std::size_t i = 0; i < 12; ++i) {
    VideoSample v;
    v.id = i;
    v.label = i % 3;
    ds.videos.push_back(v);
  }
  std::vector<std::size_t> all(12);
  for (std::size_t i = 0; i < 12; ++i) all[i] = i;
  const EvalResult r = evaluate(ds, all, [](const VideoSample& v) { return v.label; }, 3);
  EXPECT_EQ(r.accuracy, 1.0);
  for (std::size_t t = 0; t < 3; ++t)
    for (std::size_t p = 0; p < 3; ++p) EXPECT_EQ(r.confusion[t][p], t == p ? 4u : 0u);
}

TEST(Evaluate, ConstantPredictorOnBalancedSetIsOneOverK) {
  Dataset ds;
  for (std::size_t i = 0; i < 24; ++i) {
    VideoSample v;
    v.id = i;
    v.label = i % 6;
    ds.videos.push_back(v);
  }
  std::vector<std::size_t> all(24);
  for (std::size_t i = 0; i < 24; ++i) all[i] = i;
  const EvalResult r = evaluate(ds, all, [](const VideoSample&) { return std::size_t{2}; }, 6);
  EXPECT_NEAR(r.accuracy, 1.0 / 6.0, 1e-15);
  std::size_t trace = 0, total = 0;
  for (std::size_t t = 0; t < 6; ++t) {
    std::size_t row = 0;
    for (std::size_t n : r.confusion[t]) row += n;
    EXPECT_EQ(row, 4u);
    trace += r.confusion[t][t];
    total += row;
  }
  EXPECT_NEAR(static_cast<double>(trace) / static_cast<double>(total), r.accuracy, 1e-12);

  const fs::path dir = cta::testing::scratch_dir("confusion");
  write_confusion_csv(dir / "c.csv", r);
  const auto lines = lines_of(slurp(dir / "c.csv"));
  ASSERT_EQ(lines.size(), 7u);
  EXPECT_EQ(lines[0], "true,pred_0,pred_1,pred_2,pred_3,pred_4,pred_5");
  EXPECT_EQ(lines[1], "0,0,0,4,0,0,0");
}

TEST(Ablation, VariantGridAndShuffle) {
  const auto& v = ablation_variants();
  ASSERT_EQ(v.size(), 4u);
  EXPECT_EQ(v[0].name, "full");
  EXPECT_TRUE(v[0].branches && v[0].temporal_attention);
  EXPECT_FALSE(v[1].temporal_attention);
  EXPECT_FALSE(v[2].branches);
  EXPECT_FALSE(v[3].branches || v[3].temporal_attention);
  for (std::uint64_t s = 0; s < 50; ++s) {
    auto o = shuffled_order(12, s);
    EXPECT_EQ(o, shuffled_order(12, s));
    bool identity = true;
    for (std::size_t i = 0; i < 12; ++i) identity = identity && o[i] == i;
    EXPECT_FALSE(identity);
    std::sort(o.begin(), o.end());
    for (std::size_t i = 0; i < 12; ++i) EXPECT_EQ(o[i], i);
  }
}

// ---- saliency -------------------------------------------------------------

TEST(GradCam, UniformActivationsAndPositiveGradientsGiveUniformMap) {
  const auto raw = grad_cam_map(constant_map(3, 4, 4, 0.5), constant_map(3, 4, 4, 2.0));
  for (double v : raw) EXPECT_DOUBLE_EQ(v, 3.0);
  for (double v : normalize_map(raw)) EXPECT_EQ(v, 1.0);
}

TEST(GradCam, NegativeWeightedSumClampsToZero) {
  const auto raw = grad_cam_map(constant_map(2, 3, 3, 1.0), constant_map(2, 3, 3, -1.0));
  for (double v : raw) EXPECT_EQ(v, 0.0);
  for (double v : normalize_map(raw)) EXPECT_EQ(v, 0.0);
}

TEST(GradCam, PeakAtConstructedHotSpot) {
  Tensor act = Tensor::zeros({1, 5, 6});
  act.mutable_data()[2 * 6 + 4] = 3.0;
  act.mutable_data()[0] = 0.5;
  const auto map = normalize_map(grad_cam_map(act, constant_map(1, 5, 6, 1.0)));
  EXPECT_EQ(std::max_element(map.begin(), map.end()) - map.begin(), 2 * 6 + 4);
  EXPECT_EQ(map[2 * 6 + 4], 1.0);
  EXPECT_EQ(*std::min_element(map.begin(), map.end()), 0.0);
  EXPECT_THROW(grad_cam_map(act, Tensor::zeros({1, 5, 5})), DimensionError);
}

TEST(GradCam, ExplainVideoProducesThreeBranches) {
  CtaNetConfig cfg;
  cfg.glimpse.frames = 6;
  cfg.glimpse.image_side = 16;
  cfg.glimpse.trunk = {{8, 3, 2}};
  cfg.glimpse.head = {4, 3, 1};
  cfg.hidden = 4;
  cfg.num_classes = 2;
  const CtaNet net(cfg, 1);
  VideoSample v;
  v.length = 9;
  v.side = 16;
  SplitMix64 rng(5);
  for (std::size_t i = 0; i < 9 * 256; ++i) v.pixels.push_back(static_cast<float>(rng.uniform()));
  const auto maps = explain_video(net, v, 1, {});
  ASSERT_EQ(maps.size(), 3u);
  EXPECT_EQ(maps[0].name, "before");
  EXPECT_EQ(maps[1].name, "during");
  EXPECT_EQ(maps[2].name, "after");
  for (const auto& m : maps) {
    EXPECT_EQ(m.frames, 2u);
    EXPECT_EQ(m.map.size(), 64u);
    for (double x : m.map) {
      EXPECT_GE(x, 0.0);
      EXPECT_LE(x, 1.0);
    }
  }
  EXPECT_THROW(explain_video(net, v, 2, {}), ContractError);
}

// ---- commands -------------------------------------------------------------

TEST(Commands, UsageErrorsExitTwo) {
  EXPECT_EQ(invoke({}).code, 2);
  EXPECT_EQ(invoke({"frobnicate"}).code, 2);
  EXPECT_EQ(invoke({"train", "--data", "x"}).code, 2);
  EXPECT_EQ(invoke({"--help"}).code, 0);
  const fs::path dir = cta::testing::scratch_dir("cli_usage");
  const Result bad = invoke({"generate", "--out", (dir / "d").string(), "--set", "synth.bogus=1"});
  EXPECT_EQ(bad.code, 2);
  EXPECT_NE(bad.err.find("synth.bogus"), std::string::npos) << bad.err;
}

TEST(Commands, GenerateIsDeterministicAndReportsCounts) {
  const fs::path dir = cta::testing::scratch_dir("cli_gen");
  const Result a = invoke({"generate", "--seed", "7", "--out", (dir / "a").string(), "--pgm", "0"}, true);
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_NE(a.out.find("generated 12 videos"), std::string::npos) << a.out;
  ASSERT_EQ(invoke({"generate", "--seed", "7", "--out", (dir / "b").string()}, true).code, 0);
  for (const auto& e : fs::directory_iterator(dir / "b")) {
    EXPECT_EQ(slurp(e.path()), slurp(dir / "a" / e.path().filename())) << e.path();
  }
  EXPECT_TRUE(fs::exists(dir / "a" / "pgm" / "video_0" / "frame_000.pgm"));
}

TEST(Commands, UnwritablePathExitsThree) {
  const fs::path dir = cta::testing::scratch_dir("cli_unwritable");
  {
    std::ofstream os(dir / "file");
    os << "x";
  }
  const Result r = invoke({"generate", "--out", (dir / "file" / "sub").string()}, true);
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("file/sub"), std::string::npos) << r.err;
}

TEST(Commands, TrainEvalExplainEndToEnd) {
  const fs::path dir = cta::testing::scratch_dir("cli_e2e");
  const std::string data = (dir / "data").string(), run_dir = (dir / "run").string();
  ASSERT_EQ(invoke({"generate", "--out", data}, true).code, 0);
  const Result tr = invoke({"train", "--data", data, "--out", run_dir}, true);
  ASSERT_EQ(tr.code, 0) << tr.err;
  for (const char* f : {"config.txt", "metrics.csv", "model.ckpt", "train.log"}) {
    EXPECT_TRUE(fs::exists(fs::path(run_dir) / f)) << f;
  }
  const auto metrics = lines_of(slurp(fs::path(run_dir) / "metrics.csv"));
  ASSERT_EQ(metrics.size(), 4u);
  EXPECT_EQ(metrics[0].rfind("# dataset_hash=", 0), 0u);
  EXPECT_EQ(metrics[1], "epoch,step,lr,train_loss,train_acc,val_acc");

  const Result ev = invoke({"eval", "--data", data, "--checkpoint", run_dir + "/model.ckpt", "--split", "all"});
  ASSERT_EQ(ev.code, 0) << ev.err;
  EXPECT_NE(ev.out.find("(") , std::string::npos);
  EXPECT_NE(ev.out.find("/12) on all"), std::string::npos) << ev.out;
  const auto confusion = lines_of(slurp(fs::path(run_dir) / "confusion.csv"));
  ASSERT_EQ(confusion.size(), 5u);

  const std::string video = data + "/video_00004.ctav";
  const Result ex = invoke({"explain", "--checkpoint", run_dir + "/model.ckpt", "--video", video,
                         "--class", "1", "--out", (dir / "maps").string()});
  ASSERT_EQ(ex.code, 0) << ex.err;
  for (const char* f : {"before.pgm", "during.pgm", "after.pgm"}) {
    EXPECT_TRUE(fs::exists(dir / "maps" / f)) << f;
  }
  const std::string first = slurp(dir / "maps" / "during.pgm");
  ASSERT_EQ(invoke({"explain", "--checkpoint", run_dir + "/model.ckpt", "--video", video, "--class",
                 "1", "--out", (dir / "maps").string()})
                .code,
            0);
  EXPECT_EQ(slurp(dir / "maps" / "during.pgm"), first);

  EXPECT_EQ(invoke({"explain", "--checkpoint", run_dir + "/model.ckpt", "--video", video, "--class",
                 "9", "--out", (dir / "maps").string()})
                .code,
            2);
  // Architecture mismatch names the first offending parameter.
  const Result mismatch = invoke({"eval", "--data", data, "--checkpoint", run_dir + "/model.ckpt",
                               "--set", "model.hidden=5"});
  EXPECT_EQ(mismatch.code, 3);
  EXPECT_NE(mismatch.err.find("lstm.w_input"), std::string::npos) << mismatch.err;
}

TEST(Commands, AblateWritesGridWithSharedHashes) {
  const fs::path dir = cta::testing::scratch_dir("cli_ablate");
  const std::string data = (dir / "data").string(), out = (dir / "ab").string();
  ASSERT_EQ(invoke({"generate", "--out", data}, true).code, 0);
  const Result r = invoke({"ablate", "--data", data, "--out", out, "--set", "ablate.seeds=3",
                        "--set", "train.epochs=1"},
                       true);
  ASSERT_EQ(r.code, 0) << r.err;
  const auto table = lines_of(slurp(fs::path(out) / "ablation.csv"));
  ASSERT_EQ(table.size(), 5u);
  EXPECT_EQ(table[0], "variant,branches,temporal_attention,val_acc,test_acc");
  EXPECT_EQ(table[1].rfind("full,1,1,", 0), 0u);
  EXPECT_EQ(table[4].rfind("no_branches_no_temporal_attention,0,0,", 0), 0u);
  std::string hash_line;
  for (const auto& v : ablation_variants()) {
    const auto metrics = lines_of(slurp(fs::path(out) / "runs" / (v.name + "_seed3") / "metrics.csv"));
    ASSERT_FALSE(metrics.empty());
    if (hash_line.empty()) hash_line = metrics[0];
    EXPECT_EQ(metrics[0], hash_line) << v.name;
  }
  EXPECT_EQ(lines_of(slurp(fs::path(out) / "order_sensitivity.csv")).size(), 5u);
}

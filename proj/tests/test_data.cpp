#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include <gtest/gtest.h>

#include "cta/data.hpp"
#include "cta/errors.hpp"
#include "cta/rng.hpp"
#include "test_support.hpp"

using namespace cta;
namespace fs = std::filesystem;

namespace {

SynthSpec small_spec(std::size_t per_class = 3) {
  SynthSpec s;
  s.videos_per_class = per_class;
  s.min_length = 6;
  s.max_length = 10;
  s.image_side = 32;
  s.object_size = 8;
  s.hand_radius = 3;
  return s;
}

std::vector<std::vector<float>> frames_of(const VideoSample& v) {
  std::vector<std::vector<float>> out;
  for (std::size_t f = 0; f < v.length; ++f) {
    const auto begin = v.pixels.begin() + static_cast<long>(f * v.frame_size());
    out.emplace_back(begin, begin + static_cast<long>(v.frame_size()));
  }
  return out;
}

void write_file(const fs::path& path, const std::string& contents) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  os << contents;
}

std::string expect_format_error(const fs::path& dir) {
  try {
    read_dataset(dir);
  } catch (const FormatError& e) {
    return e.what();
  }
  ADD_FAILURE() << "no FormatError for " << dir;
  return {};
}

}  // namespace

TEST(SplitMix64, ReferenceSequence) {
  // Published reference outputs for seed 0 and seed 1234567.
  SplitMix64 a(0);
  EXPECT_EQ(a.next(), 0xe220a8397b1dcdafULL);
  EXPECT_EQ(a.next(), 0x6e789e6aa1b965f4ULL);
  EXPECT_EQ(a.next(), 0x06c45d188009454fULL);
  SplitMix64 b(1234567);
  EXPECT_EQ(b.next(), 6457827717110365317ULL);
  EXPECT_EQ(b.next(), 3203168211198807973ULL);
}

TEST(SplitMix64, BoundedDraws) {
  SplitMix64 r(3);
  for (int i = 0; i < 1000; ++i) {
    EXPECT_LT(r.below(7), 7u);
    const double u = r.uniform();
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
    const auto k = r.range(-2, 3);
    EXPECT_GE(k, -2);
    EXPECT_LE(k, 3);
  }
  EXPECT_NE(mix_seed(1, 0), mix_seed(1, 1));
  EXPECT_NE(mix_seed(1, 0), mix_seed(2, 0));
}

TEST(PhaseLengths, ThirdsWithMiddleAbsorbingRemainder) {
  const PhaseLengths p18 = phase_lengths(18);
  EXPECT_EQ(p18.approach, 6u);
  EXPECT_EQ(p18.manipulate, 6u);
  EXPECT_EQ(p18.withdraw, 6u);
  for (std::size_t len = 3; len <= 40; ++len) {
    const PhaseLengths p = phase_lengths(len);
    EXPECT_EQ(p.approach + p.manipulate + p.withdraw, len);
    EXPECT_EQ(p.approach, p.withdraw);
    EXPECT_GE(p.manipulate, 1u);
  }
}

TEST(SynthSpec, DefaultsAndValidation) {
  const SynthSpec def;
  EXPECT_EQ(def.num_classes(), 6u);
  EXPECT_EQ(def.image_side, 64u);
  EXPECT_EQ(def.noise, 0.02);
  EXPECT_NO_THROW(def.validate());
  EXPECT_EQ(phase_order_pairs(def).size(), 3u);

  SynthSpec s = small_spec();
  s.hand_radius = 20;
  EXPECT_THROW(s.validate(), ConfigError);
  s = small_spec();
  s.object_size = 40;
  EXPECT_THROW(s.validate(), ConfigError);
  s = small_spec();
  s.classes = {{0, PhaseOrder::approach_manipulate_withdraw}, {1, PhaseOrder::approach_manipulate_withdraw}};
  EXPECT_THROW(s.validate(), ConfigError);  // no order-only pair
  s.classes = {{0, PhaseOrder::approach_manipulate_withdraw}, {0, PhaseOrder::withdraw_manipulate_approach}};
  EXPECT_THROW(s.validate(), ConfigError);  // no texture-only pair
  s.classes.push_back({0, PhaseOrder::withdraw_manipulate_approach});
  EXPECT_THROW(s.validate(), ConfigError);  // duplicate
  s.classes = {{9, PhaseOrder::approach_manipulate_withdraw}};
  EXPECT_THROW(s.validate(), ConfigError);
}

TEST(SynthGenerate, CountsAndBalance) {
  SynthSpec s = small_spec(4);
  const Dataset ds = synth_generate(s, 7);
  ASSERT_EQ(ds.videos.size(), 24u);
  EXPECT_EQ(ds.num_classes(), 6u);
  std::map<std::size_t, std::size_t> per_label;
  for (const VideoSample& v : ds.videos) {
    ++per_label[v.label];
    EXPECT_GE(v.length, s.min_length);
    EXPECT_LE(v.length, s.max_length);
    EXPECT_EQ(v.pixels.size(), v.length * 32 * 32);
    for (float p : v.pixels) {
      EXPECT_GE(p, 0.0f);
      EXPECT_LE(p, 1.0f);
    }
  }
  for (const auto& [label, n] : per_label) EXPECT_EQ(n, 4u) << label;
}

TEST(SynthGenerate, DefaultSpecHas240Videos) {
  SynthSpec s;
  s.min_length = s.max_length = 3;  // geometry untouched, only clip length trimmed for speed
  EXPECT_EQ(synth_generate(s, 7).videos.size(), 240u);
}

TEST(SynthGenerate, DeterministicPerSeed) {
  const SynthSpec s = small_spec();
  const Dataset a = synth_generate(s, 7), b = synth_generate(s, 7), c = synth_generate(s, 8);
  EXPECT_EQ(a, b);
  EXPECT_EQ(dataset_hash(a), dataset_hash(b));
  EXPECT_NE(dataset_hash(a), dataset_hash(c));
}

TEST(SynthGenerate, PhaseOrderPairSharesFrameMultiset) {
  const SynthSpec s = small_spec();
  for (std::size_t id = 0; id < 8; ++id) {
    const VideoScene scene = draw_scene(s, 7, id);
    for (std::size_t tex = 0; tex < kNumTextures; ++tex) {
      const VideoSample fwd =
          render_video(s, scene, {tex, PhaseOrder::approach_manipulate_withdraw}, id, 0);
      const VideoSample rev =
          render_video(s, scene, {tex, PhaseOrder::withdraw_manipulate_approach}, id, 1);
      auto fa = frames_of(fwd), fb = frames_of(rev);
      EXPECT_NE(fa, fb);
      std::sort(fa.begin(), fa.end());
      std::sort(fb.begin(), fb.end());
      EXPECT_EQ(fa, fb) << "video " << id << " texture " << tex;
    }
  }
}

TEST(SynthGenerate, ReversedOrderPlaysSegmentsBackToFront) {
  const SynthSpec s = small_spec();
  const VideoScene scene = draw_scene(s, 7, 2);
  const auto fwd = frames_of(render_video(s, scene, {1, PhaseOrder::approach_manipulate_withdraw}, 2, 0));
  const auto rev = frames_of(render_video(s, scene, {1, PhaseOrder::withdraw_manipulate_approach}, 2, 1));
  const PhaseLengths p = phase_lengths(scene.length);
  // withdraw segment first, then manipulate, then approach; each segment keeps its internal order
  for (std::size_t k = 0; k < p.withdraw; ++k) EXPECT_EQ(rev[k], fwd[p.approach + p.manipulate + k]);
  for (std::size_t k = 0; k < p.manipulate; ++k) EXPECT_EQ(rev[p.withdraw + k], fwd[p.approach + k]);
  for (std::size_t k = 0; k < p.approach; ++k)
    EXPECT_EQ(rev[p.withdraw + p.manipulate + k], fwd[k]);
}

TEST(SynthGenerate, TextureOnlyPairDiffersOnlyInManipulatePhase) {
  const SynthSpec s = small_spec();
  const VideoScene scene = draw_scene(s, 7, 5);
  const auto a = frames_of(render_video(s, scene, {0, PhaseOrder::approach_manipulate_withdraw}, 5, 0));
  const auto b = frames_of(render_video(s, scene, {1, PhaseOrder::approach_manipulate_withdraw}, 5, 2));
  const PhaseLengths p = phase_lengths(scene.length);
  for (std::size_t f = 0; f < scene.length; ++f) {
    const bool manipulate = f >= p.approach && f < p.approach + p.manipulate;
    EXPECT_EQ(a[f] != b[f], manipulate) << f;
  }
}

TEST(DatasetIo, RoundTripIsExactAndBytesAreStable) {
  const fs::path dir = cta::testing::scratch_dir("ds_rt");
  const Dataset ds = synth_generate(small_spec(2), 7);
  write_dataset(ds, dir / "a");
  write_dataset(ds, dir / "b");
  EXPECT_EQ(read_dataset(dir / "a"), ds);
  for (const auto& entry : fs::directory_iterator(dir / "a")) {
    EXPECT_EQ(cta::testing::read_bytes(entry.path()),
              cta::testing::read_bytes(dir / "b" / entry.path().filename()))
        << entry.path();
  }
  const auto manifest = cta::testing::read_bytes(dir / "a" / "index.csv");
  const std::string text(manifest.begin(), manifest.end());
  EXPECT_EQ(text.rfind("video_id,label,num_frames,file\n0,0,", 0), 0u) << text;
}

TEST(DatasetIo, BlobLayout) {
  const fs::path dir = cta::testing::scratch_dir("ds_layout");
  Dataset ds;
  VideoSample v;
  v.id = 0;
  v.label = 1;
  v.length = 1;
  v.side = 2;
  v.pixels = {0.0f, 0.25f, 0.5f, 1.0f};
  ds.videos = {v};
  write_dataset(ds, dir);
  const auto bytes = cta::testing::read_bytes(dir / "video_00000.ctav");
  ASSERT_EQ(bytes.size(), 5u + 12u + 16u);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 5), "CTAV1");
  EXPECT_EQ(bytes[5], 1);   // L
  EXPECT_EQ(bytes[9], 1);   // C
  EXPECT_EQ(bytes[13], 2);  // S
  // 1.0f little-endian = 00 00 80 3f
  EXPECT_EQ(bytes[29], 0x00);
  EXPECT_EQ(bytes[31], 0x80);
  EXPECT_EQ(bytes[32], 0x3f);
}

TEST(DatasetIo, TruncatedBlobNamesVideo) {
  const fs::path dir = cta::testing::scratch_dir("ds_trunc");
  write_dataset(synth_generate(small_spec(1), 7), dir);
  auto bytes = cta::testing::read_bytes(dir / "video_00003.ctav");
  bytes.resize(bytes.size() - 7);
  write_file(dir / "video_00003.ctav", std::string(bytes.begin(), bytes.end()));
  const std::string msg = expect_format_error(dir);
  EXPECT_NE(msg.find("video 3"), std::string::npos) << msg;
  EXPECT_NE(msg.find("truncated"), std::string::npos) << msg;
}

TEST(DatasetIo, MissingBlobListsPath) {
  const fs::path dir = cta::testing::scratch_dir("ds_missing");
  write_dataset(synth_generate(small_spec(1), 7), dir);
  fs::remove(dir / "video_00004.ctav");
  const std::string msg = expect_format_error(dir);
  EXPECT_NE(msg.find("video_00004.ctav"), std::string::npos) << msg;
}

TEST(DatasetIo, BadMagicAndCountMismatch) {
  const fs::path dir = cta::testing::scratch_dir("ds_magic");
  write_dataset(synth_generate(small_spec(1), 7), dir);
  auto bytes = cta::testing::read_bytes(dir / "video_00001.ctav");
  bytes[4] = '2';
  write_file(dir / "video_00001.ctav", std::string(bytes.begin(), bytes.end()));
  EXPECT_NE(expect_format_error(dir).find("magic"), std::string::npos);

  const fs::path dir2 = cta::testing::scratch_dir("ds_count");
  write_dataset(synth_generate(small_spec(1), 7), dir2);
  write_file(dir2 / "video_00099.ctav", "CTAV1");
  EXPECT_NE(expect_format_error(dir2).find("video_00099.ctav"), std::string::npos);

  EXPECT_NE(expect_format_error(cta::testing::scratch_dir("ds_empty")).find("index.csv"),
            std::string::npos);
}

TEST(DatasetSplit, StratifiedDisjointAndSeeded) {
  const Dataset ds = synth_generate(small_spec(10), 7);
  const DatasetSplit s = split_dataset(ds, 0.2, 0.2, 11);
  EXPECT_EQ(s.train.size(), 36u);
  EXPECT_EQ(s.val.size(), 12u);
  EXPECT_EQ(s.test.size(), 12u);
  std::set<std::size_t> all;
  for (const auto* part : {&s.train, &s.val, &s.test}) all.insert(part->begin(), part->end());
  EXPECT_EQ(all.size(), 60u);
  std::map<std::size_t, std::size_t> val_labels;
  for (std::size_t i : s.val) ++val_labels[ds.videos[i].label];
  for (const auto& [label, n] : val_labels) EXPECT_EQ(n, 2u) << label;
  EXPECT_EQ(split_dataset(ds, 0.2, 0.2, 11).hash(), s.hash());
  EXPECT_NE(split_dataset(ds, 0.2, 0.2, 12).hash(), s.hash());
  EXPECT_THROW(split_dataset(ds, 0.6, 0.5, 11), ConfigError);
}

TEST(Pgm, HeaderAndUpscale) {
  const fs::path dir = cta::testing::scratch_dir("pgm");
  write_pgm(dir / "m.pgm", {0.0, 1.0, 0.5, 0.25}, 2, 2, 2);
  const auto bytes = cta::testing::read_bytes(dir / "m.pgm");
  const std::string header = "P5\n4 4\n255\n";
  ASSERT_EQ(bytes.size(), header.size() + 16);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + static_cast<long>(header.size())), header);
  EXPECT_EQ(bytes[header.size() + 0], 0);
  EXPECT_EQ(bytes[header.size() + 2], 255);
  EXPECT_EQ(bytes[header.size() + 5], 0);  // second row repeats the first
}

#include <cmath>
#include <cstring>

#include <gtest/gtest.h>

#include "cta/errors.hpp"
#include "cta/glimpse.hpp"
#include "cta/ops.hpp"
#include "cta/tape.hpp"
#include "test_support.hpp"

using namespace cta;
using cta::testing::random_tensor;

namespace {

GlimpseConfig small_config() {
  GlimpseConfig c;
  c.num_branches = 3;
  c.frames = 6;
  c.image_side = 16;
  c.trunk = {{8, 3, 2}, {8, 3, 2}};
  c.head = {6, 3, 1};
  return c;
}

SelfAttentionParams random_attention(std::size_t c, SplitMix64& rng, double gamma) {
  SelfAttentionParams p;
  const std::size_t cq = c / 8;
  p.query = {random_tensor({cq, c, 1, 1}, rng), random_tensor({cq}, rng)};
  p.key = {random_tensor({cq, c, 1, 1}, rng), random_tensor({cq}, rng)};
  p.value = {random_tensor({c, c, 1, 1}, rng), random_tensor({c}, rng)};
  p.gamma = Tensor::from({1}, {gamma});
  return p;
}

bool bit_equal(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() &&
         std::memcmp(a.data().data(), b.data().data(), a.numel() * sizeof(double)) == 0;
}

}  // namespace

TEST(AssignBranch, CoarseBandwidthExamples) {
  EXPECT_EQ(assign_branch(0, 12, 3), 0u);
  EXPECT_EQ(assign_branch(4, 12, 3), 1u);
  EXPECT_EQ(assign_branch(11, 12, 3), 2u);
  EXPECT_EQ(assign_branch(1, 3, 3), 1u);
  // floor(7 * 3 / 10) = 2
  EXPECT_EQ(assign_branch(7, 10, 3), 2u);
}

TEST(AssignBranch, OutOfRangeIsContractError) {
  EXPECT_THROW(assign_branch(12, 12, 3), ContractError);
  EXPECT_THROW(assign_branch(0, 12, 0), ContractError);
}

TEST(AssignBranch, PartitionIsContiguousAndBalanced) {
  for (std::size_t b = 1; b <= 4; ++b) {
    for (std::size_t frames = b; frames <= 24; ++frames) {
      std::vector<std::size_t> counts(b, 0);
      std::size_t prev = 0;
      for (std::size_t t = 0; t < frames; ++t) {
        const std::size_t c = assign_branch(t, frames, b);
        ASSERT_LT(c, b);
        EXPECT_GE(c, prev);
        EXPECT_LE(c, prev + 1);
        prev = c;
        ++counts[c];
      }
      EXPECT_EQ(assign_branch(0, frames, b), 0u);
      EXPECT_EQ(assign_branch(frames - 1, frames, b), b - 1);
      if (frames % b == 0) {
        for (std::size_t n : counts) EXPECT_EQ(n, frames / b);
      }
    }
  }
}

TEST(SelfAttention, ZeroGammaIsBitwiseIdentity) {
  SplitMix64 rng(20);
  const SelfAttentionParams p = random_attention(16, rng, 0.0);
  const Tensor feat = random_tensor({16, 3, 5}, rng, -3, 3);
  EXPECT_TRUE(bit_equal(self_attention(feat, p), feat));
}

TEST(SelfAttention, SinglePositionMapIsOne) {
  SplitMix64 rng(21);
  Tensor map;
  self_attention(random_tensor({8, 1, 1}, rng), random_attention(8, rng, 1.0), &map);
  EXPECT_EQ(map.shape(), (Shape{1, 1}));
  EXPECT_EQ(map[0], 1.0);
}

TEST(SelfAttention, ConstantFeatureGivesUniformRows) {
  SplitMix64 rng(22);
  Tensor feat = Tensor::zeros({8, 3, 4});
  for (std::size_t c = 0; c < 8; ++c)
    for (std::size_t i = 0; i < 12; ++i) feat.mutable_data()[c * 12 + i] = 0.1 * static_cast<double>(c) - 0.3;
  Tensor map;
  self_attention(feat, random_attention(8, rng, 0.5), &map);
  for (double v : map.data()) EXPECT_NEAR(v, 1.0 / 12.0, 1e-15);
}

TEST(SelfAttention, RowsSumToOneAndAreShiftInvariant) {
  SplitMix64 rng(23);
  const Tensor feat = random_tensor({16, 4, 4}, rng, -2, 2);
  SelfAttentionParams p = random_attention(16, rng, 1.0);
  Tensor map;
  self_attention(feat, p, &map);
  for (std::size_t j = 0; j < 16; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < 16; ++i) {
      EXPECT_GE(map[j * 16 + i], 0.0);
      s += map[j * 16 + i];
    }
    EXPECT_NEAR(s, 1.0, 1e-9);
  }
  // A key bias shifts every logit in row j by q_j * b_k, a per-row constant.
  SelfAttentionParams shifted = p;
  shifted.key.bias = Tensor::from({2}, {p.key.bias[0] + 3.0, p.key.bias[1] - 2.0});
  Tensor map2;
  self_attention(feat, shifted, &map2);
  for (std::size_t i = 0; i < map.numel(); ++i) EXPECT_NEAR(map[i], map2[i], 1e-12);
}

// Exhaustive evaluation on a 2x2 map: all 16 source/target terms by hand.
TEST(SelfAttention, TwoByTwoMatchesExhaustiveOracle) {
  const std::size_t c = 8, len = 4;
  SplitMix64 rng(24);
  const Tensor feat = random_tensor({c, 2, 2}, rng, -1, 1);
  SelfAttentionParams p;
  Tensor unit = Tensor::zeros({1, c, 1, 1});
  unit.mutable_data()[0] = 1.0;  // query reads channel 0
  p.query = {unit, Tensor::zeros({1})};
  Tensor unit_k = Tensor::zeros({1, c, 1, 1});
  unit_k.mutable_data()[1] = 1.0;  // key reads channel 1
  p.key = {unit_k, Tensor::zeros({1})};
  Tensor eye = Tensor::zeros({c, c, 1, 1});
  for (std::size_t i = 0; i < c; ++i) eye.mutable_data()[i * c + i] = 1.0;
  p.value = {eye, Tensor::zeros({c})};
  p.gamma = Tensor::from({1}, {1.0});

  const Tensor out = self_attention(feat, p);
  for (std::size_t j = 0; j < len; ++j) {
    double logits[len];
    double mx = -INFINITY;
    for (std::size_t i = 0; i < len; ++i) {
      logits[i] = feat[0 * len + j] * feat[1 * len + i];
      mx = std::max(mx, logits[i]);
    }
    double z = 0.0;
    for (double& l : logits) z += (l = std::exp(l - mx));
    for (std::size_t ch = 0; ch < c; ++ch) {
      double o = 0.0;
      for (std::size_t i = 0; i < len; ++i) o += logits[i] / z * feat[ch * len + i];
      EXPECT_NEAR(out[ch * len + j], o + feat[ch * len + j], 1e-14) << ch << "," << j;
    }
  }
}

TEST(SelfAttention, TooFewChannelsIsConfigError) {
  SplitMix64 rng(25);
  SelfAttentionParams p = random_attention(8, rng, 0.0);
  EXPECT_THROW(self_attention(Tensor::zeros({7, 2, 2}), p), ConfigError);
}

TEST(SelfAttention, GradientReachesGamma) {
  SplitMix64 rng(26);
  SelfAttentionParams p = random_attention(8, rng, 0.0);
  p.gamma.set_requires_grad(true);
  const Tensor feat = random_tensor({8, 3, 3}, rng);
  Tape tape;
  TapeScope scope(tape);
  tape.backward(cta::testing::weighted_sum(self_attention(feat, p)));
  EXPECT_GT(std::abs(p.gamma.grad()[0]), 1e-6);
}

TEST(GlimpseConfig, Validation) {
  GlimpseConfig c = small_config();
  EXPECT_NO_THROW(c.validate());
  c.trunk = {{4, 3, 2}};
  EXPECT_THROW(c.validate(), ConfigError);
  c = small_config();
  c.frames = 2;
  EXPECT_THROW(c.validate(), ConfigError);
  c = small_config();
  c.num_branches = 0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(GlimpseModel, FreshModelEqualsAttentionBypassed) {
  SplitMix64 rng(30);
  const GlimpseModel model(small_config(), rng);
  const Tensor frame = random_tensor({1, 16, 16}, rng, 0, 1);
  AblationSwitches bypass;
  bypass.use_self_attention = false;
  for (std::size_t t = 0; t < 6; ++t) {
    EXPECT_TRUE(bit_equal(model.forward(frame, t), model.forward(frame, t, bypass)));
  }
  for (const BranchParams& b : model.branches()) EXPECT_EQ(b.attention.gamma[0], 0.0);
}

TEST(GlimpseModel, OutputWidthAndShapeErrors) {
  SplitMix64 rng(31);
  const GlimpseModel model(small_config(), rng);
  EXPECT_EQ(model.forward(Tensor::zeros({1, 16, 16}), 0).shape(), (Shape{6}));
  EXPECT_THROW(model.forward(Tensor::zeros({1, 15, 16}), 0), DimensionError);
  EXPECT_THROW(model.forward(Tensor::zeros({1, 16, 16}), 6), ContractError);
}

TEST(GlimpseModel, ZeroFrameZeroBiasGivesZeroGlimpse) {
  SplitMix64 rng(32);
  const GlimpseModel model(small_config(), rng);
  for (std::size_t t = 0; t < 6; ++t) {
    const Tensor g = model.forward(Tensor::zeros({1, 16, 16}), t);
    for (double v : g.data()) EXPECT_EQ(v, 0.0);
  }
}

TEST(GlimpseModel, FramesInSameBranchShareHeadParameters) {
  SplitMix64 rng(33);
  GlimpseModel model(small_config(), rng);
  EXPECT_EQ(model.route(0, {}), model.route(1, {}));
  EXPECT_NE(model.route(1, {}), model.route(2, {}));
  // Same node reached from both frames: the head is one object, not a copy.
  const Tensor frame = random_tensor({1, 16, 16}, rng, 0, 1);
  const GlimpseTrace a = model.forward_trace(frame, 0);
  const GlimpseTrace b = model.forward_trace(frame, 1);
  EXPECT_EQ(a.branch, b.branch);
  EXPECT_TRUE(bit_equal(a.glimpse, b.glimpse));
  AblationSwitches merged;
  merged.use_branches = false;
  for (std::size_t t = 0; t < 6; ++t) EXPECT_EQ(model.route(t, merged), 0u);
}

TEST(GlimpseModel, TrunkIsSharedAndHeadsAreLocal) {
  SplitMix64 rng(34);
  GlimpseModel model(small_config(), rng);
  const Tensor frame = random_tensor({1, 16, 16}, rng, 0, 1);
  std::vector<Tensor> base;
  for (std::size_t t = 0; t < 6; ++t) base.push_back(model.forward(frame, t).clone());

  // Trunk sharing: a single trunk instance regardless of branch count.
  EXPECT_EQ(model.trunk().size(), 2u);
  model.trunk()[0].bias.mutable_data()[0] += 0.5;
  for (std::size_t t = 0; t < 6; ++t) EXPECT_FALSE(bit_equal(model.forward(frame, t), base[t])) << t;
  model.trunk()[0].bias.mutable_data()[0] -= 0.5;

  model.branches()[1].head.bias.mutable_data()[0] += 0.5;
  for (std::size_t t = 0; t < 6; ++t) {
    const bool in_branch = model.route(t, {}) == 1;
    EXPECT_EQ(!bit_equal(model.forward(frame, t), base[t]), in_branch) << t;
  }
}

TEST(GlimpseModel, BranchesInitializedIndependently) {
  SplitMix64 rng(35);
  const GlimpseModel model(small_config(), rng);
  EXPECT_NE(model.branches()[0].head.weight.values(), model.branches()[1].head.weight.values());
  const ParameterList params = model.parameters();
  EXPECT_EQ(params.front().name, "glimpse.trunk.0.weight");
  EXPECT_EQ(params.back().name, "glimpse.branch2.head.bias");
}

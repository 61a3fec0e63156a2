#ifndef CTA_GLIMPSE_HPP_
#define CTA_GLIMPSE_HPP_

#include <cstddef>
#include <vector>

#include "cta/ablation.hpp"
#include "cta/parameters.hpp"
#include "cta/rng.hpp"
#include "cta/tensor.hpp"

namespace cta {

/// One convolution + ReLU stage; padding is kernel / 2.
struct ConvStage {
  std::size_t channels = 0;
  std::size_t kernel = 3;
  std::size_t stride = 1;
};

struct GlimpseConfig {
  std::size_t num_branches = 3;
  std::size_t frames = 12;
  std::size_t image_side = 64;
  std::size_t image_channels = 1;
  /// Shared stages applied to every frame.
  std::vector<ConvStage> trunk = {{8, 3, 2}, {16, 3, 2}, {32, 3, 2}};
  /// Branch-specific stage; its channel count is the glimpse width D.
  ConvStage head = {32, 3, 1};
  /// Query/key channels are trunk channels / qk_reduction.
  std::size_t qk_reduction = 8;

  /// Throws ConfigError on impossible geometry.
  void validate() const;
  std::size_t feature_width() const { return head.channels; }
  std::size_t trunk_channels() const;
  std::size_t trunk_side() const;
};

/// Frame t of T goes to branch min(floor(t * B / T), B - 1).
std::size_t assign_branch(std::size_t t, std::size_t frames, std::size_t branches);

struct ConvParams {
  Tensor weight;
  Tensor bias;
};

struct SelfAttentionParams {
  ConvParams query;
  ConvParams key;
  ConvParams value;
  Tensor gamma;  // [1], starts at exactly 0
};

struct BranchParams {
  SelfAttentionParams attention;
  ConvParams head;
};

/// Spatial self-attention over a [C x H x W] map:
///   q = Wq * x, k = Wk * x, v = Wv * x          (1x1 convolutions)
///   theta[j, i] = softmax_i(q_j . k_i)          (each target row sums to 1)
///   o[:, j] = sum_i theta[j, i] v[:, i]
///   out = gamma * o + x
/// When `attention_map` is given it receives theta as [L x L], L = H * W.
Tensor self_attention(const Tensor& feat, const SelfAttentionParams& params,
                      Tensor* attention_map = nullptr);

/// Intermediate values of one glimpse pass, kept for saliency maps.
struct GlimpseTrace {
  std::size_t branch = 0;
  Tensor trunk_out;
  Tensor head_in;  // self-attention output fed to the branch head
  Tensor glimpse;  // x_t
};

/// Glimpse sensor: shared trunk, coarse temporal routing, per-branch
/// self-attention and head, global average pooling to x_t.
class GlimpseModel {
 public:
  GlimpseModel(GlimpseConfig config, SplitMix64& rng);

  const GlimpseConfig& config() const { return m_config; }

  Tensor trunk_forward(const Tensor& frame) const;
  /// x_t for frame `t` of a T-frame clip.
  Tensor forward(const Tensor& frame, std::size_t t, const AblationSwitches& switches = {}) const;
  GlimpseTrace forward_trace(const Tensor& frame, std::size_t t,
                             const AblationSwitches& switches = {}) const;

  std::size_t route(std::size_t t, const AblationSwitches& switches) const;

  std::vector<ConvParams>& trunk() { return m_trunk; }
  std::vector<BranchParams>& branches() { return m_branches; }
  const std::vector<BranchParams>& branches() const { return m_branches; }

  /// Named as glimpse.trunk.<i>.*, glimpse.branch<c>.attn.*, glimpse.branch<c>.head.*.
  ParameterList parameters() const;

 private:
  GlimpseConfig m_config;
  std::vector<ConvParams> m_trunk;
  std::vector<BranchParams> m_branches;
};

}  // namespace cta

#endif  // CTA_GLIMPSE_HPP_

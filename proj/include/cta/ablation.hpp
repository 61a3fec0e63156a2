#ifndef CTA_ABLATION_HPP_
#define CTA_ABLATION_HPP_

namespace cta {

/// Switches that remove parts of the network without changing its parameters.
struct AblationSwitches {
  /// Off: every frame goes through branch 0 instead of its coarse temporal branch.
  bool use_branches = true;
  /// Off: A = H and the pooled representation is the plain mean of H.
  bool use_temporal_attention = true;
  /// Off: the branch self-attention block is skipped (same as gamma = 0).
  bool use_self_attention = true;
};

}  // namespace cta

#endif  // CTA_ABLATION_HPP_

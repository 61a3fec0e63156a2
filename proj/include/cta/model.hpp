#ifndef CTA_MODEL_HPP_
#define CTA_MODEL_HPP_

#include <cstdint>
#include <vector>

#include "cta/ablation.hpp"
#include "cta/glimpse.hpp"
#include "cta/parameters.hpp"
#include "cta/sequence.hpp"

namespace cta {

struct CtaNetConfig {
  GlimpseConfig glimpse;
  std::size_t hidden = 32;
  std::size_t num_classes = 6;
  GateMode gate_mode = GateMode::scalar;

  SequenceConfig sequence_config() const;
  void validate() const;
};

/// Glimpse sensor feeding the recurrent temporal-attention classifier.
class CtaNet {
 public:
  CtaNet(CtaNetConfig config, std::uint64_t seed);

  const CtaNetConfig& config() const { return m_config; }

  /// Class logits for T frames [C x S x S] in temporal order. When `traces`
  /// is given it receives the per-frame glimpse intermediates.
  Tensor logits(const std::vector<Tensor>& frames, const AblationSwitches& switches = {},
                std::vector<GlimpseTrace>* traces = nullptr) const;
  /// Class probabilities.
  Tensor forward(const std::vector<Tensor>& frames, const AblationSwitches& switches = {}) const;

  GlimpseModel& glimpse() { return m_glimpse; }
  SequenceModel& sequence() { return m_sequence; }
  const GlimpseModel& glimpse() const { return m_glimpse; }
  const SequenceModel& sequence() const { return m_sequence; }

  /// Glimpse parameters followed by sequence parameters.
  ParameterList parameters() const;

 private:
  CtaNetConfig m_config;
  SplitMix64 m_init_rng;
  GlimpseModel m_glimpse;
  SequenceModel m_sequence;
};

}  // namespace cta

#endif  // CTA_MODEL_HPP_

#include "cta/model.hpp"

#include <string>

#include "cta/errors.hpp"
#include "cta/ops.hpp"

namespace cta {

SequenceConfig CtaNetConfig::sequence_config() const {
  SequenceConfig s;
  s.input_width = glimpse.feature_width();
  s.hidden = hidden;
  s.num_classes = num_classes;
  s.frames = glimpse.frames;
  s.gate_mode = gate_mode;
  return s;
}

void CtaNetConfig::validate() const {
  glimpse.validate();
  sequence_config().validate();
}

CtaNet::CtaNet(CtaNetConfig config, std::uint64_t seed)
    : m_config((config.validate(), std::move(config))),
      m_init_rng(mix_seed(seed, 0x1417)),
      m_glimpse(m_config.glimpse, m_init_rng),
      m_sequence(m_config.sequence_config(), m_init_rng) {}

Tensor CtaNet::logits(const std::vector<Tensor>& frames, const AblationSwitches& switches,
                      std::vector<GlimpseTrace>* traces) const {
  const std::size_t t_count = m_config.glimpse.frames;
  if (frames.size() != t_count) {
    throw ContractError("CtaNet: expected " + std::to_string(t_count) + " frames, got " +
                        std::to_string(frames.size()));
  }
  std::vector<Tensor> glimpses;
  glimpses.reserve(t_count);
  if (traces) traces->clear();
  for (std::size_t t = 0; t < t_count; ++t) {
    GlimpseTrace trace = m_glimpse.forward_trace(frames[t], t, switches);
    glimpses.push_back(trace.glimpse);
    if (traces) traces->push_back(std::move(trace));
  }
  return m_sequence.forward_logits(glimpses, switches);
}

Tensor CtaNet::forward(const std::vector<Tensor>& frames, const AblationSwitches& switches) const {
  return softmax(logits(frames, switches), 0);
}

ParameterList CtaNet::parameters() const {
  ParameterList out = m_glimpse.parameters();
  ParameterList seq = m_sequence.parameters();
  out.insert(out.end(), seq.begin(), seq.end());
  return out;
}

}  // namespace cta

#ifndef CTA_SEQUENCE_HPP_
#define CTA_SEQUENCE_HPP_

#include <cstddef>
#include <string>
#include <vector>

#include "cta/ablation.hpp"
#include "cta/parameters.hpp"
#include "cta/rng.hpp"
#include "cta/tensor.hpp"

namespace cta {

/// Fully gated LSTM. Gate rows are stacked as [input; forget; output; candidate].
struct LstmParams {
  Tensor w_input;   // [4n x D]
  Tensor w_hidden;  // [4n x n]
  Tensor bias;      // [4n]

  std::size_t hidden() const { return w_hidden.dim(1); }
  std::size_t input() const { return w_input.dim(1); }
};

struct LstmState {
  Tensor h;     // [n]
  Tensor cell;  // [n]

  static LstmState zeros(std::size_t hidden);
};

/// i, f, o = sigmoid(.), g = tanh(.), cell' = f*cell + i*g, h' = o*tanh(cell').
LstmState lstm_step(const Tensor& x, const LstmState& state, const LstmParams& params);

/// Runs the LSTM from a zero state over the rows of X [T x D]; returns H [T x n].
Tensor lstm_sequence(const Tensor& inputs, const LstmParams& params);

/// How beta_{t,t'} gates h_{t'}: one scalar per pair, or one value per unit.
enum class GateMode { scalar, vector };

GateMode parse_gate_mode(const std::string& text);
std::string to_string(GateMode mode);

struct TemporalAttentionParams {
  GateMode mode = GateMode::scalar;
  Tensor w_psi;        // [n x n]
  Tensor w_psi_prime;  // [n x n]
  Tensor b_psi;        // [n]
  Tensor w_g;          // [1 x n] (scalar) or [n x n] (vector)
  Tensor b_g;          // [1] (scalar) or [n] (vector)
  Tensor w_phi;        // [n x 1]
  Tensor b_phi;        // [1]
};

/// For every pair (t, t'), including t' = t:
///   psi = tanh(W_psi h_t + W_psi' h_t' + b_psi)
///   beta = sigmoid(W_g psi + b_g)
///   a_t = h_t + sum_t' beta_{t,t'} h_t'
/// `gates`, when given, receives beta as [T x T] (scalar) or [T x T x n].
Tensor temporal_attention(const Tensor& states, const TemporalAttentionParams& params,
                          Tensor* gates = nullptr);

struct PoolResult {
  Tensor pooled;   // s [n]
  Tensor weights;  // w [T]
};

/// w = softmax_t(a_t . W_phi + b_phi), s = sum_t w_t a_t.
PoolResult attention_pool(const Tensor& activations, const TemporalAttentionParams& params);

struct ClassifierParams {
  Tensor weight;  // [n x K]
  Tensor bias;    // [K]
};

Tensor classify_logits(const Tensor& pooled, const ClassifierParams& params);
/// softmax(s . W_cls + b_cls).
Tensor classify(const Tensor& pooled, const ClassifierParams& params);

struct SequenceConfig {
  std::size_t input_width = 32;  // D
  std::size_t hidden = 32;       // n
  std::size_t num_classes = 6;   // K
  std::size_t frames = 12;       // T
  GateMode gate_mode = GateMode::scalar;

  void validate() const;
};

/// Recurrent half of the network: LSTM, temporal attention, pooling, classifier.
class SequenceModel {
 public:
  SequenceModel(SequenceConfig config, SplitMix64& rng);

  const SequenceConfig& config() const { return m_config; }

  /// Class logits for exactly T glimpse vectors in temporal order.
  Tensor forward_logits(const std::vector<Tensor>& glimpses,
                        const AblationSwitches& switches = {}) const;
  Tensor forward_video(const std::vector<Tensor>& glimpses,
                       const AblationSwitches& switches = {}) const;

  LstmParams& lstm() { return m_lstm; }
  TemporalAttentionParams& attention() { return m_attention; }
  ClassifierParams& classifier() { return m_classifier; }
  const LstmParams& lstm() const { return m_lstm; }
  const TemporalAttentionParams& attention() const { return m_attention; }
  const ClassifierParams& classifier() const { return m_classifier; }

  /// Named lstm.*, tattn.*, cls.*.
  ParameterList parameters() const;

 private:
  SequenceConfig m_config;
  LstmParams m_lstm;
  TemporalAttentionParams m_attention;
  ClassifierParams m_classifier;
};

}  // namespace cta

#endif  // CTA_SEQUENCE_HPP_

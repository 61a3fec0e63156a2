#include "cta/sequence.hpp"

#include <cmath>

#include "cta/errors.hpp"
#include "cta/ops.hpp"

namespace cta {

namespace {

Tensor uniform_tensor(Shape shape, double bound, SplitMix64& rng) {
  std::vector<double> values(shape_numel(shape));
  for (double& v : values) v = rng.uniform(-bound, bound);
  return Tensor::from(std::move(shape), std::move(values), true);
}

struct Gates {
  Tensor input, forget, output, candidate;
};

Gates split_gates(const Tensor& z, std::size_t n) {
  const Tensor ifo = sigmoid(slice(z, 0, 3 * n));
  return {slice(ifo, 0, n), slice(ifo, n, n), slice(ifo, 2 * n, n), tanh(slice(z, 3 * n, n))};
}

LstmState advance(const Tensor& z, const LstmState& state, std::size_t n) {
  const Gates g = split_gates(z, n);
  LstmState next;
  next.cell = add(mul(g.forget, state.cell), mul(g.input, g.candidate));
  next.h = mul(g.output, tanh(next.cell));
  return next;
}

void check_states(const Tensor& states, std::size_t n, const char* op) {
  if (states.rank() != 2 || states.dim(1) != n || states.dim(0) < 1) {
    throw DimensionError(std::string(op) + ": expected [T x " + std::to_string(n) +
                         "] with T >= 1, got " + shape_str(states.shape()));
  }
}

}  // namespace

LstmState LstmState::zeros(std::size_t hidden) {
  return {Tensor::zeros({hidden}), Tensor::zeros({hidden})};
}

LstmState lstm_step(const Tensor& x, const LstmState& state, const LstmParams& params) {
  const std::size_t n = params.hidden();
  if (x.rank() != 1 || x.dim(0) != params.input() || state.h.shape() != Shape{n} ||
      state.cell.shape() != Shape{n}) {
    throw DimensionError("lstm_step: input " + shape_str(x.shape()) + ", state " +
                         shape_str(state.h.shape()) + "/" + shape_str(state.cell.shape()) +
                         " do not fit weights " + shape_str(params.w_input.shape()));
  }
  const Tensor z =
      add(add(matvec(params.w_input, x), matvec(params.w_hidden, state.h)), params.bias);
  return advance(z, state, n);
}

Tensor lstm_sequence(const Tensor& inputs, const LstmParams& params) {
  if (inputs.rank() != 2 || inputs.dim(1) != params.input()) {
    throw DimensionError("lstm_sequence: inputs " + shape_str(inputs.shape()) +
                         " do not fit weights " + shape_str(params.w_input.shape()));
  }
  const std::size_t n = params.hidden();
  // Input projections for all steps at once: [T x 4n].
  const Tensor projected = add_row(matmul(inputs, transpose(params.w_input)), params.bias);
  LstmState state = LstmState::zeros(n);
  std::vector<Tensor> hs;
  for (std::size_t t = 0; t < inputs.dim(0); ++t) {
    const Tensor z = add(row(projected, t), matvec(params.w_hidden, state.h));
    state = advance(z, state, n);
    hs.push_back(state.h);
  }
  return stack_rows(hs);
}

GateMode parse_gate_mode(const std::string& text) {
  if (text == "scalar") return GateMode::scalar;
  if (text == "vector") return GateMode::vector;
  throw ConfigError("unknown gate mode '" + text + "' (expected scalar or vector)");
}

std::string to_string(GateMode mode) { return mode == GateMode::scalar ? "scalar" : "vector"; }

Tensor temporal_attention(const Tensor& states, const TemporalAttentionParams& params,
                          Tensor* gates) {
  const std::size_t n = params.w_psi.dim(0);
  check_states(states, n, "temporal_attention");
  const std::size_t t_count = states.dim(0);
  const Tensor p = matmul(states, transpose(params.w_psi));
  const Tensor q = matmul(states, transpose(params.w_psi_prime));
  // psi[t, t', :] = tanh(W_psi h_t + W_psi' h_t' + b_psi), flattened to [T*T x n].
  const Tensor psi =
      tanh(add_row(reshape(outer_add(p, q), {t_count * t_count, n}), params.b_psi));
  if (params.mode == GateMode::scalar) {
    const Tensor logits = add_scalar(matmul(psi, transpose(params.w_g)), params.b_g);
    const Tensor beta = reshape(sigmoid(logits), {t_count, t_count});
    if (gates) *gates = beta;
    return add(states, matmul(beta, states));
  }
  const Tensor logits = add_row(matmul(psi, transpose(params.w_g)), params.b_g);
  const Tensor beta = reshape(sigmoid(logits), {t_count, t_count, n});
  if (gates) *gates = beta;
  return add(states, pairwise_gate_sum(beta, states));
}

PoolResult attention_pool(const Tensor& activations, const TemporalAttentionParams& params) {
  const std::size_t n = params.w_phi.dim(0);
  check_states(activations, n, "attention_pool");
  const std::size_t t_count = activations.dim(0);
  const Tensor scores =
      add_scalar(reshape(matmul(activations, params.w_phi), {t_count}), params.b_phi);
  PoolResult out;
  out.weights = softmax(scores, 0);
  out.pooled = reshape(matmul(reshape(out.weights, {1, t_count}), activations), {n});
  return out;
}

Tensor classify_logits(const Tensor& pooled, const ClassifierParams& params) {
  if (pooled.rank() != 1 || pooled.dim(0) != params.weight.dim(0)) {
    throw DimensionError("classify: pooled " + shape_str(pooled.shape()) +
                         " does not fit weights " + shape_str(params.weight.shape()));
  }
  const std::size_t k = params.weight.dim(1);
  return add(reshape(matmul(reshape(pooled, {1, pooled.dim(0)}), params.weight), {k}),
             params.bias);
}

Tensor classify(const Tensor& pooled, const ClassifierParams& params) {
  return softmax(classify_logits(pooled, params), 0);
}

void SequenceConfig::validate() const {
  if (input_width < 1 || hidden < 1) throw ConfigError("sequence widths must be >= 1");
  if (num_classes < 2) throw ConfigError("num_classes must be >= 2");
  if (frames < 1) throw ConfigError("frames must be >= 1");
}

SequenceModel::SequenceModel(SequenceConfig config, SplitMix64& rng)
    : m_config(std::move(config)) {
  m_config.validate();
  const std::size_t n = m_config.hidden;
  const std::size_t d = m_config.input_width;
  const double bound = 1.0 / std::sqrt(static_cast<double>(n));

  m_lstm.w_input = uniform_tensor({4 * n, d}, bound, rng);
  m_lstm.w_hidden = uniform_tensor({4 * n, n}, bound, rng);
  std::vector<double> bias(4 * n, 0.0);
  for (std::size_t i = n; i < 2 * n; ++i) bias[i] = 1.0;  // forget gate
  m_lstm.bias = Tensor::from({4 * n}, std::move(bias), true);

  m_attention.mode = m_config.gate_mode;
  m_attention.w_psi = uniform_tensor({n, n}, bound, rng);
  m_attention.w_psi_prime = uniform_tensor({n, n}, bound, rng);
  m_attention.b_psi = Tensor::zeros({n}, true);
  const bool scalar = m_config.gate_mode == GateMode::scalar;
  m_attention.w_g = uniform_tensor({scalar ? 1 : n, n}, bound, rng);
  m_attention.b_g = Tensor::zeros({scalar ? 1 : n}, true);
  m_attention.w_phi = uniform_tensor({n, 1}, bound, rng);
  m_attention.b_phi = Tensor::zeros({1}, true);

  m_classifier.weight = uniform_tensor({n, m_config.num_classes}, bound, rng);
  m_classifier.bias = Tensor::zeros({m_config.num_classes}, true);
}

Tensor SequenceModel::forward_logits(const std::vector<Tensor>& glimpses,
                                     const AblationSwitches& switches) const {
  if (glimpses.size() != m_config.frames) {
    throw ContractError("forward_video: expected " + std::to_string(m_config.frames) +
                        " glimpse vectors, got " + std::to_string(glimpses.size()));
  }
  const Tensor states = lstm_sequence(stack_rows(glimpses), m_lstm);
  Tensor pooled;
  if (switches.use_temporal_attention) {
    pooled = attention_pool(temporal_attention(states, m_attention), m_attention).pooled;
  } else {
    pooled = mean(states, 0);
  }
  return classify_logits(pooled, m_classifier);
}

Tensor SequenceModel::forward_video(const std::vector<Tensor>& glimpses,
                                    const AblationSwitches& switches) const {
  return softmax(forward_logits(glimpses, switches), 0);
}

ParameterList SequenceModel::parameters() const {
  return {
      {"lstm.w_input", m_lstm.w_input},
      {"lstm.w_hidden", m_lstm.w_hidden},
      {"lstm.bias", m_lstm.bias},
      {"tattn.w_psi", m_attention.w_psi},
      {"tattn.w_psi_prime", m_attention.w_psi_prime},
      {"tattn.b_psi", m_attention.b_psi},
      {"tattn.w_g", m_attention.w_g},
      {"tattn.b_g", m_attention.b_g},
      {"tattn.w_phi", m_attention.w_phi},
      {"tattn.b_phi", m_attention.b_phi},
      {"cls.weight", m_classifier.weight},
      {"cls.bias", m_classifier.bias},
  };
}

}  // namespace cta

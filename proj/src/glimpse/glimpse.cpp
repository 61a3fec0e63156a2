#include "cta/glimpse.hpp"

#include <cmath>
#include <string>

#include "cta/errors.hpp"
#include "cta/ops.hpp"

namespace cta {

namespace {

std::size_t stage_output_side(std::size_t side, const ConvStage& stage) {
  const std::size_t pad = stage.kernel / 2;
  return (side + 2 * pad - stage.kernel) / stage.stride + 1;
}

Tensor uniform_tensor(Shape shape, double bound, SplitMix64& rng) {
  std::vector<double> values(shape_numel(shape));
  for (double& v : values) v = rng.uniform(-bound, bound);
  return Tensor::from(std::move(shape), std::move(values), true);
}

ConvParams make_conv(std::size_t cout, std::size_t cin, std::size_t k, double bound,
                     SplitMix64& rng) {
  ConvParams p;
  p.weight = uniform_tensor({cout, cin, k, k}, bound, rng);
  p.bias = Tensor::zeros({cout}, true);
  return p;
}

Tensor conv_relu(const Tensor& x, const ConvParams& p, const ConvStage& stage) {
  return relu(conv2d(x, p.weight, p.bias, stage.stride, stage.kernel / 2));
}

}  // namespace

std::size_t GlimpseConfig::trunk_channels() const {
  return trunk.empty() ? image_channels : trunk.back().channels;
}

std::size_t GlimpseConfig::trunk_side() const {
  std::size_t side = image_side;
  for (const ConvStage& s : trunk) side = stage_output_side(side, s);
  return side;
}

void GlimpseConfig::validate() const {
  if (num_branches < 1) throw ConfigError("num_branches must be >= 1");
  if (frames < num_branches) {
    throw ConfigError("frames (" + std::to_string(frames) + ") must be >= num_branches (" +
                      std::to_string(num_branches) + ")");
  }
  if (image_side < 1 || image_channels < 1) throw ConfigError("image geometry must be positive");
  std::size_t side = image_side;
  auto check_stage = [&](const ConvStage& s, const std::string& what) {
    if (s.channels < 1 || s.kernel < 1 || s.stride < 1) {
      throw ConfigError(what + ": channels, kernel and stride must be >= 1");
    }
    if (s.kernel > side + 2 * (s.kernel / 2)) {
      throw ConfigError(what + ": kernel " + std::to_string(s.kernel) + " exceeds map side " +
                        std::to_string(side));
    }
    side = stage_output_side(side, s);
  };
  for (std::size_t i = 0; i < trunk.size(); ++i) check_stage(trunk[i], "trunk stage " + std::to_string(i));
  if (qk_reduction < 1) throw ConfigError("qk_reduction must be >= 1");
  if (trunk_channels() < 8 || trunk_channels() / qk_reduction < 1) {
    throw ConfigError("self-attention needs at least 8 trunk channels (got " +
                      std::to_string(trunk_channels()) + ")");
  }
  check_stage(head, "branch head");
}

std::size_t assign_branch(std::size_t t, std::size_t frames, std::size_t branches) {
  if (branches < 1) throw ContractError("assign_branch: branch count must be >= 1");
  if (t >= frames) {
    throw ContractError("assign_branch: frame " + std::to_string(t) + " out of range for " +
                        std::to_string(frames) + " frames");
  }
  return std::min(t * branches / frames, branches - 1);
}

Tensor self_attention(const Tensor& feat, const SelfAttentionParams& params,
                      Tensor* attention_map) {
  if (feat.rank() != 3) {
    throw DimensionError("self_attention: expected [C x H x W], got " + shape_str(feat.shape()));
  }
  const std::size_t c = feat.dim(0);
  const std::size_t len = feat.dim(1) * feat.dim(2);
  if (c < 8) {
    throw ConfigError("self_attention: " + std::to_string(c) +
                      " channels cannot be reduced for query/key (need >= 8)");
  }
  const Tensor q = conv2d(feat, params.query.weight, params.query.bias, 1, 0);
  const Tensor k = conv2d(feat, params.key.weight, params.key.bias, 1, 0);
  const Tensor v = conv2d(feat, params.value.weight, params.value.bias, 1, 0);
  const std::size_t cq = q.dim(0);
  if (k.dim(0) != cq || v.dim(0) != c) {
    throw DimensionError("self_attention: query " + shape_str(q.shape()) + ", key " +
                         shape_str(k.shape()) + ", value " + shape_str(v.shape()) +
                         " inconsistent with input " + shape_str(feat.shape()));
  }
  const Tensor energy = matmul(transpose(reshape(q, {cq, len})), reshape(k, {cq, len}));
  const Tensor theta = softmax(energy, 1);
  if (attention_map) *attention_map = theta;
  const Tensor o = matmul(reshape(v, {c, len}), transpose(theta));
  return add(scale(reshape(o, feat.shape()), params.gamma), feat);
}

GlimpseModel::GlimpseModel(GlimpseConfig config, SplitMix64& rng) : m_config(std::move(config)) {
  m_config.validate();
  std::size_t cin = m_config.image_channels;
  for (const ConvStage& s : m_config.trunk) {
    const double fan_in = static_cast<double>(cin * s.kernel * s.kernel);
    m_trunk.push_back(make_conv(s.channels, cin, s.kernel, std::sqrt(6.0 / fan_in), rng));
    cin = s.channels;
  }
  const std::size_t c = m_config.trunk_channels();
  const std::size_t cq = c / m_config.qk_reduction;
  const double attn_bound = 1.0 / std::sqrt(static_cast<double>(c));
  const ConvStage& h = m_config.head;
  const double head_bound = std::sqrt(6.0 / static_cast<double>(c * h.kernel * h.kernel));
  for (std::size_t b = 0; b < m_config.num_branches; ++b) {
    BranchParams bp;
    bp.attention.query = make_conv(cq, c, 1, attn_bound, rng);
    bp.attention.key = make_conv(cq, c, 1, attn_bound, rng);
    bp.attention.value = make_conv(c, c, 1, attn_bound, rng);
    bp.attention.gamma = Tensor::zeros({1}, true);
    bp.head = make_conv(h.channels, c, h.kernel, head_bound, rng);
    m_branches.push_back(std::move(bp));
  }
}

Tensor GlimpseModel::trunk_forward(const Tensor& frame) const {
  const Shape expected = {m_config.image_channels, m_config.image_side, m_config.image_side};
  if (frame.shape() != expected) {
    throw DimensionError("glimpse: frame " + shape_str(frame.shape()) + " does not match " +
                         shape_str(expected));
  }
  Tensor x = frame;
  for (std::size_t i = 0; i < m_trunk.size(); ++i) x = conv_relu(x, m_trunk[i], m_config.trunk[i]);
  return x;
}

std::size_t GlimpseModel::route(std::size_t t, const AblationSwitches& switches) const {
  const std::size_t b = assign_branch(t, m_config.frames, m_config.num_branches);
  return switches.use_branches ? b : 0;
}

GlimpseTrace GlimpseModel::forward_trace(const Tensor& frame, std::size_t t,
                                         const AblationSwitches& switches) const {
  GlimpseTrace trace;
  trace.branch = route(t, switches);
  const BranchParams& bp = m_branches[trace.branch];
  trace.trunk_out = trunk_forward(frame);
  trace.head_in = switches.use_self_attention ? self_attention(trace.trunk_out, bp.attention)
                                              : trace.trunk_out;
  trace.glimpse = global_avg_pool_2d(conv_relu(trace.head_in, bp.head, m_config.head));
  return trace;
}

Tensor GlimpseModel::forward(const Tensor& frame, std::size_t t,
                             const AblationSwitches& switches) const {
  return forward_trace(frame, t, switches).glimpse;
}

ParameterList GlimpseModel::parameters() const {
  ParameterList out;
  for (std::size_t i = 0; i < m_trunk.size(); ++i) {
    const std::string base = "glimpse.trunk." + std::to_string(i);
    out.push_back({base + ".weight", m_trunk[i].weight});
    out.push_back({base + ".bias", m_trunk[i].bias});
  }
  for (std::size_t b = 0; b < m_branches.size(); ++b) {
    const std::string base = "glimpse.branch" + std::to_string(b);
    const BranchParams& bp = m_branches[b];
    out.push_back({base + ".attn.query.weight", bp.attention.query.weight});
    out.push_back({base + ".attn.query.bias", bp.attention.query.bias});
    out.push_back({base + ".attn.key.weight", bp.attention.key.weight});
    out.push_back({base + ".attn.key.bias", bp.attention.key.bias});
    out.push_back({base + ".attn.value.weight", bp.attention.value.weight});
    out.push_back({base + ".attn.value.bias", bp.attention.value.bias});
    out.push_back({base + ".attn.gamma", bp.attention.gamma});
    out.push_back({base + ".head.weight", bp.head.weight});
    out.push_back({base + ".head.bias", bp.head.bias});
  }
  return out;
}

}  // namespace cta

#include "cta/training.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "cta/errors.hpp"
#include "cta/ops.hpp"
#include "cta/tape.hpp"

namespace cta {

void TrainConfig::validate(std::size_t num_branches) const {
  if (!(lr0 > 0.0)) throw ConfigError("learning rate must be > 0");
  if (!(0.0 < beta1 && beta1 < beta2 && beta2 < 1.0)) {
    throw ConfigError("Adam betas must satisfy 0 < beta1 < beta2 < 1");
  }
  if (!(adam_eps > 0.0)) throw ConfigError("adam_eps must be > 0");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw ConfigError("lr_decay must lie in (0, 1]");
  if (decay_every < 1) throw ConfigError("decay_every must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (frames < num_branches) {
    throw ConfigError("frames (" + std::to_string(frames) + ") must be >= num_branches (" +
                      std::to_string(num_branches) + ")");
  }
  if (clip_norm < 0.0) throw ConfigError("clip_norm must be >= 0");
}

double lr_at(const TrainConfig& config, std::size_t epoch) {
  return config.lr0 * std::pow(config.lr_decay, static_cast<double>(epoch / config.decay_every));
}

std::vector<std::size_t> sample_frames(std::size_t length, std::size_t frames) {
  if (length < 1) throw ContractError("sample_frames: video has no frames");
  std::vector<std::size_t> out(frames);
  for (std::size_t i = 0; i < frames; ++i) out[i] = i * length / frames;
  return out;
}

std::vector<std::size_t> sample_frames_jittered(std::size_t length, std::size_t frames,
                                                SplitMix64& rng) {
  if (length < 1) throw ContractError("sample_frames: video has no frames");
  std::vector<std::size_t> out(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    const double pos = (static_cast<double>(i) + rng.uniform()) * static_cast<double>(length) /
                       static_cast<double>(frames);
    out[i] = std::min(static_cast<std::size_t>(pos), length - 1);
  }
  return out;
}

std::vector<Tensor> clip_frames(const VideoSample& video, const std::vector<std::size_t>& indices) {
  std::vector<Tensor> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(video.frame(i));
  return out;
}

Tensor cross_entropy(const Tensor& probs, std::size_t label) {
  return neg_log_pick(probs, label, 1e-12);
}

AdamOptimizer::AdamOptimizer(ParameterList params, double beta1, double beta2, double eps)
    : m_params(std::move(params)), m_beta1(beta1), m_beta2(beta2), m_eps(eps) {
  for (const NamedTensor& p : m_params) {
    m_m.emplace_back(p.tensor.numel(), 0.0);
    m_v.emplace_back(p.tensor.numel(), 0.0);
  }
}

void AdamOptimizer::step(double lr) {
  if (!(lr > 0.0)) throw ContractError("adam: learning rate must be > 0");
  for (const NamedTensor& p : m_params) {
    for (double g : p.tensor.grad()) {
      if (!std::isfinite(g)) throw NumericError("non-finite gradient for parameter " + p.name);
    }
  }
  ++m_steps;
  const double c1 = 1.0 - std::pow(m_beta1, static_cast<double>(m_steps));
  const double c2 = 1.0 - std::pow(m_beta2, static_cast<double>(m_steps));
  for (std::size_t pi = 0; pi < m_params.size(); ++pi) {
    Tensor& t = m_params[pi].tensor;
    auto values = t.mutable_data();
    auto grads = t.grad();
    std::vector<double>& m = m_m[pi];
    std::vector<double>& v = m_v[pi];
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double g = grads[i];
      m[i] = m_beta1 * m[i] + (1.0 - m_beta1) * g;
      v[i] = m_beta2 * v[i] + (1.0 - m_beta2) * g * g;
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      values[i] -= lr * m_hat / (std::sqrt(v_hat) + m_eps);
    }
  }
}

double global_grad_norm(const ParameterList& params) {
  double sq = 0.0;
  for (const NamedTensor& p : params)
    for (double g : p.tensor.grad()) sq += g * g;
  return std::sqrt(sq);
}

double clip_grad_norm(ParameterList& params, double max_norm) {
  const double norm = global_grad_norm(params);
  if (max_norm > 0.0 && norm > max_norm) {
    const double factor = max_norm / norm;
    for (NamedTensor& p : params)
      for (double& g : p.tensor.mutable_grad()) g *= factor;
  }
  return norm;
}

std::size_t argmax(const Tensor& t) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < t.numel(); ++i)
    if (t[i] > t[best]) best = i;
  return best;
}

std::size_t predict(const CtaNet& model, const VideoSample& video, std::size_t frames,
                    const AblationSwitches& switches,
                    const std::vector<std::size_t>& frame_order) {
  NoGradScope no_grad;
  std::vector<std::size_t> idx = sample_frames(video.length, frames);
  if (!frame_order.empty()) {
    std::vector<std::size_t> permuted;
    for (std::size_t k : frame_order) permuted.push_back(idx.at(k));
    idx = std::move(permuted);
  }
  return argmax(model.logits(clip_frames(video, idx), switches));
}

double accuracy(const CtaNet& model, const Dataset& data, const std::vector<std::size_t>& indices,
                std::size_t frames, const AblationSwitches& switches) {
  if (indices.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::size_t correct = 0;
  for (std::size_t i : indices) {
    const VideoSample& v = data.videos.at(i);
    if (predict(model, v, frames, switches) == v.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(indices.size());
}

namespace {

ParameterList snapshot(const ParameterList& params) {
  ParameterList out;
  for (const NamedTensor& p : params) out.push_back({p.name, p.tensor.clone()});
  return out;
}

void restore(ParameterList& params, const ParameterList& saved) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto dst = params[i].tensor.mutable_data();
    auto src = saved[i].tensor.data();
    std::copy(src.begin(), src.end(), dst.begin());
  }
}

}  // namespace

TrainResult train(CtaNet& model, const Dataset& data, const std::vector<std::size_t>& train_idx,
                  const std::vector<std::size_t>& val_idx, const TrainConfig& config,
                  const TrainHooks& hooks) {
  config.validate(model.config().glimpse.num_branches);
  if (train_idx.empty()) throw ContractError("train: empty training set");
  if (config.frames != model.config().glimpse.frames) {
    throw ConfigError("train: config samples " + std::to_string(config.frames) +
                      " frames but the model expects " +
                      std::to_string(model.config().glimpse.frames));
  }
  const VideoSample& first = data.videos.at(train_idx.front());
  for (std::size_t i : train_idx) {
    const VideoSample& v = data.videos.at(i);
    if (v.side != first.side || v.channels != first.channels) {
      throw ContractError("train: video " + std::to_string(v.id) + " has different frame geometry");
    }
  }

  ParameterList params = model.parameters();
  AdamOptimizer adam(params, config.beta1, config.beta2, config.adam_eps);
  SplitMix64 order_rng(mix_seed(config.seed, 0x5eed));
  SplitMix64 jitter_rng(mix_seed(config.seed, 0x717e));

  TrainResult result;
  result.best_val_acc = -1.0;
  std::vector<std::size_t> order = train_idx;
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = lr_at(config, epoch);
    shuffle(order, order_rng);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      const double inv_batch = 1.0 / static_cast<double>(stop - start);
      zero_grads(params);
      for (std::size_t b = start; b < stop; ++b) {
        const VideoSample& v = data.videos[order[b]];
        const auto idx = config.jitter ? sample_frames_jittered(v.length, config.frames, jitter_rng)
                                       : sample_frames(v.length, config.frames);
        Tape tape;
        TapeScope scope(tape);
        const Tensor probs = model.forward(clip_frames(v, idx), config.switches);
        const Tensor loss = cross_entropy(probs, v.label);
        const double lv = loss.item();
        if (!std::isfinite(lv)) {
          throw NumericError("training diverged (loss " + std::to_string(lv) + ") at epoch " +
                             std::to_string(epoch) + ", step " + std::to_string(step));
        }
        loss_sum += lv;
        if (argmax(probs) == v.label) ++correct;
        tape.backward(scale(loss, inv_batch));
      }
      const double norm = clip_grad_norm(params, config.clip_norm);
      if (config.clip_norm > 0.0 && norm > config.clip_norm) {
        ++result.clipped_steps;
        if (hooks.log) {
          char buf[128];
          std::snprintf(buf, sizeof(buf), "epoch %zu step %zu: clipped gradient norm %.6g to %.6g",
                        epoch, step, norm, config.clip_norm);
          hooks.log(buf);
        }
      }
      adam.step(lr);
      ++step;
    }
    EpochMetrics m;
    m.epoch = epoch;
    m.step = step;
    m.lr = lr;
    m.train_loss = loss_sum / static_cast<double>(order.size());
    m.train_acc = static_cast<double>(correct) / static_cast<double>(order.size());
    m.val_acc = accuracy(model, data, val_idx, config.frames, config.switches);
    result.log.push_back(m);
    if (hooks.on_epoch) hooks.on_epoch(m);
    const bool better = val_idx.empty() || m.val_acc > result.best_val_acc;
    if (better) {
      result.best_epoch = epoch;
      result.best_val_acc = m.val_acc;
      result.best_parameters = snapshot(params);
    }
  }
  if (!result.best_parameters.empty()) restore(params, result.best_parameters);
  return result;
}

void write_metrics_csv(const std::filesystem::path& path, const std::vector<EpochMetrics>& log,
                       const std::string& comment) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("cannot write " + path.string());
  if (!comment.empty()) os << "# " << comment << '\n';
  os << "epoch,step,lr,train_loss,train_acc,val_acc\n";
  char buf[256];
  for (const EpochMetrics& m : log) {
    std::snprintf(buf, sizeof(buf), "%zu,%zu,%.10g,%.17g,%.17g,%.17g\n", m.epoch, m.step, m.lr,
                  m.train_loss, m.train_acc, m.val_acc);
    os << buf;
  }
  if (!os) throw FormatError("failed writing " + path.string());
}

}  // namespace cta

#ifndef CTA_TRAINING_HPP_
#define CTA_TRAINING_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "cta/ablation.hpp"
#include "cta/data.hpp"
#include "cta/model.hpp"
#include "cta/parameters.hpp"
#include "cta/rng.hpp"

namespace cta {

struct TrainConfig {
  double lr0 = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double lr_decay = 0.1;
  std::size_t decay_every = 25;  // epochs
  std::size_t batch_size = 4;    // videos
  std::size_t frames = 12;       // T
  std::size_t epochs = 40;
  std::uint64_t seed = 1;
  /// Global gradient-norm clip; 0 disables.
  double clip_norm = 5.0;
  /// Random offset inside each sampling interval instead of its start.
  bool jitter = false;
  AblationSwitches switches;

  void validate(std::size_t num_branches) const;
};

/// lr0 * decay^floor(epoch / decay_every).
double lr_at(const TrainConfig& config, std::size_t epoch);

/// floor(i * L / T) for i = 0..T-1. Repeats frames when L < T.
std::vector<std::size_t> sample_frames(std::size_t length, std::size_t frames);
/// floor((i + u_i) * L / T) with u_i uniform in [0, 1).
std::vector<std::size_t> sample_frames_jittered(std::size_t length, std::size_t frames,
                                                SplitMix64& rng);

/// The frames of `video` at `indices`, as model inputs.
std::vector<Tensor> clip_frames(const VideoSample& video, const std::vector<std::size_t>& indices);

/// -log(max(p_y, 1e-12)).
Tensor cross_entropy(const Tensor& probs, std::size_t label);

/// Adam with bias correction. Reads gradients from the parameters' grad
/// buffers and updates their values in place.
class AdamOptimizer {
 public:
  AdamOptimizer(ParameterList params, double beta1, double beta2, double eps);

  /// Throws NumericError naming the parameter on a non-finite gradient.
  void step(double lr);

  std::size_t steps() const { return m_steps; }
  const std::vector<std::vector<double>>& first_moment() const { return m_m; }
  const std::vector<std::vector<double>>& second_moment() const { return m_v; }

 private:
  ParameterList m_params;
  double m_beta1, m_beta2, m_eps;
  std::size_t m_steps = 0;
  std::vector<std::vector<double>> m_m, m_v;
};

double global_grad_norm(const ParameterList& params);
/// Rescales all grads so the global norm is at most max_norm. Returns the
/// norm before clipping.
double clip_grad_norm(ParameterList& params, double max_norm);

/// Index of the largest entry (first on ties).
std::size_t argmax(const Tensor& t);

/// Predicted class for one video; `frame_order`, when non-empty, permutes
/// the sampled frames before they enter the model.
std::size_t predict(const CtaNet& model, const VideoSample& video, std::size_t frames,
                    const AblationSwitches& switches,
                    const std::vector<std::size_t>& frame_order = {});

double accuracy(const CtaNet& model, const Dataset& data, const std::vector<std::size_t>& indices,
                std::size_t frames, const AblationSwitches& switches);

struct EpochMetrics {
  std::size_t epoch = 0;
  std::size_t step = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double val_acc = 0.0;  // NaN without a validation set
};

struct TrainResult {
  std::vector<EpochMetrics> log;
  std::size_t best_epoch = 0;
  double best_val_acc = 0.0;
  std::size_t clipped_steps = 0;
  ParameterList best_parameters;  // detached copies
};

struct TrainHooks {
  std::function<void(const std::string&)> log;
  std::function<void(const EpochMetrics&)> on_epoch;
};

/// Minibatch Adam over `train_idx`. Keeps the parameters of the best
/// validation epoch (the last epoch when `val_idx` is empty) and loads them
/// back into `model` before returning. Throws NumericError on divergence.
TrainResult train(CtaNet& model, const Dataset& data, const std::vector<std::size_t>& train_idx,
                  const std::vector<std::size_t>& val_idx, const TrainConfig& config,
                  const TrainHooks& hooks = {});

/// CSV with header epoch,step,lr,train_loss,train_acc,val_acc. A non-empty
/// `comment` is written first as a '#' line.
void write_metrics_csv(const std::filesystem::path& path, const std::vector<EpochMetrics>& log,
                       const std::string& comment = {});

}  // namespace cta

#endif  // CTA_TRAINING_HPP_

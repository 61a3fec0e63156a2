#ifndef CTA_CLI_HPP_
#define CTA_CLI_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "cta/data.hpp"
#include "cta/model.hpp"
#include "cta/training.hpp"

namespace cta::cli {

/// Everything a command can be configured with. Sourced from a key = value
/// file plus --set overrides; every field has a default.
struct RunConfig {
  SynthSpec synth;
  std::size_t synth_classes = 6;
  CtaNetConfig model;
  TrainConfig train;
  double val_fraction = 0.2;
  double test_fraction = 0.2;
  std::uint64_t split_seed = 11;
  std::vector<std::uint64_t> ablate_seeds = {1, 2, 3};
  std::uint64_t shuffle_seed = 5;

  /// Synth spec with its class table filled in from synth_classes.
  SynthSpec synth_spec() const;
  /// Model config bound to a dataset's frame side and class count.
  CtaNetConfig model_for(std::size_t image_side, std::size_t num_classes) const;
};

/// Sets one `key = value` pair. Throws ConfigError on unknown keys or bad values.
void apply_setting(RunConfig& config, const std::string& key, const std::string& value);
/// Reads `path` when non-empty, then applies `overrides` of the form key=value.
RunConfig load_run_config(const std::filesystem::path& path,
                          const std::vector<std::string>& overrides = {});
/// The effective configuration as key = value lines, loadable again.
std::string format_run_config(const RunConfig& config);

// ---- evaluation -----------------------------------------------------------

using Predictor = std::function<std::size_t(const VideoSample&)>;

struct EvalResult {
  std::size_t correct = 0;
  std::size_t total = 0;
  double accuracy = 0.0;
  /// confusion[true][predicted], counts.
  std::vector<std::vector<std::size_t>> confusion;
};

EvalResult evaluate(const Dataset& data, const std::vector<std::size_t>& indices,
                    const Predictor& predictor, std::size_t num_classes);
void write_confusion_csv(const std::filesystem::path& path, const EvalResult& result);

// ---- ablation -------------------------------------------------------------

struct Variant {
  std::string name;
  bool branches = true;
  bool temporal_attention = true;
};

/// The 2 x 2 grid, full model first.
const std::vector<Variant>& ablation_variants();

/// A fixed pseudo-random permutation of 0..T-1, never the identity for T > 1.
std::vector<std::size_t> shuffled_order(std::size_t frames, std::uint64_t seed);

// ---- saliency -------------------------------------------------------------

/// ReLU(sum_c w_c A_c) with w_c the spatial mean of the gradient of channel c.
/// Both inputs are [C x H x W]; the result has H * W entries.
std::vector<double> grad_cam_map(const Tensor& activations, const Tensor& gradients);
/// Min-max scaling to [0, 1]. A constant map becomes all ones when its value
/// is positive and all zeros otherwise.
std::vector<double> normalize_map(std::vector<double> map);

struct BranchSaliency {
  std::size_t branch = 0;
  std::string name;  // before / during / after for three branches
  std::size_t frames = 0;
  std::size_t height = 0, width = 0;
  std::vector<double> map;  // normalized
};

/// One gradient-weighted activation map per branch that received frames,
/// taken at the branch head input and averaged over that branch's frames.
/// The score is the pre-softmax logit of `class_id`.
std::vector<BranchSaliency> explain_video(const CtaNet& model, const VideoSample& video,
                                          std::size_t class_id, const AblationSwitches& switches);

std::string branch_name(std::size_t branch, std::size_t num_branches);

// ---- entry point ----------------------------------------------------------

/// Exit codes: 0 success, 1 unexpected failure, 2 configuration or usage
/// error, 3 data or format error, 4 numeric abort.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, const char* const* argv);

}  // namespace cta::cli

#endif  // CTA_CLI_HPP_

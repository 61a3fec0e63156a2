#include <algorithm>

#include "cta/cli.hpp"
#include "cta/errors.hpp"
#include "cta/ops.hpp"
#include "cta/tape.hpp"

namespace cta::cli {

std::vector<double> grad_cam_map(const Tensor& activations, const Tensor& gradients) {
  if (activations.rank() != 3 || activations.shape() != gradients.shape()) {
    throw DimensionError("grad_cam_map: activations " + shape_str(activations.shape()) +
                         " and gradients " + shape_str(gradients.shape()) +
                         " must be equal [C x H x W]");
  }
  const std::size_t c = activations.dim(0);
  const std::size_t len = activations.dim(1) * activations.dim(2);
  std::vector<double> map(len, 0.0);
  for (std::size_t ch = 0; ch < c; ++ch) {
    double weight = 0.0;
    for (std::size_t i = 0; i < len; ++i) weight += gradients[ch * len + i];
    weight /= static_cast<double>(len);
    for (std::size_t i = 0; i < len; ++i) map[i] += weight * activations[ch * len + i];
  }
  for (double& v : map) v = std::max(v, 0.0);
  return map;
}

std::vector<double> normalize_map(std::vector<double> map) {
  if (map.empty()) return map;
  const auto [lo, hi] = std::minmax_element(map.begin(), map.end());
  const double min = *lo, range = *hi - *lo;
  if (range <= 0.0) {
    std::fill(map.begin(), map.end(), min > 0.0 ? 1.0 : 0.0);
    return map;
  }
  for (double& v : map) v = (v - min) / range;
  return map;
}

std::string branch_name(std::size_t branch, std::size_t num_branches) {
  static const char* const kThirds[] = {"before", "during", "after"};
  if (num_branches == 3 && branch < 3) return kThirds[branch];
  return "branch" + std::to_string(branch);
}

std::vector<BranchSaliency> explain_video(const CtaNet& model, const VideoSample& video,
                                          std::size_t class_id, const AblationSwitches& switches) {
  const std::size_t k = model.config().num_classes;
  if (class_id >= k) {
    throw ContractError("explain: class " + std::to_string(class_id) + " out of range for " +
                        std::to_string(k) + " classes");
  }
  const std::size_t frames = model.config().glimpse.frames;
  const std::size_t branches = model.config().glimpse.num_branches;

  Tape tape;
  TapeScope scope(tape);
  std::vector<GlimpseTrace> traces;
  const Tensor logits = model.logits(clip_frames(video, sample_frames(video.length, frames)),
                                     switches, &traces);
  tape.backward(slice(logits, class_id, 1));

  std::vector<BranchSaliency> out;
  for (std::size_t b = 0; b < branches; ++b) {
    BranchSaliency s;
    s.branch = b;
    s.name = branch_name(b, branches);
    std::vector<double> sum;
    for (const GlimpseTrace& t : traces) {
      if (t.branch != b) continue;
      const auto g = t.head_in.grad();
      const Tensor grad = Tensor::from(t.head_in.shape(), std::vector<double>(g.begin(), g.end()));
      const std::vector<double> m = grad_cam_map(t.head_in, grad);
      if (sum.empty()) sum.assign(m.size(), 0.0);
      for (std::size_t i = 0; i < m.size(); ++i) sum[i] += m[i];
      s.height = t.head_in.dim(1);
      s.width = t.head_in.dim(2);
      ++s.frames;
    }
    if (s.frames == 0) continue;
    for (double& v : sum) v /= static_cast<double>(s.frames);
    s.map = normalize_map(std::move(sum));
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace cta::cli

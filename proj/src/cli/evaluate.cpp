#include <algorithm>
#include <fstream>
#include <limits>
#include <numeric>

#include "cta/cli.hpp"
#include "cta/errors.hpp"
#include "cta/rng.hpp"

namespace cta::cli {

EvalResult evaluate(const Dataset& data, const std::vector<std::size_t>& indices,
                    const Predictor& predictor, std::size_t num_classes) {
  EvalResult r;
  r.confusion.assign(num_classes, std::vector<std::size_t>(num_classes, 0));
  for (std::size_t i : indices) {
    const VideoSample& v = data.videos.at(i);
    const std::size_t guess = predictor(v);
    if (v.label >= num_classes || guess >= num_classes) {
      throw ContractError("evaluate: class " + std::to_string(std::max(v.label, guess)) +
                          " outside 0.." + std::to_string(num_classes - 1));
    }
    ++r.confusion[v.label][guess];
    if (guess == v.label) ++r.correct;
    ++r.total;
  }
  r.accuracy = r.total ? static_cast<double>(r.correct) / static_cast<double>(r.total)
                       : std::numeric_limits<double>::quiet_NaN();
  return r;
}

void write_confusion_csv(const std::filesystem::path& path, const EvalResult& result) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("cannot write " + path.string());
  os << "true";
  for (std::size_t k = 0; k < result.confusion.size(); ++k) os << ",pred_" << k;
  os << '\n';
  for (std::size_t t = 0; t < result.confusion.size(); ++t) {
    os << t;
    for (std::size_t n : result.confusion[t]) os << ',' << n;
    os << '\n';
  }
  if (!os) throw FormatError("failed writing " + path.string());
}

const std::vector<Variant>& ablation_variants() {
  static const std::vector<Variant> grid = {
      {"full", true, true},
      {"no_temporal_attention", true, false},
      {"no_branches", false, true},
      {"no_branches_no_temporal_attention", false, false},
  };
  return grid;
}

std::vector<std::size_t> shuffled_order(std::size_t frames, std::uint64_t seed) {
  std::vector<std::size_t> order(frames);
  std::iota(order.begin(), order.end(), 0);
  if (frames < 2) return order;
  SplitMix64 rng(seed);
  for (;;) {
    shuffle(order, rng);
    for (std::size_t i = 0; i < frames; ++i)
      if (order[i] != i) return order;
  }
}

}  // namespace cta::cli

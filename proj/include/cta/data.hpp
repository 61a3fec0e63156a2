#ifndef CTA_DATA_HPP_
#define CTA_DATA_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cta/tensor.hpp"

namespace cta {

/// An ordered frame stack with its class label. Pixels are stored as f32
/// (the on-disk precision), frame-major, each frame [C x S x S].
struct VideoSample {
  std::size_t id = 0;
  std::size_t label = 0;
  std::size_t length = 0;
  std::size_t channels = 1;
  std::size_t side = 0;
  std::vector<float> pixels;

  std::size_t frame_size() const { return channels * side * side; }
  /// Frame i as a [C x S x S] tensor of doubles.
  Tensor frame(std::size_t i) const;

  bool operator==(const VideoSample&) const = default;
};

struct Dataset {
  std::vector<VideoSample> videos;

  std::size_t num_classes() const;
  bool operator==(const Dataset&) const = default;
};

enum class PhaseOrder {
  approach_manipulate_withdraw,
  withdraw_manipulate_approach,
};

struct ClassSpec {
  std::size_t texture = 0;
  PhaseOrder order = PhaseOrder::approach_manipulate_withdraw;
};

inline constexpr std::size_t kNumTextures = 4;

/// Parameters of the synthetic phase-structured benchmark.
struct SynthSpec {
  std::size_t videos_per_class = 40;
  std::size_t min_length = 18;
  std::size_t max_length = 36;
  std::size_t image_side = 64;
  std::size_t hand_radius = 4;
  std::size_t object_size = 16;
  double noise = 0.02;
  std::uint64_t seed = 7;
  std::vector<ClassSpec> classes;

  /// K classes enumerated as (texture k / 2, order k % 2).
  static std::vector<ClassSpec> default_classes(std::size_t num_classes);
  SynthSpec();

  std::size_t num_classes() const { return classes.size(); }
  /// Throws ConfigError on invalid geometry or class table.
  void validate() const;
};

/// Pairs of classes that differ only in phase order.
std::vector<std::pair<std::size_t, std::size_t>> phase_order_pairs(const SynthSpec& spec);

/// Random per-video layout drawn from the video's own stream.
struct VideoScene {
  std::size_t length = 0;
  long object_x = 0, object_y = 0;  // object centre
  long entry_y = 0, exit_y = 0;     // hand enters on the left edge, leaves on the right
  std::size_t distractor_texture = 0;
  std::uint64_t noise_seed = 0;
};

VideoScene draw_scene(const SynthSpec& spec, std::uint64_t seed, std::size_t video_id);

/// Lengths of the (approach, manipulate, withdraw) segments of a clip.
struct PhaseLengths {
  std::size_t approach, manipulate, withdraw;
};
PhaseLengths phase_lengths(std::size_t length);

/// Renders one clip. The canonical timeline is approach, manipulate,
/// withdraw; the reversed order plays the withdraw frames first and the
/// approach frames last, so both orders use exactly the same frames.
VideoSample render_video(const SynthSpec& spec, const VideoScene& scene, const ClassSpec& cls,
                         std::size_t id, std::size_t label);

/// Videos are laid out class-major: id = class * videos_per_class + i.
Dataset synth_generate(const SynthSpec& spec, std::uint64_t seed);

/// Writes index.csv plus one CTAV1 blob per video into `dir`.
void write_dataset(const Dataset& dataset, const std::filesystem::path& dir);
Dataset read_dataset(const std::filesystem::path& dir);
/// Reads a single CTAV1 blob; the label is left at 0.
VideoSample read_video_blob(const std::filesystem::path& path, std::size_t id = 0);

/// FNV-1a over labels, geometry and pixel bytes.
std::uint64_t dataset_hash(const Dataset& dataset);

struct DatasetSplit {
  std::vector<std::size_t> train, val, test;  // indices into Dataset::videos

  std::uint64_t hash() const;
};

/// Stratified seeded split: per class, shuffled then cut into fractions.
DatasetSplit split_dataset(const Dataset& dataset, double val_fraction, double test_fraction,
                           std::uint64_t seed);

std::string hex64(std::uint64_t value);

/// Binary PGM (P5) of a [H x W] map with values in [0, 1], upscaled by an integer factor.
void write_pgm(const std::filesystem::path& path, const std::vector<double>& values,
               std::size_t height, std::size_t width, std::size_t upscale = 1);

}  // namespace cta

#endif  // CTA_DATA_HPP_

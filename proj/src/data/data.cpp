#include "cta/data.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "cta/binary_io.hpp"
#include "cta/errors.hpp"
#include "cta/rng.hpp"

namespace cta {

namespace fs = std::filesystem;

namespace {

constexpr char kVideoMagic[5] = {'C', 'T', 'A', 'V', '1'};
constexpr double kBackground = 0.1;
constexpr double kTextureOn = 0.8;
constexpr double kTextureOff = 0.3;
constexpr double kHand = 0.95;

// Small cyclic wobble of the hand while it manipulates the object.
constexpr long kWobble[4][2] = {{0, 0}, {2, 1}, {0, 2}, {-2, 1}};

struct Point {
  long x, y;
};

long side_of(const SynthSpec& spec) { return static_cast<long>(spec.image_side); }

Point lerp(Point a, Point b, std::size_t k, std::size_t count) {
  if (count <= 1) return b;
  const long num = static_cast<long>(k);
  const long den = static_cast<long>(count - 1);
  return {a.x + (b.x - a.x) * num / den, a.y + (b.y - a.y) * num / den};
}

bool texture_on(std::size_t texture, long u, long v) {
  switch (texture) {
    case 0: return (v / 2) % 2 == 0;              // horizontal stripes
    case 1: return (u / 2) % 2 == 0;              // vertical stripes
    case 2: return ((u / 2) + (v / 2)) % 2 == 0;  // checkerboard
    default: return ((u + v) / 2) % 2 == 0;       // diagonal stripes
  }
}

// Hand position at the resting point on the object's left edge.
Point rest_point(const SynthSpec& spec, const VideoScene& scene) {
  return {scene.object_x - static_cast<long>(spec.object_size) / 2, scene.object_y};
}

struct FramePlan {
  Point hand;
  std::size_t texture;
};

// Plans the canonical (approach, manipulate, withdraw) timeline.
std::vector<FramePlan> plan_canonical(const SynthSpec& spec, const VideoScene& scene,
                                      const ClassSpec& cls) {
  const PhaseLengths ph = phase_lengths(scene.length);
  const long r = static_cast<long>(spec.hand_radius);
  const Point entry{r, scene.entry_y};
  const Point exit{side_of(spec) - 1 - r, scene.exit_y};
  const Point rest = rest_point(spec, scene);
  std::vector<FramePlan> plan;
  for (std::size_t k = 0; k < ph.approach; ++k) {
    plan.push_back({lerp(entry, rest, k, ph.approach), scene.distractor_texture});
  }
  for (std::size_t k = 0; k < ph.manipulate; ++k) {
    plan.push_back({{rest.x + kWobble[k % 4][0], rest.y + kWobble[k % 4][1]}, cls.texture});
  }
  for (std::size_t k = 0; k < ph.withdraw; ++k) {
    plan.push_back({lerp(rest, exit, k, ph.withdraw), scene.distractor_texture});
  }
  return plan;
}

void render_frame(const SynthSpec& spec, const VideoScene& scene, const FramePlan& plan,
                  std::uint64_t noise_seed, float* out) {
  const long s = side_of(spec);
  const long half = static_cast<long>(spec.object_size) / 2;
  const long x0 = scene.object_x - half, y0 = scene.object_y - half;
  const long size = static_cast<long>(spec.object_size);
  const long r = static_cast<long>(spec.hand_radius);
  SplitMix64 noise(noise_seed);
  for (long y = 0; y < s; ++y) {
    for (long x = 0; x < s; ++x) {
      double v = kBackground;
      const long u = x - x0, w = y - y0;
      if (u >= 0 && u < size && w >= 0 && w < size) {
        v = texture_on(plan.texture, u, w) ? kTextureOn : kTextureOff;
      }
      const long dx = x - plan.hand.x, dy = y - plan.hand.y;
      if (dx * dx + dy * dy <= r * r) v = kHand;
      v += spec.noise * (2.0 * noise.uniform() - 1.0);
      v = std::clamp(v, 0.0, 1.0);
      out[y * s + x] = static_cast<float>(v);
    }
  }
}

// FNV-1a 64.
struct Fnv {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 0x100000001b3ULL;
    }
  }
  void u64(std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    bytes(b, 8);
  }
};

std::string blob_name(std::size_t id) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "video_%05zu.ctav", id);
  return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

std::size_t parse_count(const std::string& text, const std::string& what) {
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(text, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != text.size()) throw FormatError("bad integer '" + text + "' in " + what);
  return static_cast<std::size_t>(v);
}

}  // namespace

VideoSample read_video_blob(const fs::path& path, std::size_t id) {
  const std::string what = "video " + std::to_string(id) + " (" + path.string() + ")";
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("missing blob for " + what);
  char magic[sizeof(kVideoMagic)];
  if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kVideoMagic, sizeof(magic)) != 0) {
    throw FormatError("bad magic in " + what);
  }
  VideoSample v;
  v.id = id;
  v.length = le::read_or_throw<std::uint32_t>(is, what);
  v.channels = le::read_or_throw<std::uint32_t>(is, what);
  v.side = le::read_or_throw<std::uint32_t>(is, what);
  v.pixels.resize(v.length * v.frame_size());
  for (float& p : v.pixels) {
    if (!le::read(is, p)) throw FormatError("truncated blob for " + what);
  }
  if (is.peek() != std::char_traits<char>::eof()) {
    throw FormatError("trailing bytes in blob for " + what);
  }
  return v;
}

Tensor VideoSample::frame(std::size_t i) const {
  if (i >= length) {
    throw ContractError("frame " + std::to_string(i) + " out of range for video " +
                        std::to_string(id) + " of length " + std::to_string(length));
  }
  const std::size_t n = frame_size();
  std::vector<double> values(pixels.begin() + static_cast<long>(i * n),
                             pixels.begin() + static_cast<long>((i + 1) * n));
  return Tensor::from({channels, side, side}, std::move(values));
}

std::size_t Dataset::num_classes() const {
  std::size_t k = 0;
  for (const VideoSample& v : videos) k = std::max(k, v.label + 1);
  return k;
}

std::vector<ClassSpec> SynthSpec::default_classes(std::size_t num_classes) {
  std::vector<ClassSpec> out;
  for (std::size_t k = 0; k < num_classes; ++k) {
    out.push_back({k / 2, k % 2 == 0 ? PhaseOrder::approach_manipulate_withdraw
                                     : PhaseOrder::withdraw_manipulate_approach});
  }
  return out;
}

SynthSpec::SynthSpec() : classes(default_classes(6)) {}

void SynthSpec::validate() const {
  if (classes.size() < 2) throw ConfigError("synthetic spec needs at least 2 classes");
  if (videos_per_class < 1) throw ConfigError("videos_per_class must be >= 1");
  if (min_length < 3 || min_length > max_length) {
    throw ConfigError("frame length range must satisfy 3 <= min_length <= max_length");
  }
  if (noise < 0.0 || noise > 0.5) throw ConfigError("noise amplitude must lie in [0, 0.5]");
  const long s = static_cast<long>(image_side);
  const long jitter = s / 16;
  if (2 * static_cast<long>(hand_radius) + 1 > s) {
    throw ConfigError("hand blob of radius " + std::to_string(hand_radius) +
                      " does not fit a " + std::to_string(image_side) + " px frame");
  }
  if (object_size < 4 || static_cast<long>(object_size) + 2 * jitter > s) {
    throw ConfigError("object of size " + std::to_string(object_size) + " does not fit a " +
                      std::to_string(image_side) + " px frame");
  }
  std::set<std::pair<std::size_t, int>> seen;
  for (const ClassSpec& c : classes) {
    if (c.texture >= kNumTextures) {
      throw ConfigError("texture id " + std::to_string(c.texture) + " out of range (" +
                        std::to_string(kNumTextures) + " textures)");
    }
    if (!seen.insert({c.texture, static_cast<int>(c.order)}).second) {
      throw ConfigError("duplicate class (texture " + std::to_string(c.texture) + ")");
    }
  }
  bool texture_pair = false;
  for (std::size_t a = 0; a < classes.size(); ++a)
    for (std::size_t b = a + 1; b < classes.size(); ++b)
      if (classes[a].order == classes[b].order && classes[a].texture != classes[b].texture)
        texture_pair = true;
  if (!texture_pair) throw ConfigError("class table has no pair differing only in texture");
  if (phase_order_pairs(*this).empty()) {
    throw ConfigError("class table has no pair differing only in phase order");
  }
}

std::vector<std::pair<std::size_t, std::size_t>> phase_order_pairs(const SynthSpec& spec) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t a = 0; a < spec.classes.size(); ++a)
    for (std::size_t b = a + 1; b < spec.classes.size(); ++b)
      if (spec.classes[a].texture == spec.classes[b].texture &&
          spec.classes[a].order != spec.classes[b].order)
        out.emplace_back(a, b);
  return out;
}

PhaseLengths phase_lengths(std::size_t length) {
  const std::size_t outer = (length + 1) / 3;
  return {outer, length - 2 * outer, outer};
}

VideoScene draw_scene(const SynthSpec& spec, std::uint64_t seed, std::size_t video_id) {
  SplitMix64 rng(mix_seed(seed, video_id));
  const long s = side_of(spec);
  const long jitter = s / 16;
  const long r = static_cast<long>(spec.hand_radius);
  VideoScene scene;
  scene.length = static_cast<std::size_t>(
      rng.range(static_cast<long>(spec.min_length), static_cast<long>(spec.max_length)));
  scene.object_x = s / 2 + rng.range(-jitter, jitter);
  scene.object_y = s / 2 + rng.range(-jitter, jitter);
  scene.entry_y = rng.range(r, s - 1 - r);
  scene.exit_y = rng.range(r, s - 1 - r);
  scene.distractor_texture = static_cast<std::size_t>(rng.below(kNumTextures));
  scene.noise_seed = rng.next();
  return scene;
}

VideoSample render_video(const SynthSpec& spec, const VideoScene& scene, const ClassSpec& cls,
                         std::size_t id, std::size_t label) {
  const std::vector<FramePlan> plan = plan_canonical(spec, scene, cls);
  const PhaseLengths ph = phase_lengths(scene.length);
  std::vector<std::size_t> order(scene.length);
  for (std::size_t k = 0; k < scene.length; ++k) order[k] = k;
  if (cls.order == PhaseOrder::withdraw_manipulate_approach) {
    order.clear();
    for (std::size_t k = ph.approach + ph.manipulate; k < scene.length; ++k) order.push_back(k);
    for (std::size_t k = ph.approach; k < ph.approach + ph.manipulate; ++k) order.push_back(k);
    for (std::size_t k = 0; k < ph.approach; ++k) order.push_back(k);
  }
  VideoSample v;
  v.id = id;
  v.label = label;
  v.length = scene.length;
  v.channels = 1;
  v.side = spec.image_side;
  v.pixels.resize(v.length * v.frame_size());
  for (std::size_t f = 0; f < scene.length; ++f) {
    const std::size_t k = order[f];
    render_frame(spec, scene, plan[k], mix_seed(scene.noise_seed, k),
                 v.pixels.data() + f * v.frame_size());
  }
  return v;
}

Dataset synth_generate(const SynthSpec& spec, std::uint64_t seed) {
  spec.validate();
  Dataset ds;
  for (std::size_t c = 0; c < spec.num_classes(); ++c) {
    for (std::size_t i = 0; i < spec.videos_per_class; ++i) {
      const std::size_t id = c * spec.videos_per_class + i;
      ds.videos.push_back(render_video(spec, draw_scene(spec, seed, id), spec.classes[c], id, c));
    }
  }
  return ds;
}

void write_dataset(const Dataset& dataset, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw FormatError("cannot create dataset directory " + dir.string() + ": " + ec.message());
  std::ofstream index(dir / "index.csv", std::ios::binary | std::ios::trunc);
  if (!index) throw FormatError("cannot write " + (dir / "index.csv").string());
  index << "video_id,label,num_frames,file\n";
  for (const VideoSample& v : dataset.videos) {
    const std::string name = blob_name(v.id);
    index << v.id << ',' << v.label << ',' << v.length << ',' << name << '\n';
    std::ofstream os(dir / name, std::ios::binary | std::ios::trunc);
    if (!os) throw FormatError("cannot write " + (dir / name).string());
    os.write(kVideoMagic, sizeof(kVideoMagic));
    le::write<std::uint32_t>(os, static_cast<std::uint32_t>(v.length));
    le::write<std::uint32_t>(os, static_cast<std::uint32_t>(v.channels));
    le::write<std::uint32_t>(os, static_cast<std::uint32_t>(v.side));
    for (float p : v.pixels) le::write<float>(os, p);
    if (!os) throw FormatError("failed writing " + (dir / name).string());
  }
  if (!index) throw FormatError("failed writing " + (dir / "index.csv").string());
}

Dataset read_dataset(const fs::path& dir) {
  const fs::path index_path = dir / "index.csv";
  std::ifstream index(index_path);
  if (!index) throw FormatError("missing manifest " + index_path.string());
  std::string line;
  if (!std::getline(index, line) || line != "video_id,label,num_frames,file") {
    throw FormatError("bad manifest header in " + index_path.string());
  }
  Dataset ds;
  std::set<std::string> files;
  while (std::getline(index, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != 4) throw FormatError("bad manifest row '" + line + "' in " + index_path.string());
    const std::size_t id = parse_count(cells[0], index_path.string());
    const std::size_t label = parse_count(cells[1], index_path.string());
    const std::size_t frames = parse_count(cells[2], index_path.string());
    VideoSample v = read_video_blob(dir / cells[3], id);
    if (v.length != frames) {
      throw FormatError("video " + std::to_string(id) + ": manifest lists " +
                        std::to_string(frames) + " frames, blob " + (dir / cells[3]).string() +
                        " has " + std::to_string(v.length));
    }
    v.label = label;
    files.insert(cells[3]);
    ds.videos.push_back(std::move(v));
  }
  std::vector<std::string> unlisted;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() != ".ctav") continue;
    const std::string name = entry.path().filename().string();
    if (!files.count(name)) unlisted.push_back(name);
  }
  if (!unlisted.empty()) {
    std::sort(unlisted.begin(), unlisted.end());
    std::string names;
    for (const std::string& n : unlisted) names += (names.empty() ? "" : ", ") + n;
    throw FormatError("manifest " + index_path.string() + " lists " + std::to_string(files.size()) +
                      " blobs but directory also holds " + names);
  }
  return ds;
}

std::uint64_t dataset_hash(const Dataset& dataset) {
  Fnv f;
  for (const VideoSample& v : dataset.videos) {
    f.u64(v.id);
    f.u64(v.label);
    f.u64(v.length);
    f.u64(v.channels);
    f.u64(v.side);
    for (float p : v.pixels) {
      std::uint32_t bits;
      std::memcpy(&bits, &p, sizeof(bits));
      f.u64(bits);
    }
  }
  return f.h;
}

std::uint64_t DatasetSplit::hash() const {
  Fnv f;
  for (const auto* part : {&train, &val, &test}) {
    f.u64(part->size());
    for (std::size_t i : *part) f.u64(i);
  }
  return f.h;
}

DatasetSplit split_dataset(const Dataset& dataset, double val_fraction, double test_fraction,
                           std::uint64_t seed) {
  if (val_fraction < 0.0 || test_fraction < 0.0 || val_fraction + test_fraction >= 1.0) {
    throw ConfigError("split fractions must be >= 0 and sum to less than 1");
  }
  std::map<std::size_t, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < dataset.videos.size(); ++i) by_class[dataset.videos[i].label].push_back(i);
  DatasetSplit split;
  for (auto& [label, idx] : by_class) {
    SplitMix64 rng(mix_seed(seed, label));
    shuffle(idx, rng);
    const auto n = static_cast<double>(idx.size());
    const auto n_val = static_cast<std::size_t>(val_fraction * n + 0.5);
    const auto n_test = static_cast<std::size_t>(test_fraction * n + 0.5);
    for (std::size_t j = 0; j < idx.size(); ++j) {
      if (j < n_val) split.val.push_back(idx[j]);
      else if (j < n_val + n_test) split.test.push_back(idx[j]);
      else split.train.push_back(idx[j]);
    }
  }
  for (auto* part : {&split.train, &split.val, &split.test}) std::sort(part->begin(), part->end());
  return split;
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

void write_pgm(const fs::path& path, const std::vector<double>& values, std::size_t height,
               std::size_t width, std::size_t upscale) {
  if (values.size() != height * width) throw DimensionError("write_pgm: size mismatch");
  if (upscale < 1) upscale = 1;
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("cannot write " + path.string());
  os << "P5\n" << width * upscale << ' ' << height * upscale << "\n255\n";
  for (std::size_t y = 0; y < height * upscale; ++y) {
    for (std::size_t x = 0; x < width * upscale; ++x) {
      const double v = std::clamp(values[(y / upscale) * width + x / upscale], 0.0, 1.0);
      os.put(static_cast<char>(static_cast<unsigned char>(v * 255.0 + 0.5)));
    }
  }
  if (!os) throw FormatError("failed writing " + path.string());
}

}  // namespace cta

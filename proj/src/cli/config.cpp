#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "cta/cli.hpp"
#include "cta/errors.hpp"

namespace cta::cli {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return {};
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

std::size_t to_count(const std::string& key, const std::string& v) {
  std::size_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError("config key '" + key + "': expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError("config key '" + key + "': expected an unsigned integer, got '" + v + "'");
  }
  return out;
}

double to_real(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError("config key '" + key + "': expected a number, got '" + v + "'");
  }
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  throw ConfigError("config key '" + key + "': expected true/false, got '" + v + "'");
}

std::vector<std::string> split(const std::string& v, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  return out;
}

// Stage spec "<channels>x<kernel>s<stride>", e.g. 16x3s2.
ConvStage to_stage(const std::string& key, const std::string& v) {
  const auto x = v.find('x'), s = v.find('s');
  if (x == std::string::npos || s == std::string::npos || s < x) {
    throw ConfigError("config key '" + key + "': stage '" + v +
                      "' is not of the form <channels>x<kernel>s<stride>");
  }
  return {to_count(key, v.substr(0, x)), to_count(key, v.substr(x + 1, s - x - 1)),
          to_count(key, v.substr(s + 1))};
}

std::string fmt_real(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string fmt_bool(bool v) { return v ? "true" : "false"; }

std::string fmt_stage(const ConvStage& s) {
  return std::to_string(s.channels) + "x" + std::to_string(s.kernel) + "s" + std::to_string(s.stride);
}

template <class T>
std::string fmt_list(const std::vector<T>& items, const std::function<std::string(const T&)>& f) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? "," : "") + f(items[i]);
  return out;
}

struct Field {
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define CTA_COUNT(member)                                                           \
  Field {                                                                           \
    [](RunConfig& c, const std::string& k, const std::string& v) { c.member = to_count(k, v); }, \
        [](const RunConfig& c) { return std::to_string(c.member); }                 \
  }
#define CTA_U64(member)                                                             \
  Field {                                                                           \
    [](RunConfig& c, const std::string& k, const std::string& v) { c.member = to_u64(k, v); }, \
        [](const RunConfig& c) { return std::to_string(c.member); }                 \
  }
#define CTA_REAL(member)                                                            \
  Field {                                                                           \
    [](RunConfig& c, const std::string& k, const std::string& v) { c.member = to_real(k, v); }, \
        [](const RunConfig& c) { return fmt_real(c.member); }                       \
  }
#define CTA_BOOL(member)                                                            \
  Field {                                                                           \
    [](RunConfig& c, const std::string& k, const std::string& v) { c.member = to_bool(k, v); }, \
        [](const RunConfig& c) { return fmt_bool(c.member); }                       \
  }

// Ordered so the echoed file groups keys by module.
const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = {
      {"synth.num_classes", CTA_COUNT(synth_classes)},
      {"synth.videos_per_class", CTA_COUNT(synth.videos_per_class)},
      {"synth.min_length", CTA_COUNT(synth.min_length)},
      {"synth.max_length", CTA_COUNT(synth.max_length)},
      {"synth.image_side", CTA_COUNT(synth.image_side)},
      {"synth.hand_radius", CTA_COUNT(synth.hand_radius)},
      {"synth.object_size", CTA_COUNT(synth.object_size)},
      {"synth.noise", CTA_REAL(synth.noise)},
      {"synth.seed", CTA_U64(synth.seed)},
      {"model.branches", CTA_COUNT(model.glimpse.num_branches)},
      {"model.trunk",
       Field{[](RunConfig& c, const std::string& k, const std::string& v) {
               std::vector<ConvStage> stages;
               for (const std::string& s : split(v, ',')) {
                 if (!s.empty()) stages.push_back(to_stage(k, s));
               }
               c.model.glimpse.trunk = stages;
             },
             [](const RunConfig& c) {
               return fmt_list<ConvStage>(c.model.glimpse.trunk, fmt_stage);
             }}},
      {"model.head",
       Field{[](RunConfig& c, const std::string& k, const std::string& v) {
               c.model.glimpse.head = to_stage(k, v);
             },
             [](const RunConfig& c) { return fmt_stage(c.model.glimpse.head); }}},
      {"model.qk_reduction", CTA_COUNT(model.glimpse.qk_reduction)},
      {"model.hidden", CTA_COUNT(model.hidden)},
      {"model.gate_mode",
       Field{[](RunConfig& c, const std::string&, const std::string& v) {
               c.model.gate_mode = parse_gate_mode(v);
             },
             [](const RunConfig& c) { return to_string(c.model.gate_mode); }}},
      {"train.lr0", CTA_REAL(train.lr0)},
      {"train.beta1", CTA_REAL(train.beta1)},
      {"train.beta2", CTA_REAL(train.beta2)},
      {"train.adam_eps", CTA_REAL(train.adam_eps)},
      {"train.lr_decay", CTA_REAL(train.lr_decay)},
      {"train.decay_every", CTA_COUNT(train.decay_every)},
      {"train.batch_size", CTA_COUNT(train.batch_size)},
      {"train.frames", CTA_COUNT(train.frames)},
      {"train.epochs", CTA_COUNT(train.epochs)},
      {"train.seed", CTA_U64(train.seed)},
      {"train.clip_norm", CTA_REAL(train.clip_norm)},
      {"train.jitter", CTA_BOOL(train.jitter)},
      {"train.use_branches", CTA_BOOL(train.switches.use_branches)},
      {"train.use_temporal_attention", CTA_BOOL(train.switches.use_temporal_attention)},
      {"train.use_self_attention", CTA_BOOL(train.switches.use_self_attention)},
      {"split.val_fraction", CTA_REAL(val_fraction)},
      {"split.test_fraction", CTA_REAL(test_fraction)},
      {"split.seed", CTA_U64(split_seed)},
      {"ablate.seeds",
       Field{[](RunConfig& c, const std::string& k, const std::string& v) {
               c.ablate_seeds.clear();
               for (const std::string& s : split(v, ',')) {
                 if (!s.empty()) c.ablate_seeds.push_back(to_u64(k, s));
               }
               if (c.ablate_seeds.empty()) throw ConfigError("config key 'ablate.seeds' is empty");
             },
             [](const RunConfig& c) {
               return fmt_list<std::uint64_t>(c.ablate_seeds,
                                              [](const std::uint64_t& s) { return std::to_string(s); });
             }}},
      {"ablate.shuffle_seed", CTA_U64(shuffle_seed)},
  };
  return table;
}

#undef CTA_COUNT
#undef CTA_U64
#undef CTA_REAL
#undef CTA_BOOL

}  // namespace

SynthSpec RunConfig::synth_spec() const {
  SynthSpec s = synth;
  s.classes = SynthSpec::default_classes(synth_classes);
  return s;
}

CtaNetConfig RunConfig::model_for(std::size_t image_side, std::size_t num_classes) const {
  CtaNetConfig m = model;
  m.glimpse.frames = train.frames;
  m.glimpse.image_side = image_side;
  m.num_classes = num_classes;
  return m;
}

void apply_setting(RunConfig& config, const std::string& key, const std::string& value) {
  for (const auto& [name, field] : fields()) {
    if (name == key) {
      field.set(config, key, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

RunConfig load_run_config(const std::filesystem::path& path,
                          const std::vector<std::string>& overrides) {
  RunConfig config;
  if (!path.empty()) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot read config file " + path.string());
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      line = trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) {
        throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected key = value");
      }
      try {
        apply_setting(config, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
      } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
      }
    }
  }
  for (const std::string& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + o + "' is not key=value");
    apply_setting(config, trim(o.substr(0, eq)), trim(o.substr(eq + 1)));
  }
  return config;
}

std::string format_run_config(const RunConfig& config) {
  std::string out;
  for (const auto& [name, field] : fields()) out += name + " = " + field.get(config) + "\n";
  return out;
}

}  // namespace cta::cli

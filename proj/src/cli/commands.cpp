#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <set>

#include <CLI11.hpp>

#include "cta/checkpoint.hpp"
#include "cta/cli.hpp"
#include "cta/errors.hpp"

namespace cta::cli {

namespace fs = std::filesystem;

namespace {

std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw FormatError("cannot create directory " + dir.string() + ": " + ec.message());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os || !(os << text)) throw FormatError("cannot write " + path.string());
}

std::string hash_comment(const Dataset& data, const DatasetSplit& split) {
  return "dataset_hash=" + hex64(dataset_hash(data)) + " split_hash=" + hex64(split.hash());
}

// Class count of a checkpoint, read off the classifier bias.
std::size_t checkpoint_classes(const ParameterList& saved, const fs::path& path) {
  for (const NamedTensor& p : saved) {
    if (p.name == "cls.bias" && p.tensor.rank() == 1) return p.tensor.dim(0);
  }
  throw FormatError("checkpoint " + path.string() + " has no 'cls.bias' parameter");
}

// The run configuration saved next to a checkpoint, unless one is named.
RunConfig config_for_checkpoint(const fs::path& checkpoint, const std::string& config_path,
                                const std::vector<std::string>& overrides) {
  fs::path path = config_path;
  if (path.empty()) {
    const fs::path sibling = checkpoint.parent_path() / "config.txt";
    if (fs::exists(sibling)) path = sibling;
  }
  return load_run_config(path, overrides);
}

std::size_t data_side(const Dataset& data) {
  if (data.videos.empty()) throw FormatError("dataset holds no videos");
  return data.videos.front().side;
}

struct RunOutcome {
  TrainResult result;
  double val_acc = 0.0;
  double test_acc = 0.0;
};

// Trains one model into `dir` (config.txt, metrics.csv, train.log, model.ckpt).
RunOutcome train_into(const RunConfig& config, const Dataset& data, const DatasetSplit& split,
                      const fs::path& dir, std::ostream& out, CtaNet& model) {
  ensure_dir(dir);
  write_text(dir / "config.txt", format_run_config(config));
  std::ofstream log(dir / "train.log", std::ios::binary | std::ios::trunc);
  if (!log) throw FormatError("cannot write " + (dir / "train.log").string());
  TrainHooks hooks;
  hooks.log = [&](const std::string& line) { log << line << '\n'; };
  hooks.on_epoch = [&](const EpochMetrics& m) {
    const std::string line = "epoch " + std::to_string(m.epoch) + " step " + std::to_string(m.step) +
                             " lr " + fixed(m.lr, 6) + " loss " + fixed(m.train_loss) +
                             " train_acc " + fixed(m.train_acc) + " val_acc " + fixed(m.val_acc);
    log << line << '\n';
    out << "  " << line << '\n' << std::flush;
  };
  RunOutcome o;
  o.result = train(model, data, split.train, split.val, config.train, hooks);
  write_metrics_csv(dir / "metrics.csv", o.result.log, hash_comment(data, split));
  save_checkpoint(dir / "model.ckpt", model.parameters());
  o.val_acc = o.result.best_val_acc;
  o.test_acc = accuracy(model, data, split.test, config.train.frames, config.train.switches);
  log << "best_epoch " << o.result.best_epoch << " val_acc " << fixed(o.val_acc) << " test_acc "
      << fixed(o.test_acc) << '\n';
  return o;
}

// ---- generate -------------------------------------------------------------

int cmd_generate(const std::string& spec_path, const std::vector<std::string>& overrides,
                 const std::uint64_t* seed, const std::string& out_dir,
                 const std::vector<std::size_t>& pgm_videos, std::ostream& out) {
  RunConfig config = load_run_config(spec_path, overrides);
  if (seed) config.synth.seed = *seed;
  const SynthSpec spec = config.synth_spec();
  const Dataset data = synth_generate(spec, spec.seed);
  write_dataset(data, out_dir);
  for (std::size_t id : pgm_videos) {
    if (id >= data.videos.size()) {
      throw ConfigError("--pgm video " + std::to_string(id) + " out of range (" +
                        std::to_string(data.videos.size()) + " videos)");
    }
    const VideoSample& v = data.videos[id];
    const fs::path dir = fs::path(out_dir) / "pgm" / ("video_" + std::to_string(id));
    ensure_dir(dir);
    for (std::size_t f = 0; f < v.length; ++f) {
      const auto begin = v.pixels.begin() + static_cast<long>(f * v.frame_size());
      const std::vector<double> frame(begin, begin + static_cast<long>(v.side * v.side));
      char name[32];
      std::snprintf(name, sizeof(name), "frame_%03zu.pgm", f);
      write_pgm(dir / name, frame, v.side, v.side, 2);
    }
  }
  std::size_t min_len = data.videos.front().length, max_len = min_len;
  for (const VideoSample& v : data.videos) {
    min_len = std::min(min_len, v.length);
    max_len = std::max(max_len, v.length);
  }
  out << "generated " << data.videos.size() << " videos (" << spec.num_classes() << " classes x "
      << spec.videos_per_class << ", " << min_len << "-" << max_len << " frames, " << spec.image_side
      << "x" << spec.image_side << ") seed " << spec.seed << " into " << out_dir << '\n'
      << "dataset_hash " << hex64(dataset_hash(data)) << '\n';
  return 0;
}

// ---- train ----------------------------------------------------------------

int cmd_train(const std::string& data_dir, const std::string& config_path,
              const std::vector<std::string>& overrides, const std::string& out_dir,
              std::ostream& out) {
  const RunConfig config = load_run_config(config_path, overrides);
  const Dataset data = read_dataset(data_dir);
  const DatasetSplit split =
      split_dataset(data, config.val_fraction, config.test_fraction, config.split_seed);
  CtaNet model(config.model_for(data_side(data), data.num_classes()), config.train.seed);
  out << "training on " << split.train.size() << " videos (val " << split.val.size() << ", test "
      << split.test.size() << "), " << parameter_count(model.parameters()) << " parameters\n"
      << "  " << hash_comment(data, split) << '\n';
  const RunOutcome o = train_into(config, data, split, out_dir, out, model);
  const EpochMetrics& last = o.result.log.back();
  out << "final train_loss " << fixed(last.train_loss, 6) << " train_acc " << fixed(last.train_acc)
      << '\n'
      << "best epoch " << o.result.best_epoch << " val_acc " << fixed(o.val_acc) << " test_acc "
      << fixed(o.test_acc) << '\n'
      << "clipped steps " << o.result.clipped_steps << '\n'
      << "wrote " << (fs::path(out_dir) / "model.ckpt").string() << '\n';
  return 0;
}

// ---- eval -----------------------------------------------------------------

int cmd_eval(const std::string& data_dir, const std::string& checkpoint,
             const std::string& config_path, const std::vector<std::string>& overrides,
             const std::string& which, const std::string& out_path, std::ostream& out) {
  const RunConfig config = config_for_checkpoint(checkpoint, config_path, overrides);
  const Dataset data = read_dataset(data_dir);
  const ParameterList saved = load_checkpoint(checkpoint);
  const std::size_t k = checkpoint_classes(saved, checkpoint);
  CtaNet model(config.model_for(data_side(data), k), config.train.seed);
  ParameterList params = model.parameters();
  assign_parameters(params, saved);

  std::vector<std::size_t> indices;
  if (which == "all") {
    for (std::size_t i = 0; i < data.videos.size(); ++i) indices.push_back(i);
  } else {
    const DatasetSplit split =
        split_dataset(data, config.val_fraction, config.test_fraction, config.split_seed);
    indices = which == "train" ? split.train : which == "val" ? split.val : split.test;
  }
  const Predictor predictor = [&](const VideoSample& v) {
    return predict(model, v, config.train.frames, config.train.switches);
  };
  const EvalResult r = evaluate(data, indices, predictor, k);
  const fs::path csv = out_path.empty() ? fs::path(checkpoint).parent_path() / "confusion.csv"
                                        : fs::path(out_path);
  write_confusion_csv(csv, r);
  out << "top-1 accuracy " << fixed(r.accuracy) << " (" << r.correct << "/" << r.total << ") on "
      << which << '\n'
      << "wrote " << csv.string() << '\n';
  return 0;
}

// ---- ablate ---------------------------------------------------------------

struct OrderProbe {
  double ordered = 0.0, shuffled = 0.0;
  std::size_t videos = 0;
};

// Accuracy on test videos of phase-order classes, with and without a fixed
// per-video frame permutation.
OrderProbe probe_order(const CtaNet& model, const Dataset& data, const std::vector<std::size_t>& test,
                       const RunConfig& config) {
  SynthSpec spec;
  spec.classes = SynthSpec::default_classes(data.num_classes());
  std::set<std::size_t> paired;
  for (const auto& [a, b] : phase_order_pairs(spec)) paired.insert({a, b});
  OrderProbe p;
  std::size_t ok = 0, ok_shuffled = 0;
  for (std::size_t i : test) {
    const VideoSample& v = data.videos[i];
    if (!paired.count(v.label)) continue;
    ++p.videos;
    const auto order = shuffled_order(config.train.frames, mix_seed(config.shuffle_seed, v.id));
    if (predict(model, v, config.train.frames, config.train.switches) == v.label) ++ok;
    if (predict(model, v, config.train.frames, config.train.switches, order) == v.label) ++ok_shuffled;
  }
  if (p.videos) {
    p.ordered = static_cast<double>(ok) / static_cast<double>(p.videos);
    p.shuffled = static_cast<double>(ok_shuffled) / static_cast<double>(p.videos);
  }
  return p;
}

int cmd_ablate(const std::string& data_dir, const std::string& config_path,
               const std::vector<std::string>& overrides, const std::string& out_dir,
               std::ostream& out) {
  const RunConfig base = load_run_config(config_path, overrides);
  const Dataset data = read_dataset(data_dir);
  const DatasetSplit split =
      split_dataset(data, base.val_fraction, base.test_fraction, base.split_seed);
  const fs::path root(out_dir);
  ensure_dir(root);
  write_text(root / "config.txt", format_run_config(base));
  out << "ablation over " << base.ablate_seeds.size() << " seed(s); " << hash_comment(data, split)
      << '\n';

  std::ofstream runs(root / "ablation_runs.csv", std::ios::binary | std::ios::trunc);
  std::ofstream order(root / "order_sensitivity.csv", std::ios::binary | std::ios::trunc);
  if (!runs || !order) throw FormatError("cannot write ablation outputs in " + root.string());
  runs << "variant,seed,branches,temporal_attention,best_epoch,val_acc,test_acc,dataset_hash,split_hash\n";
  order << "variant,seed,videos,ordered_acc,shuffled_acc,drop\n";

  struct Mean {
    double val = 0.0, test = 0.0;
  };
  std::vector<Mean> means(ablation_variants().size());
  for (std::size_t vi = 0; vi < ablation_variants().size(); ++vi) {
    const Variant& variant = ablation_variants()[vi];
    for (std::uint64_t seed : base.ablate_seeds) {
      RunConfig config = base;
      config.train.seed = seed;
      config.train.switches.use_branches = variant.branches;
      config.train.switches.use_temporal_attention = variant.temporal_attention;
      out << variant.name << " seed " << seed << '\n';
      CtaNet model(config.model_for(data_side(data), data.num_classes()), seed);
      const fs::path dir = root / "runs" / (variant.name + "_seed" + std::to_string(seed));
      const RunOutcome o = train_into(config, data, split, dir, out, model);
      const OrderProbe probe = probe_order(model, data, split.test, config);
      runs << variant.name << ',' << seed << ',' << variant.branches << ','
           << variant.temporal_attention << ',' << o.result.best_epoch << ',' << fixed(o.val_acc, 6)
           << ',' << fixed(o.test_acc, 6) << ',' << hex64(dataset_hash(data)) << ','
           << hex64(split.hash()) << '\n';
      order << variant.name << ',' << seed << ',' << probe.videos << ',' << fixed(probe.ordered, 6)
            << ',' << fixed(probe.shuffled, 6) << ',' << fixed(probe.ordered - probe.shuffled, 6)
            << '\n';
      runs.flush();
      order.flush();
      means[vi].val += o.val_acc;
      means[vi].test += o.test_acc;
      out << "  -> val " << fixed(o.val_acc) << " test " << fixed(o.test_acc) << " ordered "
          << fixed(probe.ordered) << " shuffled " << fixed(probe.shuffled) << '\n';
    }
  }

  std::ofstream table(root / "ablation.csv", std::ios::binary | std::ios::trunc);
  if (!table) throw FormatError("cannot write " + (root / "ablation.csv").string());
  table << "variant,branches,temporal_attention,val_acc,test_acc\n";
  out << "\nvariant                             val     test\n";
  const double n = static_cast<double>(base.ablate_seeds.size());
  for (std::size_t vi = 0; vi < ablation_variants().size(); ++vi) {
    const Variant& v = ablation_variants()[vi];
    table << v.name << ',' << v.branches << ',' << v.temporal_attention << ','
          << fixed(means[vi].val / n, 6) << ',' << fixed(means[vi].test / n, 6) << '\n';
    char line[128];
    std::snprintf(line, sizeof(line), "%-34s %6.4f  %6.4f\n", v.name.c_str(), means[vi].val / n,
                  means[vi].test / n);
    out << line;
  }
  return 0;
}

// ---- explain --------------------------------------------------------------

int cmd_explain(const std::string& checkpoint, const std::string& video_path, std::size_t class_id,
                const std::string& config_path, const std::vector<std::string>& overrides,
                const std::string& out_dir, std::ostream& out) {
  const RunConfig config = config_for_checkpoint(checkpoint, config_path, overrides);
  const VideoSample video = read_video_blob(video_path);
  const ParameterList saved = load_checkpoint(checkpoint);
  CtaNet model(config.model_for(video.side, checkpoint_classes(saved, checkpoint)),
               config.train.seed);
  ParameterList params = model.parameters();
  assign_parameters(params, saved);

  const auto maps = explain_video(model, video, class_id, config.train.switches);
  if (maps.empty()) throw ContractError("explain: no branch received frames");
  ensure_dir(out_dir);
  const std::size_t upscale = std::max<std::size_t>(1, video.side / std::max<std::size_t>(1, maps.front().width));
  for (const BranchSaliency& s : maps) {
    const fs::path path = fs::path(out_dir) / (s.name + ".pgm");
    write_pgm(path, s.map, s.height, s.width, upscale);
    const auto peak = std::max_element(s.map.begin(), s.map.end()) - s.map.begin();
    out << s.name << ": " << s.frames << " frame(s), " << s.height << "x" << s.width
        << " map, peak at (" << peak / static_cast<long>(s.width) << ", "
        << peak % static_cast<long>(s.width) << ") -> " << path.string() << '\n';
  }
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Coarse temporal attention network: synthetic benchmark, training and analysis"};
  app.require_subcommand(1);
  std::vector<std::string> overrides;

  std::string spec_path, out_dir;
  std::uint64_t seed = 0;
  std::vector<std::size_t> pgm_videos;
  auto* gen = app.add_subcommand("generate", "render the synthetic benchmark to disk");
  gen->add_option("--spec", spec_path, "config file with synth.* keys");
  auto* seed_opt = gen->add_option("--seed", seed, "generator seed (overrides synth.seed)");
  gen->add_option("--out", out_dir, "output dataset directory")->required();
  gen->add_option("--pgm", pgm_videos, "also export the frames of these video ids as PGM")
      ->delimiter(',');
  gen->add_option("--set", overrides, "key=value override (repeatable)");

  std::string data_dir, config_path;
  auto* tr = app.add_subcommand("train", "train one model");
  tr->add_option("--data", data_dir, "dataset directory")->required();
  tr->add_option("--config", config_path, "key = value config file");
  tr->add_option("--out", out_dir, "run directory")->required();
  tr->add_option("--set", overrides, "key=value override (repeatable)");

  std::string checkpoint, which = "test", out_path;
  auto* ev = app.add_subcommand("eval", "top-1 accuracy and confusion matrix of a checkpoint");
  ev->add_option("--data", data_dir, "dataset directory")->required();
  ev->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
  ev->add_option("--config", config_path, "config file (default: config.txt beside the checkpoint)");
  ev->add_option("--split", which, "train, val, test or all")
      ->check(CLI::IsMember({"train", "val", "test", "all"}));
  ev->add_option("--out", out_path, "confusion CSV path (default: beside the checkpoint)");
  ev->add_option("--set", overrides, "key=value override (repeatable)");

  auto* ab = app.add_subcommand("ablate", "train the branches x temporal-attention grid");
  ab->add_option("--data", data_dir, "dataset directory")->required();
  ab->add_option("--config", config_path, "key = value config file");
  ab->add_option("--out", out_dir, "output directory")->required();
  ab->add_option("--set", overrides, "key=value override (repeatable)");

  std::string video_path;
  std::size_t class_id = 0;
  auto* ex = app.add_subcommand("explain", "per-branch gradient-weighted activation maps");
  ex->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
  ex->add_option("--video", video_path, "CTAV1 video blob")->required();
  ex->add_option("--class", class_id, "class whose score is explained")->required();
  ex->add_option("--config", config_path, "config file (default: config.txt beside the checkpoint)");
  ex->add_option("--out", out_dir, "output directory for the PGM maps")->required();
  ex->add_option("--set", overrides, "key=value override (repeatable)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) {
      return cmd_generate(spec_path, overrides, seed_opt->count() ? &seed : nullptr, out_dir,
                          pgm_videos, out);
    }
    if (tr->parsed()) return cmd_train(data_dir, config_path, overrides, out_dir, out);
    if (ev->parsed()) {
      return cmd_eval(data_dir, checkpoint, config_path, overrides, which, out_path, out);
    }
    if (ab->parsed()) return cmd_ablate(data_dir, config_path, overrides, out_dir, out);
    if (ex->parsed()) {
      return cmd_explain(checkpoint, video_path, class_id, config_path, overrides, out_dir, out);
    }
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const ContractError& e) {
    err << "invalid argument: " << e.what() << '\n';
    return 2;
  } catch (const FormatError& e) {
    err << "data error: " << e.what() << '\n';
    return 3;
  } catch (const DimensionError& e) {
    err << "data error: " << e.what() << '\n';
    return 3;
  } catch (const NumericError& e) {
    err << "numeric abort: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

int run(int argc, const char* const* argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace cta::cli

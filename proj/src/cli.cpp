#include "rtgan/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "rtgan/evaluation.hpp"
#include "rtgan/framemodel.hpp"
#include "rtgan/inference.hpp"
#include "rtgan/synthdata.hpp"
#include "rtgan/trainer.hpp"

namespace rtgan {
namespace {

struct UsageError : Error {
  using Error::Error;
};

void prepare_output_dir(const fs::path& dir, bool overwrite) {
  if (fs::exists(dir) && !fs::is_empty(dir)) {
    if (!overwrite) throw ConfigError("output directory " + dir.string() + " is not empty; pass --overwrite");
    fs::remove_all(dir);
  }
  fs::create_directories(dir);
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// ---- synth

struct SynthArgs {
  fs::path out;
  int scenes = 8;
  int frames = 60;
  int size = 64;
  std::uint64_t seed = 0;
  std::vector<int> textures{1};
  bool overwrite = false;
};

void run_synth(const SynthArgs& a, std::ostream& out) {
  if (a.scenes < 1) throw ConfigError("--scenes must be >= 1");
  std::vector<SceneSpec> specs;
  for (int i = 0; i < a.scenes; ++i) {
    for (int tex : a.textures) {
      SceneSpec s;
      s.seed = a.seed + static_cast<std::uint64_t>(i);
      s.n_frames = a.frames;
      s.size = a.size;
      s.texture_id = tex;
      specs.push_back(s);
    }
  }
  const DatasetManifest m = render_dataset(specs, a.out, a.overwrite);
  out << "wrote " << specs.size() << " sequences, " << m.triplet_count() << " triplets to " << a.out.string() << "\n";
}

// ---- precompute

struct PrecomputeArgs {
  std::string frame_model;
  fs::path data, out;
  std::string stream;
};

void run_precompute(const PrecomputeArgs& a, std::ostream& out) {
  const auto f = make_frame_model(a.frame_model);
  const DatasetManifest m = load_manifest(a.data / "manifest.json");
  const PrecomputeCache cache = precompute_outputs(*f, m, a.data, a.stream, a.out);
  out << "precomputed " << cache.computed << " frames, reused " << cache.reused << " (" << cache.model_name << ") in "
      << a.out.string() << "\n";
}

// ---- train

struct TrainArgs {
  fs::path config, data, y_data, out;
  std::optional<double> lambda;
  std::optional<int> epochs;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> frame_model;
  bool resume = false, overwrite = false, print_schema = false;
};

void run_train(const TrainArgs& a, std::ostream& out) {
  if (a.print_schema) {
    out << train_config_schema();
    return;
  }
  if (a.data.empty() || a.out.empty()) throw UsageError("train needs --data and --out");
  TrainConfig cfg = a.config.empty() ? TrainConfig{} : load_train_config(a.config);
  if (a.lambda) cfg.lambda_t = *a.lambda;
  if (a.epochs) cfg.epochs = *a.epochs;
  if (a.seed) cfg.seed = *a.seed;
  if (a.frame_model) cfg.frame_model_ref = *a.frame_model;
  const fs::path y_root = a.y_data.empty() ? a.data : a.y_data;
  const fs::path last = train(cfg, a.data, y_root, a.out, {a.resume, a.overwrite});
  out << "final checkpoint " << last.string() << "\n";
}

// ---- infer

struct InferArgs {
  fs::path checkpoint, input, out;
  std::string frame_model;
  int reanchor_every = 0;
  bool overwrite = false;
};

void run_infer(const InferArgs& a, std::ostream& out) {
  const GeneratorFn g = generator_fn(load_generator(a.checkpoint));
  const auto f = make_frame_model(a.frame_model);
  RolloutOptions opt;
  opt.reanchor_every = a.reanchor_every;
  if (!fs::is_directory(a.input)) throw NotFoundError("input directory not found: " + a.input.string());
  prepare_output_dir(a.out, a.overwrite);
  std::size_t frames = 0, sequences = 0;
  if (fs::exists(a.input / "manifest.json")) {
    const DatasetManifest m = load_manifest(a.input / "manifest.json");
    for (const auto& e : m.entries) {
      if (e.domain != Domain::X) continue;
      frames += rollout_directory(g, *f, a.input / e.path, a.out / e.sequence_id, e.sequence_id, opt).frames;
      ++sequences;
    }
  } else {
    frames = rollout_directory(g, *f, a.input, a.out, a.input.filename().string(), opt).frames;
    sequences = 1;
  }
  out << "rolled out " << sequences << " sequences, " << frames << " frames to " << a.out.string() << "\n";
}

// ---- eval

struct EvalArgs {
  fs::path pred, gt, pred2, ref, out;
  std::string metrics = "dice,iou,flicker";
  std::string flow_source = "gt";
  int block = 8, radius = 4;
};

// Sequence directories under a prediction root, sorted by name.
std::vector<std::string> prediction_ids(const fs::path& root) {
  if (!fs::is_directory(root)) throw NotFoundError("prediction directory not found: " + root.string());
  std::vector<std::string> ids;
  for (const auto& d : fs::directory_iterator(root)) {
    if (d.is_directory() && fs::exists(d.path() / frame_file_name(0))) ids.push_back(d.path().filename().string());
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

std::vector<BinaryMask> masks_of(const VideoSequence& seq, const std::string& source) {
  std::vector<BinaryMask> out;
  for (const auto& f : seq.frames) out.push_back(mask_from_frame(*f, 0.0f, source));
  return out;
}

void run_eval(const EvalArgs& a, std::ostream& out) {
  static const std::set<std::string> known{"dice", "iou", "consistency", "flicker", "flow", "l1"};
  const std::vector<std::string> metrics = split_list(a.metrics);
  if (metrics.empty()) throw UsageError("--metrics is empty");
  for (const auto& m : metrics) {
    if (!known.count(m)) throw UsageError("unknown metric '" + m + "' (known: dice, iou, consistency, flicker, flow, l1)");
  }
  const auto wants = [&](const char* m) { return std::find(metrics.begin(), metrics.end(), m) != metrics.end(); };
  if (a.flow_source != "gt" && a.flow_source != "estimated") throw UsageError("--flow-source must be gt or estimated");
  const bool gt_flow = a.flow_source == "gt";
  if (wants("consistency") && a.pred2.empty()) throw UsageError("the consistency metric needs --pred2");
  if (wants("l1") && a.ref.empty()) throw UsageError("the l1 metric needs --ref");
  const BlockMatchOptions bm{a.block, a.radius};

  const DatasetManifest manifest = load_manifest(a.gt / "manifest.json");
  std::map<std::string, const ManifestEntry*> x_entry;
  for (const auto& e : manifest.entries) {
    if (e.domain == Domain::X) x_entry.emplace(e.sequence_id, &e);
  }
  const std::vector<std::string> ids = prediction_ids(a.pred);
  if (ids.empty()) throw ContractError("no prediction sequences under " + a.pred.string());
  std::vector<std::string> ids2;
  if (wants("consistency")) {
    ids2 = prediction_ids(a.pred2);
    if (ids2.size() != ids.size()) {
      throw ContractError("--pred holds " + std::to_string(ids.size()) + " sequences but --pred2 holds " +
                          std::to_string(ids2.size()));
    }
  }

  MetricsReport report;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const std::string& id = ids[i];
    auto it = x_entry.find(id);
    if (it == x_entry.end()) throw NotFoundError("sequence '" + id + "' is not in " + (a.gt / "manifest.json").string());
    const ManifestEntry& e = *it->second;
    const VideoSequence pred = load_sequence(a.pred / id, Domain::Y, id);
    const fs::path scene = stream_dir(a.gt, e, "masks").parent_path();
    std::map<std::string, double>& row = report.per_sequence[id];

    if (wants("dice") || wants("iou")) {
      const std::vector<BinaryMask> p = masks_of(pred, "pred"), g = masks_of(load_sequence(scene / "masks", Domain::Y), "gt");
      if (wants("dice")) row["dice"] = cross_texture_consistency(p, g, OverlapMetric::dice);
      if (wants("iou")) row["iou"] = cross_texture_consistency(p, g, OverlapMetric::iou);
    }
    if (wants("consistency")) {
      const VideoSequence pred2 = load_sequence(a.pred2 / ids2[i], Domain::Y, ids2[i]);
      row["consistency"] = cross_texture_consistency(masks_of(pred, "pred"), masks_of(pred2, "pred2"), OverlapMetric::dice);
    }
    if (wants("flicker") || wants("flow")) {
      const VideoSequence x = load_sequence(a.gt / e.path, Domain::X, id);
      std::vector<FlowField> flows;
      if (gt_flow) {
        flows = load_flow_sequence(scene / "flow", static_cast<int>(x.size()) - 1);
      } else {
        for (std::size_t t = 0; t + 1 < x.size(); ++t) flows.push_back(estimate_flow(x[t], x[t + 1], bm));
      }
      if (wants("flicker")) row["flicker"] = flicker(pred, &flows);
      if (wants("flow")) {
        row["flow"] = flow_difference(x, pred, gt_flow ? FlowSource::ground_truth : FlowSource::estimated, &flows, bm);
      }
    }
    if (wants("l1")) row["l1"] = l1_distance(pred, load_sequence(a.ref / id, Domain::Y, id));
    report.dataset_ids.push_back(id);
  }
  report.config = "metrics=" + a.metrics + " flow_source=" + a.flow_source + " block=" + std::to_string(a.block) +
                  " radius=" + std::to_string(a.radius);
  report.dataset_hash = dataset_hash(a.gt);
  report.finalize();
  write_report(report, a.out);
  for (const auto& [name, v] : report.aggregate) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    out << name << " " << buf << "\n";
  }
}

// ---- params

void run_params(const fs::path& config, std::ostream& out) {
  const TrainConfig cfg = config.empty() ? TrainConfig{} : load_train_config(config);
  const ModelBundle<float> bundle(cfg.model, cfg.seed);
  for (const auto& row : parameter_table(bundle)) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "%-24s %12lld  %7.2fM\n", row.name.c_str(), static_cast<long long>(row.count),
                  static_cast<double>(row.count) / 1e6);
    out << buf;
  }
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Recurrent temporal GAN: adds temporal consistency to a frozen frame-based translator."};
  app.name("rtgan");
  app.require_subcommand(1);

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth", "Render a synthetic tunnel video dataset");
  c_synth->add_option("--out", synth.out, "Output dataset directory")->required();
  c_synth->add_option("--scenes", synth.scenes, "Number of scenes")->capture_default_str();
  c_synth->add_option("--frames", synth.frames, "Frames per scene")->capture_default_str();
  c_synth->add_option("--size", synth.size, "Frame size in pixels")->capture_default_str();
  c_synth->add_option("--seed", synth.seed, "Seed of the first scene; scene i uses seed + i")->capture_default_str();
  c_synth->add_option("--textures", synth.textures, "Texture ids rendered per scene")->delimiter(',');
  c_synth->add_flag("--overwrite", synth.overwrite, "Replace a non-empty output directory");

  PrecomputeArgs pre;
  auto* c_pre = app.add_subcommand("precompute", "Run the frame model once over a dataset and cache its outputs");
  c_pre->add_option("--frame-model", pre.frame_model, "oracle:<name>[:k=v,...] or cache:DIR")->required();
  c_pre->add_option("--data", pre.data, "Dataset directory with manifest.json")->required();
  c_pre->add_option("--out", pre.out, "Cache directory")->required();
  c_pre->add_option("--stream", pre.stream, "Sibling stream to read instead of each entry's own frames");

  TrainArgs tr;
  auto* c_train = app.add_subcommand("train", "Train the recurrent generator and both discriminators");
  c_train->add_option("--config", tr.config, "JSON training config (see --print-schema)");
  c_train->add_option("--data", tr.data, "Dataset with the X-domain training sequences");
  c_train->add_option("--y-data", tr.y_data, "Dataset with the Y-domain sequences (default: --data)");
  c_train->add_option("--out", tr.out, "Run directory");
  c_train->add_option("--lambda", tr.lambda, "Override lambda_t");
  c_train->add_option("--epochs", tr.epochs, "Override epochs");
  c_train->add_option("--seed", tr.seed, "Override seed");
  c_train->add_option("--frame-model", tr.frame_model, "Override frame_model_ref");
  c_train->add_flag("--resume", tr.resume, "Continue from the newest checkpoint in --out");
  c_train->add_flag("--overwrite", tr.overwrite, "Replace a non-empty run directory");
  c_train->add_flag("--print-schema", tr.print_schema, "Print the config schema and exit");
  c_train->get_option("--resume")->excludes("--overwrite");

  InferArgs inf;
  auto* c_infer = app.add_subcommand("infer", "Roll out a trained generator over video sequences");
  c_infer->add_option("--checkpoint", inf.checkpoint, "Trainer checkpoint")->required();
  c_infer->add_option("--frame-model", inf.frame_model, "Frame model for the first frame")->required();
  c_infer->add_option("--input", inf.input, "Frame directory, or a dataset with manifest.json")->required();
  c_infer->add_option("--out", inf.out, "Output directory")->required();
  c_infer->add_option("--reanchor-every", inf.reanchor_every, "Restart from the frame model every K frames (0: never)")
      ->capture_default_str();
  c_infer->add_flag("--overwrite", inf.overwrite, "Replace a non-empty output directory");

  EvalArgs ev;
  auto* c_eval = app.add_subcommand("eval", "Score predicted sequences and write a metrics report");
  c_eval->add_option("--pred", ev.pred, "Predictions, one subdirectory per sequence")->required();
  c_eval->add_option("--gt", ev.gt, "Dataset with masks and flow")->required();
  c_eval->add_option("--pred2", ev.pred2, "Predictions on a second texture, paired in sorted order");
  c_eval->add_option("--ref", ev.ref, "Reference outputs for the l1 metric, same layout as --pred");
  c_eval->add_option("--metrics", ev.metrics, "Comma list of dice,iou,consistency,flicker,flow,l1")->capture_default_str();
  c_eval->add_option("--flow-source", ev.flow_source, "gt or estimated")->capture_default_str();
  c_eval->add_option("--block", ev.block, "Block-matching block size")->capture_default_str();
  c_eval->add_option("--radius", ev.radius, "Block-matching search radius")->capture_default_str();
  c_eval->add_option("--out", ev.out, "Report file")->required();

  fs::path params_config;
  auto* c_params = app.add_subcommand("params", "Print learnable parameter counts per network");
  c_params->add_option("--config", params_config, "JSON training config (default: full-size models)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "rtgan: " << e.what() << "\n";
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return 2;
  }

  try {
    if (c_synth->parsed()) run_synth(synth, out);
    if (c_pre->parsed()) run_precompute(pre, out);
    if (c_train->parsed()) run_train(tr, out);
    if (c_infer->parsed()) run_infer(inf, out);
    if (c_eval->parsed()) run_eval(ev, out);
    if (c_params->parsed()) run_params(params_config, out);
  } catch (const UsageError& e) {
    err << "rtgan: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "rtgan: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace rtgan

#include "rtgan/inference.hpp"

#include <memory>

#include "rtgan/frame_tensor.hpp"

namespace rtgan {

GeneratorFn generator_fn(const Generator<float>& g) {
  // A private copy with recording switched off, so a rollout never builds a backward graph.
  auto frozen = std::make_shared<Generator<float>>(g.config());
  for (std::size_t i = 0; i < frozen->parameters().size(); ++i) {
    frozen->parameters()[i].var.mutable_value() = g.parameters()[i].var.value();
  }
  set_requires_grad(frozen->parameters(), false);
  return [frozen](const Frame& x_prev, const Frame& x_cur, const Frame& y_prev) {
    const Var<float> y = (*frozen)(Var<float>(frame_to_tensor(x_prev)), Var<float>(frame_to_tensor(x_cur)),
                                   Var<float>(frame_to_tensor(y_prev)));
    return tensor_to_frame(y.value(), 0, x_cur.t_index);
  };
}

RolloutStats rollout_stream(const GeneratorFn& g, const FrameModel& f, const std::function<std::optional<Frame>()>& source,
                            const std::function<void(const Frame&)>& sink, const std::string& sequence_id,
                            const RolloutOptions& options) {
  if (!g) throw PreconditionError("rollout needs a generator");
  RolloutStats stats;
  std::optional<Frame> x_prev, y_prev;
  const auto note_resident = [&](std::size_t extra) {
    const std::size_t n = (x_prev ? 1 : 0) + (y_prev ? 1 : 0) + extra;
    stats.peak_resident_frames = std::max(stats.peak_resident_frames, n);
  };
  while (std::optional<Frame> x_cur = source()) {
    note_resident(1);
    Frame y_cur;
    const bool anchor = !y_prev || (options.reanchor_every > 0 && stats.frames % options.reanchor_every == 0);
    if (anchor) {
      y_cur = apply_frame_model(f, *x_cur, sequence_id);
      ++stats.f_calls;
    } else {
      y_cur = g(*x_prev, *x_cur, *y_prev);
      ++stats.g_calls;
    }
    note_resident(2);
    sink(y_cur);
    x_prev = std::move(x_cur);
    y_prev = std::move(y_cur);
    ++stats.frames;
  }
  return stats;
}

VideoSequence rollout(const GeneratorFn& g, const FrameModel& f, const VideoSequence& x, const RolloutOptions& options,
                      RolloutStats* stats) {
  VideoSequence out;
  out.sequence_id = x.sequence_id;
  out.domain_tag = Domain::Y;
  out.fps_hint = x.fps_hint;
  std::size_t next = 0;
  const RolloutStats s = rollout_stream(
      g, f, [&]() -> std::optional<Frame> { return next < x.size() ? std::optional<Frame>(x[next++]) : std::nullopt; },
      [&](const Frame& y) { out.frames.push_back(std::make_shared<const Frame>(y)); }, x.sequence_id, options);
  if (stats) *stats = s;
  return out;
}

RolloutStats rollout_directory(const GeneratorFn& g, const FrameModel& f, const fs::path& in_dir,
                               const fs::path& out_dir, const std::string& sequence_id, const RolloutOptions& options) {
  if (!fs::is_directory(in_dir)) throw NotFoundError("input directory not found: " + in_dir.string());
  fs::create_directories(out_dir);
  int t = 0;
  return rollout_stream(
      g, f,
      [&]() -> std::optional<Frame> {
        const fs::path file = in_dir / frame_file_name(t);
        if (!fs::exists(file)) return std::nullopt;
        return load_frame(file, t++);
      },
      [&](const Frame& y) { save_frame(y, out_dir / frame_file_name(y.t_index)); }, sequence_id, options);
}

}  // namespace rtgan

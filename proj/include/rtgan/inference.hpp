#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>

#include "rtgan/datamodel.hpp"
#include "rtgan/framemodel.hpp"
#include "rtgan/models.hpp"

namespace rtgan {

// One recurrent step: (x_prev, x_cur, y_prev) -> y_cur.
using GeneratorFn = std::function<Frame(const Frame& x_prev, const Frame& x_cur, const Frame& y_prev)>;

// Wraps a generator; gradients are never recorded.
GeneratorFn generator_fn(const Generator<float>& g);

struct RolloutOptions {
  // Extension, off by default: replace G's output with F's every K frames (K > 0) to bound drift.
  int reanchor_every = 0;
};

struct RolloutStats {
  long long f_calls = 0;
  long long g_calls = 0;
  std::size_t frames = 0;
  std::size_t peak_resident_frames = 0;  // frames held by the rollout at once
};

// Pulls input frames until the source returns nothing; each output goes to the sink as soon as it
// exists. Only the previous input and previous output are kept between steps.
RolloutStats rollout_stream(const GeneratorFn& g, const FrameModel& f, const std::function<std::optional<Frame>()>& source,
                            const std::function<void(const Frame&)>& sink, const std::string& sequence_id = {},
                            const RolloutOptions& options = {});

// y'_0 = F(x_0), y'_t = G(x_{t-1}, x_t, y'_{t-1}).
VideoSequence rollout(const GeneratorFn& g, const FrameModel& f, const VideoSequence& x,
                      const RolloutOptions& options = {}, RolloutStats* stats = nullptr);

// Streams frame_%06d.png files from in_dir to out_dir.
RolloutStats rollout_directory(const GeneratorFn& g, const FrameModel& f, const fs::path& in_dir,
                               const fs::path& out_dir, const std::string& sequence_id = {},
                               const RolloutOptions& options = {});

}  // namespace rtgan

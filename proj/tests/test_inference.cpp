#include <gtest/gtest.h>

#include "rtgan/inference.hpp"
#include "test_util.hpp"

namespace rtgan {
namespace {

class CountingFrameModel final : public FrameModel {
 public:
  std::string name() const override { return "stub:count"; }
  bool deterministic() const override { return true; }
  std::uint64_t checksum() const override { return 1; }
  Frame apply(const Frame& frame, const std::string&) const override {
    ++calls;
    return Frame::filled(frame.height, frame.width, 3, frame.t_index, 0.5f);
  }
  mutable long long calls = 0;
};

VideoSequence ramp(int n) {
  VideoSequence s;
  s.sequence_id = "ramp";
  for (int t = 0; t < n; ++t) s.frames.push_back(std::make_shared<const Frame>(Frame::filled(16, 16, 3, t, -1.0f + 0.01f * t)));
  return s;
}

struct CallLog {
  long long calls = 0;
  std::vector<std::array<int, 3>> args;  // t indices of (x_prev, x_cur, y_prev)
};

GeneratorFn counting_generator(CallLog& log) {
  return [&log](const Frame& x_prev, const Frame& x_cur, const Frame& y_prev) {
    ++log.calls;
    log.args.push_back({x_prev.t_index, x_cur.t_index, y_prev.t_index});
    Frame y = y_prev;
    y.pixels = (y.pixels * 0.5f + x_cur.pixels * 0.5f).max(-1.0f).min(1.0f);
    y.t_index = x_cur.t_index;
    return y;
  };
}

TEST(Rollout, CallCountsAndLength) {
  for (int n : {0, 1, 2, 5, 100}) {
    CountingFrameModel f;
    CallLog log;
    RolloutStats stats;
    const VideoSequence y = rollout(counting_generator(log), f, ramp(n), {}, &stats);
    EXPECT_EQ(static_cast<int>(y.size()), n);
    EXPECT_EQ(f.calls, n > 0 ? 1 : 0) << n;
    EXPECT_EQ(log.calls, std::max(n - 1, 0)) << n;
    EXPECT_EQ(stats.f_calls, f.calls);
    EXPECT_EQ(stats.g_calls, log.calls);
    EXPECT_EQ(stats.frames, static_cast<std::size_t>(n));
    EXPECT_LE(stats.peak_resident_frames, 4u) << n;
  }
}

TEST(Rollout, RecurrenceWiring) {
  CountingFrameModel f;
  CallLog log;
  const VideoSequence x = ramp(5);
  const VideoSequence y = rollout(counting_generator(log), f, x);
  EXPECT_EQ(y[0].pixels.maxCoeff(), 0.5f);  // F(x0)
  for (int t = 1; t < 5; ++t) {
    EXPECT_EQ(log.args[t - 1], (std::array<int, 3>{t - 1, t, t - 1}));
    const Eigen::ArrayXf expected = (y[t - 1].pixels * 0.5f + x[t].pixels * 0.5f).max(-1.0f).min(1.0f);
    EXPECT_TRUE(y[t].pixels.isApprox(expected));
    EXPECT_EQ(y[t].t_index, t);
  }
}

TEST(Rollout, PeakResidencyDoesNotGrow) {
  CountingFrameModel f;
  CallLog log;
  int produced = 0;
  std::size_t sunk = 0;
  const RolloutStats stats = rollout_stream(
      counting_generator(log), f,
      [&]() -> std::optional<Frame> {
        if (produced == 1000) return std::nullopt;
        return Frame::filled(16, 16, 3, produced++, 0.0f);
      },
      [&](const Frame&) { ++sunk; });
  EXPECT_EQ(sunk, 1000u);
  EXPECT_EQ(stats.peak_resident_frames, 4u);
  EXPECT_EQ(stats.g_calls, 999);
}

TEST(Rollout, ReanchoringExtension) {
  CountingFrameModel f;
  CallLog log;
  RolloutOptions opt;
  opt.reanchor_every = 3;
  RolloutStats stats;
  rollout(counting_generator(log), f, ramp(10), opt, &stats);
  EXPECT_EQ(stats.f_calls, 4);  // t = 0, 3, 6, 9
  EXPECT_EQ(stats.g_calls, 6);
}

TEST(Rollout, MissingGenerator) {
  CountingFrameModel f;
  EXPECT_THROW(rollout(GeneratorFn{}, f, ramp(3)), PreconditionError);
}

TEST(Rollout, GeneratorIsDeterministicAndShapePreserving) {
  const Generator<float> g({4, 1, 9, 3}, 2);
  const GeneratorFn fn = generator_fn(g);
  CountingFrameModel f;
  const VideoSequence a = rollout(fn, f, ramp(6)), b = rollout(fn, f, ramp(6));
  for (std::size_t t = 0; t < a.size(); ++t) {
    EXPECT_EQ(a[t].pixels.matrix(), b[t].pixels.matrix());
    EXPECT_TRUE(a[t].same_shape(ramp(1)[0]));
  }
  // The wrapped copy runs the same weights as the original.
  const VideoSequence x = ramp(2);
  const Frame& x0 = x[0];
  const Frame& x1 = x[1];
  const Var<float> direct = g(Var<float>(nn::Tensor<float>({1, 3, 16, 16}, x0.pixels.matrix())),
                              Var<float>(nn::Tensor<float>({1, 3, 16, 16}, x1.pixels.matrix())),
                              Var<float>(nn::Tensor<float>({1, 3, 16, 16}, x0.pixels.matrix())));
  EXPECT_EQ(fn(x0, x1, x0).pixels.matrix(), direct.value().data());
}

TEST(Rollout, DirectoryStreaming) {
  test::TempDir dir;
  save_sequence(ramp(7), dir.path() / "in");
  CountingFrameModel f;
  CallLog log;
  const RolloutStats stats = rollout_directory(counting_generator(log), f, dir.path() / "in", dir.path() / "out");
  EXPECT_EQ(stats.frames, 7u);
  const VideoSequence out = load_sequence(dir.path() / "out", Domain::Y);
  EXPECT_EQ(out.size(), 7u);
  EXPECT_THROW(rollout_directory(counting_generator(log), f, dir.path() / "nope", dir.path() / "o2"), NotFoundError);
}

}  // namespace
}  // namespace rtgan

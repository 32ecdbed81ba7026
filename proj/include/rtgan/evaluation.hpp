#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rtgan/datamodel.hpp"
#include "rtgan/flow.hpp"

namespace rtgan {

struct BinaryMask {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> pixels;  // 0 or 1, row-major
  std::string source;

  std::size_t count() const;
};

// Channel 0 (the overlay channel of a mask rendering) above `threshold` in normalized units.
BinaryMask mask_from_frame(const Frame& frame, float threshold = 0.0f, std::string source = {});

// Both return 1 when both masks are empty.
double dice(const BinaryMask& a, const BinaryMask& b);
double iou(const BinaryMask& a, const BinaryMask& b);

enum class OverlapMetric { dice, iou };

// Mean over t of the overlap between predictions made on two textures of the same geometry.
double cross_texture_consistency(const std::vector<BinaryMask>& tex1, const std::vector<BinaryMask>& tex2,
                                 OverlapMetric metric = OverlapMetric::dice);

struct BlockMatchOptions {
  int block = 8;
  int radius = 4;
};

// Exhaustive block matching on luminance with SAD. Ties go to the smaller displacement, then to the
// first candidate in row-major (dy, dx) order. Every pixel of a block gets the block's vector.
FlowField estimate_flow(const Frame& f1, const Frame& f2, const BlockMatchOptions& options = {});

enum class FlowSource { estimated, ground_truth };

// Mean over t and pixels of |flow_x(t) - flow_y(t)|. With ground_truth, the input flow comes from
// `gt_flow` and pixels where it is NaN are skipped; the output flow is always estimated.
double flow_difference(const VideoSequence& x_seq, const VideoSequence& y_seq, FlowSource source,
                       const std::vector<FlowField>* gt_flow = nullptr, const BlockMatchOptions& options = {});

// Mean over t >= 1 of mean |y_t - y_{t-1}|; with flow, y_{t-1} is first warped by flow[t-1] and only
// valid pixels count.
double flicker(const VideoSequence& y_seq, const std::vector<FlowField>* flow = nullptr);

// Mean absolute difference over all frames: distance of a rollout to the frame model's outputs.
double l1_distance(const VideoSequence& a, const VideoSequence& b);

struct MetricsReport {
  std::map<std::string, std::map<std::string, double>> per_sequence;  // sequence -> metric -> value
  std::map<std::string, double> aggregate;                             // metric -> mean over sequences
  std::string config;                                                  // free-form echo of the run
  std::vector<std::string> dataset_ids;
  std::string dataset_hash;

  // Recomputes `aggregate` from per_sequence.
  void finalize();
  bool operator==(const MetricsReport&) const = default;
};

void write_report(const MetricsReport& report, const fs::path& file);
// Also checks that every aggregate is the mean of its per-sequence values.
MetricsReport read_report(const fs::path& file);

// Git-style content hash of a directory tree: SHA-1 over "<blob sha1> <relative path>" lines.
std::string dataset_hash(const fs::path& dir);

}  // namespace rtgan

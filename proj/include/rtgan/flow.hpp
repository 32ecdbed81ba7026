#pragma once

#include <Eigen/Core>

#include <filesystem>

#include "rtgan/datamodel.hpp"

namespace rtgan {

// Dense forward motion t -> t+1 sampled on frame t's pixel grid, in pixels. A pixel that moves
// to p + (dx, dy) in the next frame. NaN marks pixels with no valid correspondence.
struct FlowField {
  int height = 0;
  int width = 0;
  Eigen::ArrayXf dx;
  Eigen::ArrayXf dy;

  static FlowField zeros(int height, int width);
  static FlowField constant(int height, int width, float dx, float dy);
  Eigen::Index size() const { return static_cast<Eigen::Index>(height) * width; }
  bool operator==(const FlowField& o) const;
};

// 8-byte header: "RTFL", uint16 height, uint16 width (little endian), then height*width
// interleaved (dx, dy) float32 little-endian pairs.
void write_flow(const FlowField& flow, const std::filesystem::path& file);
FlowField read_flow(const std::filesystem::path& file);
std::string flow_file_name(int t_index);

struct WarpResult {
  Frame frame;
  Eigen::Array<bool, Eigen::Dynamic, 1> valid;  // per pixel; false where disoccluded or out of view
};

// Predicts frame t+1 from frame t and its forward flow: each target pixel p samples `src`
// bilinearly at q where q + flow(q) = p (solved by fixed-point iteration).
WarpResult warp_forward(const Frame& src, const FlowField& flow);

}  // namespace rtgan

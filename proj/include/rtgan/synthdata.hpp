#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "rtgan/datamodel.hpp"
#include "rtgan/flow.hpp"

namespace rtgan {

struct SceneSpec {
  std::uint64_t seed = 0;
  int n_frames = 60;
  int size = 64;
  int texture_id = 1;
  double camera_speed = 1.0;  // radial flow in pixels/frame at a quarter of the frame size from the center
  int ring_count = 3;
  bool light_falloff = true;

  void validate() const;
};

struct SceneBundle {
  VideoSequence x_seq;  // gray geometry render stored as RGB
  VideoSequence y_seq;  // textured render
  VideoSequence masks;  // one channel, +1 on ring crests
  std::vector<FlowField> flow;
};

// Camera model of a 2.5D tunnel: a pixel at radius r from the vanishing point c(t) sees the wall at
// depth z = K / r with K = size / 2. The camera advances `step` depth units per frame and the
// vanishing point drifts smoothly with distance travelled.
class TunnelCamera {
 public:
  explicit TunnelCamera(const SceneSpec& spec);

  double focal() const { return focal_; }
  double far_depth() const { return far_depth_; }
  double ring_spacing() const { return ring_spacing_; }
  double step() const { return step_; }
  double ring_phase() const { return ring_phase_; }
  // Vanishing point in pixel-center coordinates.
  void center(int t, double& cx, double& cy) const;
  // Wall depth seen by pixel (x, y) at frame t; +inf at the vanishing point.
  double depth(int t, double x, double y) const;
  // Ring coordinate of the wall point at depth z in frame t; crests sit at integers.
  double ring_coordinate(int t, double z) const;

 private:
  double size_;
  double focal_;
  double far_depth_;
  double ring_spacing_;
  double step_;
  double ring_phase_;
  double drift_amp_, drift_freq_[2], drift_phase_[2];
};

SceneBundle generate_scene(const SceneSpec& spec);

// Scene directory name; specs differing only in texture_id get distinct directories.
std::string scene_id(const SceneSpec& spec, std::size_t index);

// Writes <out>/<scene>/{geometry,texture,masks,flow}/ plus <out>/manifest.json. Geometry is the X
// domain, texture the Y domain. Refuses a non-empty out_dir unless `overwrite`.
DatasetManifest render_dataset(const std::vector<SceneSpec>& specs, const std::filesystem::path& out_dir,
                               bool overwrite = false);

std::vector<FlowField> load_flow_sequence(const std::filesystem::path& dir, int count);

}  // namespace rtgan

#include "rtgan/synthdata.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <random>

#include "rtgan/framemodel.hpp"

namespace rtgan {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr int kSuper = 3;              // supersamples per axis
constexpr double kFarDepth = 3.0;      // in units of the depth seen at half the frame size
constexpr double kFogStart = 0.8;      // fraction of the far depth where the render fades to black
constexpr double kFalloffDepth = 1.0;  // falloff is 1 / (1 + (z / kFalloffDepth)^2)
constexpr double kAmbient = 0.4;       // share of light that does not fall off
constexpr double kCrestHalfWidth = 0.15;

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

double smoothstep(double a, double b, double x) {
  const double t = std::clamp((x - a) / (b - a), 0.0, 1.0);
  return t * t * (3.0 - 2.0 * t);
}

// Value noise on an integer lattice, periodic in the second coordinate.
class ValueNoise {
 public:
  ValueNoise(std::uint64_t seed, int period_v) : seed_(seed), period_v_(period_v) {}

  double operator()(double u, double v) const {
    const double fu = std::floor(u), fv = std::floor(v);
    const auto iu = static_cast<std::int64_t>(fu), iv = static_cast<std::int64_t>(fv);
    const double su = smoothstep(0.0, 1.0, u - fu), sv = smoothstep(0.0, 1.0, v - fv);
    const double a = lattice(iu, iv), b = lattice(iu + 1, iv), c = lattice(iu, iv + 1), d = lattice(iu + 1, iv + 1);
    return (1 - sv) * ((1 - su) * a + su * b) + sv * ((1 - su) * c + su * d);
  }

 private:
  double lattice(std::int64_t u, std::int64_t v) const {
    const std::int64_t wrapped = ((v % period_v_) + period_v_) % period_v_;
    const std::uint64_t h = mix_seed(mix_seed(seed_, static_cast<std::uint64_t>(u)), static_cast<std::uint64_t>(wrapped));
    return static_cast<double>(h >> 11) * 0x1.0p-53;
  }

  std::uint64_t seed_;
  std::int64_t period_v_;
};

struct Texture {
  std::array<double, 3> base;
  std::array<double, 3> vessel_tint;
  double noise_u, vessel_freq, vessel_wobble;
  int noise_v;
  std::uint64_t seed;
};

Texture texture_for(int texture_id, std::uint64_t scene_seed) {
  Texture t{};
  switch (texture_id) {
    case 1:
      t = {{0.95, 0.62, 0.55}, {0.45, 0.80, 0.85}, 2.0, 3.0, 0.35, 10, 0};
      break;
    case 2:
      t = {{0.88, 0.74, 0.48}, {0.55, 0.70, 0.90}, 3.0, 5.0, 0.6, 14, 0};
      break;
    default:
      t = {{0.90, 0.65, 0.60}, {0.50, 0.75, 0.85}, 2.5, 4.0, 0.5, 12, 0};
      break;
  }
  t.seed = mix_seed(scene_seed, 0x7e47u + static_cast<std::uint64_t>(texture_id));
  return t;
}

}  // namespace

void SceneSpec::validate() const {
  if (size < 32 || size % 4 != 0) throw ConfigError("scene size must be >= 32 and divisible by 4");
  if (n_frames < 3) throw ConfigError("scene needs at least 3 frames");
  if (!(camera_speed > 0.0) || !std::isfinite(camera_speed)) throw ConfigError("camera_speed must be > 0");
  if (ring_count < 1) throw ConfigError("ring_count must be >= 1");
  // The reference radius must stay inside the frame after one step.
  if (camera_speed >= size / 4.0) throw ConfigError("camera_speed too large for the frame size");
}

TunnelCamera::TunnelCamera(const SceneSpec& spec) : size_(spec.size) {
  spec.validate();
  focal_ = size_ / 2.0;
  far_depth_ = kFarDepth;
  ring_spacing_ = (kFarDepth - 1.0) / spec.ring_count;
  const double r_ref = size_ / 4.0;
  step_ = focal_ / r_ref - focal_ / (r_ref + spec.camera_speed);
  // Geometry draws come from the seed alone so texture_id never changes the masks.
  std::mt19937_64 rng(mix_seed(spec.seed, 0x6e0u));
  ring_phase_ = uniform(rng, 0.0, 1.0);
  drift_amp_ = size_ * uniform(rng, 0.03, 0.07);
  for (int i = 0; i < 2; ++i) {
    drift_freq_[i] = uniform(rng, 0.6, 1.4);
    drift_phase_[i] = uniform(rng, 0.0, 2.0 * kPi);
  }
}

void TunnelCamera::center(int t, double& cx, double& cy) const {
  const double travelled = t * step_;
  cx = (size_ - 1.0) / 2.0 + drift_amp_ * std::sin(drift_freq_[0] * travelled + drift_phase_[0]);
  cy = (size_ - 1.0) / 2.0 + drift_amp_ * std::sin(drift_freq_[1] * travelled + drift_phase_[1]);
}

double TunnelCamera::depth(int t, double x, double y) const {
  double cx, cy;
  center(t, cx, cy);
  const double r = std::hypot(x - cx, y - cy);
  return r > 0.0 ? focal_ / r : std::numeric_limits<double>::infinity();
}

double TunnelCamera::ring_coordinate(int t, double z) const { return (z + t * step_) / ring_spacing_ + ring_phase_; }

namespace {

struct Shading {
  double intensity;  // geometry render in [0, 1]
  std::array<double, 3> albedo;
};

Shading shade(const TunnelCamera& cam, const Texture& tex, const ValueNoise& noise, bool falloff, int t, double x,
              double y) {
  double cx, cy;
  cam.center(t, cx, cy);
  const double z = cam.depth(t, x, y);
  if (!(z < cam.far_depth())) return {0.0, {0.0, 0.0, 0.0}};
  const double theta = std::atan2(y - cy, x - cx);
  const double psi = cam.ring_coordinate(t, z);
  double intensity = 0.55 + 0.45 * std::cos(2.0 * kPi * psi);
  intensity *= 0.9 + 0.1 * std::cos(theta - 0.7);
  if (falloff) intensity *= kAmbient + (1.0 - kAmbient) / (1.0 + (z / kFalloffDepth) * (z / kFalloffDepth));
  intensity *= 1.0 - smoothstep(kFogStart * cam.far_depth(), cam.far_depth(), z);

  const double v = (theta + kPi) / (2.0 * kPi);
  const double n = 0.65 * noise(psi * tex.noise_u, v * tex.noise_v) + 0.35 * noise(psi * tex.noise_u * 2.0 + 17.0, v * tex.noise_v * 2.0);
  const double vessel_arg = tex.vessel_freq * v * 2.0 * kPi + tex.vessel_wobble * std::sin(2.0 * kPi * psi * 0.5);
  const double vessel = std::exp(-std::pow(std::sin(vessel_arg) / 0.18, 2));
  Shading s{intensity, {}};
  for (int c = 0; c < 3; ++c) {
    s.albedo[c] = tex.base[c] * (0.7 + 0.3 * n) * (1.0 - 0.6 * vessel * (1.0 - tex.vessel_tint[c]));
  }
  return s;
}

}  // namespace

SceneBundle generate_scene(const SceneSpec& spec) {
  const TunnelCamera cam(spec);
  const Texture tex = texture_for(spec.texture_id, spec.seed);
  const ValueNoise noise(tex.seed, tex.noise_v);
  const int n = spec.size;

  SceneBundle b;
  b.x_seq.domain_tag = Domain::X;
  b.y_seq.domain_tag = Domain::Y;
  b.masks.domain_tag = Domain::Y;
  for (int t = 0; t < spec.n_frames; ++t) {
    Frame x = Frame::filled(n, n, 3, t, -1.0f);
    Frame y = Frame::filled(n, n, 3, t, -1.0f);
    Frame m = Frame::filled(n, n, 1, t, -1.0f);
    const Eigen::Index plane = x.plane_size();
    for (int py = 0; py < n; ++py) {
      for (int px = 0; px < n; ++px) {
        double gi = 0.0;
        std::array<double, 3> rgb{0.0, 0.0, 0.0};
        for (int sy = 0; sy < kSuper; ++sy) {
          for (int sx = 0; sx < kSuper; ++sx) {
            const double qx = px + (sx + 0.5) / kSuper - 0.5, qy = py + (sy + 0.5) / kSuper - 0.5;
            const Shading s = shade(cam, tex, noise, spec.light_falloff, t, qx, qy);
            gi += s.intensity;
            for (int c = 0; c < 3; ++c) rgb[c] += s.intensity * s.albedo[c];
          }
        }
        const double inv = 1.0 / (kSuper * kSuper);
        const Eigen::Index p = static_cast<Eigen::Index>(py) * n + px;
        const float gx = quantize_pixel(static_cast<float>(2.0 * gi * inv - 1.0));
        for (int c = 0; c < 3; ++c) {
          x.pixels[c * plane + p] = gx;
          y.pixels[c * plane + p] = quantize_pixel(static_cast<float>(2.0 * rgb[c] * inv - 1.0));
        }
        const double z = cam.depth(t, px, py);
        if (z < kFogStart * cam.far_depth()) {
          const double psi = cam.ring_coordinate(t, z);
          if (std::abs(psi - std::round(psi)) < kCrestHalfWidth) m.pixels[p] = 1.0f;
        }
      }
    }
    b.x_seq.frames.push_back(std::make_shared<const Frame>(std::move(x)));
    b.y_seq.frames.push_back(std::make_shared<const Frame>(std::move(y)));
    b.masks.frames.push_back(std::make_shared<const Frame>(std::move(m)));
  }

  const float nan = std::numeric_limits<float>::quiet_NaN();
  for (int t = 0; t + 1 < spec.n_frames; ++t) {
    double cx0, cy0, cx1, cy1;
    cam.center(t, cx0, cy0);
    cam.center(t + 1, cx1, cy1);
    FlowField f = FlowField::zeros(n, n);
    for (int py = 0; py < n; ++py) {
      for (int px = 0; px < n; ++px) {
        const Eigen::Index p = static_cast<Eigen::Index>(py) * n + px;
        const double dx = px - cx0, dy = py - cy0;
        const double r = std::hypot(dx, dy);
        const double z = r > 0.0 ? cam.focal() / r : std::numeric_limits<double>::infinity();
        if (!(z < cam.far_depth())) {
          f.dx[p] = nan;
          f.dy[p] = nan;
          continue;
        }
        const double r_next = cam.focal() / (z - cam.step());
        f.dx[p] = static_cast<float>(cx1 + dx * r_next / r - px);
        f.dy[p] = static_cast<float>(cy1 + dy * r_next / r - py);
      }
    }
    b.flow.push_back(std::move(f));
  }
  return b;
}

std::string scene_id(const SceneSpec& spec, std::size_t index) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "s%04zu_t%d", index, spec.texture_id);
  return buf;
}

DatasetManifest render_dataset(const std::vector<SceneSpec>& specs, const std::filesystem::path& out_dir, bool overwrite) {
  if (specs.empty()) throw ConfigError("render_dataset needs at least one scene spec");
  for (const auto& s : specs) s.validate();
  if (fs::exists(out_dir) && !fs::is_empty(out_dir)) {
    if (!overwrite) throw ConfigError("output directory is not empty: " + out_dir.string() + " (use overwrite)");
    fs::remove_all(out_dir);
  }
  fs::create_directories(out_dir);

  DatasetManifest manifest;
  manifest.root_path = ".";
  manifest.split = Split::train;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const SceneSpec& spec = specs[i];
    const std::string id = scene_id(spec, i);
    SceneBundle b = generate_scene(spec);
    const fs::path dir = out_dir / id;
    save_sequence(b.x_seq, dir / "geometry");
    save_sequence(b.y_seq, dir / "texture");
    save_sequence(b.masks, dir / "masks");
    fs::create_directories(dir / "flow");
    for (std::size_t t = 0; t < b.flow.size(); ++t) write_flow(b.flow[t], dir / "flow" / flow_file_name(static_cast<int>(t)));
    const TripletRange range{0, spec.n_frames - 2, 1};
    manifest.entries.push_back({id, id + "/geometry", Domain::X, spec.n_frames, range});
    manifest.entries.push_back({id, id + "/texture", Domain::Y, spec.n_frames, range});
  }
  save_manifest(manifest, out_dir / "manifest.json");
  return manifest;
}

std::vector<FlowField> load_flow_sequence(const std::filesystem::path& dir, int count) {
  std::vector<FlowField> out;
  out.reserve(static_cast<std::size_t>(std::max(count, 0)));
  for (int t = 0; t < count; ++t) out.push_back(read_flow(dir / flow_file_name(t)));
  return out;
}

}  // namespace rtgan

#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <utility>

#include "rtgan/datamodel.hpp"

namespace rtgan {

// A frozen per-frame translator. Implementations must be safe to call concurrently on distinct frames.
class FrameModel {
 public:
  virtual ~FrameModel() = default;

  virtual std::string name() const = 0;
  virtual bool deterministic() const = 0;
  // Digest of everything that determines the model's outputs.
  virtual std::uint64_t checksum() const = 0;

  // `sequence_id` identifies the source sequence; only lookup-backed models need it.
  virtual Frame apply(const Frame& frame, const std::string& sequence_id) const = 0;
};

// Runs the model and enforces its output contract (same H, W; RGB; values in [-1, 1]).
Frame apply_frame_model(const FrameModel& model, const Frame& frame, const std::string& sequence_id = {});

// Deterministic per-(seed, t) stream seed.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);

// Snaps a value to the 8-bit grid so PNG round trips are exact.
inline float quantize_pixel(float v) { return normalize_pixel(denormalize_pixel(v)); }

class IdentityOracle final : public FrameModel {
 public:
  std::string name() const override { return "oracle:identity"; }
  bool deterministic() const override { return true; }
  std::uint64_t checksum() const override { return 0x1d; }
  Frame apply(const Frame& frame, const std::string&) const override;
};

struct JitterParams {
  double threshold = 0.0;  // tau
  double amplitude = 0.2;  // a; per-frame threshold offset ~ U(-a, a)
  std::uint64_t seed = 0;
};

// Luminance thresholding with a per-frame random offset: a red overlay mask that flickers when a > 0.
class JitterSegmentOracle final : public FrameModel {
 public:
  explicit JitterSegmentOracle(JitterParams params);
  std::string name() const override;
  bool deterministic() const override { return true; }
  std::uint64_t checksum() const override;
  Frame apply(const Frame& frame, const std::string&) const override;

  double offset(int t_index) const;
  const JitterParams& params() const { return params_; }

 private:
  JitterParams params_;
};

struct ColorLutParams {
  int palette_count = 4;
  int specular_spots = 3;
  std::uint64_t seed = 0;
};

struct Palette {
  std::array<float, 3> dark;
  std::array<float, 3> bright;
  std::array<float, 3> specular;
};

// Colors a grayscale rendering with a palette re-drawn per frame, plus per-frame specular spots.
class ColorLutOracle final : public FrameModel {
 public:
  explicit ColorLutOracle(ColorLutParams params);
  std::string name() const override;
  bool deterministic() const override { return true; }
  std::uint64_t checksum() const override;
  Frame apply(const Frame& frame, const std::string&) const override;

  int palette_index(int t_index) const;
  const std::vector<Palette>& palettes() const { return palettes_; }

 private:
  ColorLutParams params_;
  std::vector<Palette> palettes_;
};

struct PrecomputeCache {
  std::string root_path;
  std::string model_name;
  std::map<std::pair<std::string, int>, std::string> index;  // (sequence_id, t_index) -> file
  std::size_t computed = 0;
  std::size_t reused = 0;
};

// Serves precomputed outputs from a cache directory written by precompute_outputs.
class CachedFrameModel final : public FrameModel {
 public:
  explicit CachedFrameModel(const fs::path& dir);
  std::string name() const override { return "cache:" + cache_.root_path; }
  bool deterministic() const override { return true; }
  std::uint64_t checksum() const override;
  Frame apply(const Frame& frame, const std::string& sequence_id) const override;

  const PrecomputeCache& cache() const { return cache_; }

 private:
  PrecomputeCache cache_;
};

// Frames referenced by the manifest's triplets, as (sequence_id, t_index).
std::vector<std::pair<std::string, int>> referenced_frames(const DatasetManifest& manifest);

// Applies the model to every referenced frame of `stream` under each scene directory of the
// manifest and writes out_dir/<sequence_id>/frame_%06d.png plus out_dir/cache.json. Existing
// outputs with the right shape are kept, so an interrupted run resumes. out_dir/manifest.json lists
// the outputs as Y-domain sequences so the cache can also serve as training data.
PrecomputeCache precompute_outputs(const FrameModel& model, const DatasetManifest& manifest,
                                   const fs::path& manifest_root, const std::string& stream, const fs::path& out_dir);

PrecomputeCache load_cache_index(const fs::path& dir);

// `oracle:<name>[:key=value,...]` or `cache:<dir>`.
std::unique_ptr<FrameModel> make_frame_model(const std::string& ref);

}  // namespace rtgan

#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "rtgan/error.hpp"

namespace rtgan {

namespace fs = std::filesystem;

enum class Domain { X, Y };
enum class Split { train, val, test };

std::string to_string(Domain d);
std::string to_string(Split s);
Domain parse_domain(const std::string& s);
Split parse_split(const std::string& s);

// 8-bit <-> [-1, 1] affine map: v / 127.5 - 1, inverted with round-half-away.
inline float normalize_pixel(std::uint8_t v) { return static_cast<float>(v) / 127.5f - 1.0f; }
std::uint8_t denormalize_pixel(float v);

// An image with planar (channel-major) storage: pixels[(c * height + y) * width + x].
struct Frame {
  int height = 0;
  int width = 0;
  int channels = 0;
  int t_index = 0;
  Eigen::ArrayXf pixels;

  static Frame filled(int height, int width, int channels, int t_index, float value);

  float& at(int c, int y, int x) { return pixels[(static_cast<Eigen::Index>(c) * height + y) * width + x]; }
  float at(int c, int y, int x) const { return pixels[(static_cast<Eigen::Index>(c) * height + y) * width + x]; }
  Eigen::Index plane_size() const { return static_cast<Eigen::Index>(height) * width; }

  // Checks the pixel range and the H, W >= 16, divisible-by-4 constraint.
  void validate() const;

  // A one-channel mask becomes a red overlay: mask in R, G = B = -1. RGB frames pass through.
  Frame as_rgb() const;

  // Luminance (Rec. 601 weights) per pixel, same normalized range.
  Eigen::ArrayXf luminance() const;

  bool same_shape(const Frame& other) const {
    return height == other.height && width == other.width && channels == other.channels;
  }
};

// Largest centered window whose sides are multiples of 4.
Frame center_crop_to_multiple_of_4(const Frame& frame);

using FramePtr = std::shared_ptr<const Frame>;

struct VideoSequence {
  std::vector<FramePtr> frames;
  std::string sequence_id;
  Domain domain_tag = Domain::X;
  std::optional<double> fps_hint;

  std::size_t size() const { return frames.size(); }
  bool empty() const { return frames.empty(); }
  const Frame& operator[](std::size_t i) const { return *frames[i]; }

  // t_index values 0..N-1 in order, shared shape.
  void validate() const;
};

struct FrameTriplet {
  std::array<FramePtr, 3> x;
  std::array<FramePtr, 3> f;  // frame-model outputs F(x_i); null until attached
  std::string source_sequence;

  bool has_frame_outputs() const { return f[0] && f[1]; }
  void validate() const;
};

// Start indices of triplets in [first, end) stepping by stride.
struct TripletRange {
  int first = 0;
  int end = 0;
  int stride = 1;

  int count() const { return end > first ? (end - first + stride - 1) / stride : 0; }
  bool operator==(const TripletRange&) const = default;
};

struct ManifestEntry {
  std::string sequence_id;
  std::string path;  // frame directory, relative to the manifest root
  Domain domain = Domain::X;
  int frame_count = 0;
  TripletRange triplets;

  bool operator==(const ManifestEntry&) const = default;
};

struct DatasetManifest {
  std::string root_path;
  std::vector<ManifestEntry> entries;
  Split split = Split::train;
  std::uint64_t seed = 0;

  // Training atoms: triplets over X-domain entries.
  std::size_t triplet_count() const;
  std::vector<std::string> sequence_ids() const;
  bool operator==(const DatasetManifest&) const = default;
};

// Frame files are `frame_%06d.png`.
std::string frame_file_name(int t_index);

VideoSequence load_sequence(const fs::path& dir, Domain domain_tag, const std::string& sequence_id = {});
void save_sequence(const VideoSequence& seq, const fs::path& dir);

Frame load_frame(const fs::path& file, int t_index);
void save_frame(const Frame& frame, const fs::path& file);

// Triplets (t, t+1, t+2) for t = 0, stride, 2*stride, ... while t + 2 < N.
std::vector<FrameTriplet> make_triplets(const VideoSequence& seq, int stride = 1);

// Splits whole sequences (never one sequence across splits) into train/val/test.
std::array<DatasetManifest, 3> split_dataset(const DatasetManifest& manifest, const std::array<double, 3>& ratios,
                                             std::uint64_t seed);

std::string manifest_to_string(const DatasetManifest& manifest);
DatasetManifest manifest_from_string(const std::string& text);
void save_manifest(const DatasetManifest& manifest, const fs::path& file);
// Reads and verifies that every referenced frame file exists.
DatasetManifest load_manifest(const fs::path& file);

// Directory of `stream` for an entry: sibling of the entry's own directory. Empty stream means the
// entry's own directory.
fs::path stream_dir(const fs::path& root, const ManifestEntry& entry, const std::string& stream);

// One sequence per distinct sequence_id, read from `stream` (first entry of each id decides the scene).
std::vector<VideoSequence> load_stream(const DatasetManifest& manifest, const fs::path& root, const std::string& stream,
                                       Domain domain_tag);

// Number of worker threads allowed for data loading (RTGAN_NUM_WORKERS, default hardware concurrency).
int data_workers();

}  // namespace rtgan

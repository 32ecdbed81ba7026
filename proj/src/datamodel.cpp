#include "rtgan/datamodel.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <random>
#include <regex>
#include <set>
#include <sstream>
#include <thread>

#include "rtgan/image_io.hpp"

namespace rtgan {

using nlohmann::json;

std::string to_string(Domain d) { return d == Domain::X ? "X" : "Y"; }

std::string to_string(Split s) {
  switch (s) {
    case Split::train:
      return "train";
    case Split::val:
      return "val";
    case Split::test:
      return "test";
  }
  return "train";
}

Domain parse_domain(const std::string& s) {
  if (s == "X") return Domain::X;
  if (s == "Y") return Domain::Y;
  throw FormatError("unknown domain tag '" + s + "'");
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  throw FormatError("unknown split '" + s + "'");
}

std::uint8_t denormalize_pixel(float v) {
  const long r = std::lround((static_cast<double>(v) + 1.0) * 127.5);
  return static_cast<std::uint8_t>(std::clamp(r, 0L, 255L));
}

Frame Frame::filled(int height, int width, int channels, int t_index, float value) {
  Frame f;
  f.height = height;
  f.width = width;
  f.channels = channels;
  f.t_index = t_index;
  f.pixels = Eigen::ArrayXf::Constant(static_cast<Eigen::Index>(height) * width * channels, value);
  return f;
}

void Frame::validate() const {
  if (height < 16 || width < 16 || height % 4 != 0 || width % 4 != 0) {
    throw FormatError("frame " + std::to_string(t_index) + " is " + std::to_string(height) + "x" +
                      std::to_string(width) + "; sides must be >= 16 and divisible by 4");
  }
  if (channels != 1 && channels != 3) throw FormatError("frame must have 1 or 3 channels");
  if (pixels.size() != plane_size() * channels) throw FormatError("frame pixel buffer has the wrong size");
  if (t_index < 0) throw FormatError("frame t_index must be >= 0");
  if (!pixels.isFinite().all() || pixels.minCoeff() < -1.0f || pixels.maxCoeff() > 1.0f) {
    throw FormatError("frame " + std::to_string(t_index) + " has pixels outside [-1, 1]");
  }
}

Frame Frame::as_rgb() const {
  if (channels == 3) return *this;
  Frame out = filled(height, width, 3, t_index, -1.0f);
  out.pixels.head(plane_size()) = pixels.head(plane_size());
  return out;
}

Eigen::ArrayXf Frame::luminance() const {
  const Eigen::Index n = plane_size();
  if (channels == 1) return pixels;
  return 0.299f * pixels.segment(0, n) + 0.587f * pixels.segment(n, n) + 0.114f * pixels.segment(2 * n, n);
}

Frame center_crop_to_multiple_of_4(const Frame& frame) {
  const int h = frame.height - frame.height % 4;
  const int w = frame.width - frame.width % 4;
  if (h == frame.height && w == frame.width) return frame;
  const int oy = (frame.height - h) / 2, ox = (frame.width - w) / 2;
  Frame out = Frame::filled(h, w, frame.channels, frame.t_index, 0.0f);
  for (int c = 0; c < frame.channels; ++c) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) out.at(c, y, x) = frame.at(c, y + oy, x + ox);
    }
  }
  return out;
}

void VideoSequence::validate() const {
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (frames[i]->t_index != static_cast<int>(i)) {
      throw FormatError("sequence '" + sequence_id + "': frame " + std::to_string(i) + " has t_index " +
                        std::to_string(frames[i]->t_index));
    }
    if (!frames[i]->same_shape(*frames.front())) {
      throw FormatError("sequence '" + sequence_id + "': non-uniform frame shapes at index " + std::to_string(i));
    }
  }
}

void FrameTriplet::validate() const {
  for (int i = 0; i < 3; ++i) {
    if (!x[i]) throw ContractError("triplet is missing input frame " + std::to_string(i));
    if (i > 0 && x[i]->t_index != x[i - 1]->t_index + 1) {
      throw ContractError("triplet frames are not consecutive in '" + source_sequence + "'");
    }
    if (f[i] && (f[i]->height != x[i]->height || f[i]->width != x[i]->width)) {
      throw ContractError("frame-model output " + std::to_string(i) + " does not match its input shape");
    }
  }
}

std::size_t DatasetManifest::triplet_count() const {
  std::size_t n = 0;
  for (const auto& e : entries) {
    if (e.domain == Domain::X) n += static_cast<std::size_t>(e.triplets.count());
  }
  return n;
}

std::vector<std::string> DatasetManifest::sequence_ids() const {
  std::vector<std::string> ids;
  for (const auto& e : entries) {
    if (std::find(ids.begin(), ids.end(), e.sequence_id) == ids.end()) ids.push_back(e.sequence_id);
  }
  return ids;
}

std::string frame_file_name(int t_index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "frame_%06d.png", t_index);
  return buf;
}

int data_workers() {
  int n = static_cast<int>(std::thread::hardware_concurrency());
  if (const char* env = std::getenv("RTGAN_NUM_WORKERS")) {
    const int cap = std::atoi(env);
    if (cap > 0) n = std::min(std::max(n, 1), cap);
  }
  return std::max(n, 1);
}

Frame load_frame(const fs::path& file, int t_index) {
  const Image8 img = read_png(file);
  Frame f = Frame::filled(img.height, img.width, img.channels, t_index, 0.0f);
  const Eigen::Index plane = f.plane_size();
  for (Eigen::Index p = 0; p < plane; ++p) {
    for (int c = 0; c < img.channels; ++c) f.pixels[c * plane + p] = normalize_pixel(img.data[p * img.channels + c]);
  }
  return center_crop_to_multiple_of_4(f);
}

void save_frame(const Frame& frame, const fs::path& file) {
  Image8 img;
  img.width = frame.width;
  img.height = frame.height;
  img.channels = frame.channels;
  img.data.resize(static_cast<std::size_t>(frame.pixels.size()));
  const Eigen::Index plane = frame.plane_size();
  for (Eigen::Index p = 0; p < plane; ++p) {
    for (int c = 0; c < frame.channels; ++c) img.data[p * frame.channels + c] = denormalize_pixel(frame.pixels[c * plane + p]);
  }
  write_png(img, file);
}

VideoSequence load_sequence(const fs::path& dir, Domain domain_tag, const std::string& sequence_id) {
  if (!fs::is_directory(dir)) throw NotFoundError("sequence directory not found: " + dir.string());
  static const std::regex pattern(R"(frame_(\d{6})\.png)");
  std::map<int, fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    std::smatch m;
    const std::string name = entry.path().filename().string();
    if (entry.is_regular_file() && std::regex_match(name, m, pattern)) files[std::stoi(m[1])] = entry.path();
  }
  if (files.empty()) throw FormatError("no frame_%06d.png files in " + dir.string());
  int expected = 0;
  for (const auto& [index, path] : files) {
    if (index != expected) throw FormatError("gap at index " + std::to_string(expected) + " in " + dir.string());
    ++expected;
  }

  std::vector<fs::path> paths;
  for (const auto& [index, path] : files) paths.push_back(path);
  std::vector<FramePtr> frames(paths.size());
  std::vector<std::string> errors(paths.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < paths.size(); i = next++) {
      try {
        frames[i] = std::make_shared<const Frame>(load_frame(paths[i], static_cast<int>(i)));
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  const int n_workers = std::min<int>(data_workers(), static_cast<int>(paths.size()));
  if (n_workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < n_workers; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (!e.empty()) throw FormatError(e);
  }

  VideoSequence seq;
  seq.frames = std::move(frames);
  seq.domain_tag = domain_tag;
  seq.sequence_id = sequence_id.empty() ? dir.filename().string() : sequence_id;
  for (std::size_t i = 1; i < seq.size(); ++i) {
    if (!seq[i].same_shape(seq[0])) {
      throw FormatError("non-uniform frame shapes in " + dir.string() + " at index " + std::to_string(i));
    }
  }
  seq[0].validate();
  return seq;
}

void save_sequence(const VideoSequence& seq, const fs::path& dir) {
  fs::create_directories(dir);
  for (const auto& f : seq.frames) save_frame(*f, dir / frame_file_name(f->t_index));
}

fs::path stream_dir(const fs::path& root, const ManifestEntry& entry, const std::string& stream) {
  const fs::path own = root / entry.path;
  return stream.empty() ? own : own.parent_path() / stream;
}

std::vector<VideoSequence> load_stream(const DatasetManifest& manifest, const fs::path& root, const std::string& stream,
                                       Domain domain_tag) {
  std::vector<VideoSequence> out;
  std::set<std::string> seen;
  for (const auto& e : manifest.entries) {
    if (!seen.insert(e.sequence_id).second) continue;
    out.push_back(load_sequence(stream_dir(root, e, stream), domain_tag, e.sequence_id));
  }
  return out;
}

std::vector<FrameTriplet> make_triplets(const VideoSequence& seq, int stride) {
  if (stride < 1) throw ConfigError("triplet stride must be >= 1");
  std::vector<FrameTriplet> out;
  for (std::size_t t = 0; t + 2 < seq.size(); t += static_cast<std::size_t>(stride)) {
    FrameTriplet trip;
    trip.x = {seq.frames[t], seq.frames[t + 1], seq.frames[t + 2]};
    trip.source_sequence = seq.sequence_id;
    out.push_back(std::move(trip));
  }
  return out;
}

std::array<DatasetManifest, 3> split_dataset(const DatasetManifest& manifest, const std::array<double, 3>& ratios,
                                             std::uint64_t seed) {
  double sum = 0;
  for (double r : ratios) {
    if (r < 0) throw ConfigError("split ratios must be non-negative");
    sum += r;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("split ratios must sum to 1");

  std::vector<std::string> ids = manifest.sequence_ids();
  std::sort(ids.begin(), ids.end());
  const int n = static_cast<int>(ids.size());
  const int buckets = static_cast<int>(std::count_if(ratios.begin(), ratios.end(), [](double r) { return r > 0; }));
  if (n < buckets) {
    throw ConfigError("cannot split " + std::to_string(n) + " sequences into " + std::to_string(buckets) +
                      " non-empty splits");
  }

  std::array<int, 3> counts{};
  counts[0] = static_cast<int>(std::floor(ratios[0] * n + 0.5));
  counts[1] = static_cast<int>(std::floor(ratios[1] * n + 0.5));
  counts[0] = std::min(counts[0], n);
  counts[1] = std::min(counts[1], n - counts[0]);
  counts[2] = n - counts[0] - counts[1];
  if (ratios[2] == 0 && counts[2] > 0) {
    counts[ratios[0] >= ratios[1] ? 0 : 1] += counts[2];
    counts[2] = 0;
  }
  for (int i = 0; i < 3; ++i) {
    if (ratios[i] > 0 && counts[i] == 0) {
      auto largest = std::max_element(counts.begin(), counts.end()) - counts.begin();
      --counts[largest];
      ++counts[i];
    }
  }

  std::mt19937_64 rng(seed);
  std::shuffle(ids.begin(), ids.end(), rng);
  std::map<std::string, int> bucket_of;
  int pos = 0;
  for (int b = 0; b < 3; ++b) {
    for (int k = 0; k < counts[b]; ++k) bucket_of[ids[pos++]] = b;
  }

  std::array<DatasetManifest, 3> out;
  const std::array<Split, 3> splits{Split::train, Split::val, Split::test};
  for (int b = 0; b < 3; ++b) {
    out[b].root_path = manifest.root_path;
    out[b].split = splits[b];
    out[b].seed = seed;
  }
  for (const auto& e : manifest.entries) out[bucket_of.at(e.sequence_id)].entries.push_back(e);
  return out;
}

std::string manifest_to_string(const DatasetManifest& m) {
  json j;
  j["root_path"] = m.root_path;
  j["split"] = to_string(m.split);
  j["seed"] = m.seed;
  j["entries"] = json::array();
  for (const auto& e : m.entries) {
    j["entries"].push_back({{"sequence_id", e.sequence_id},
                            {"path", e.path},
                            {"domain", to_string(e.domain)},
                            {"frame_count", e.frame_count},
                            {"triplets", {{"first", e.triplets.first}, {"end", e.triplets.end}, {"stride", e.triplets.stride}}}});
  }
  return j.dump(2) + "\n";
}

DatasetManifest manifest_from_string(const std::string& text) {
  try {
    const json j = json::parse(text);
    DatasetManifest m;
    m.root_path = j.at("root_path").get<std::string>();
    m.split = parse_split(j.at("split").get<std::string>());
    m.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& e : j.at("entries")) {
      ManifestEntry entry;
      entry.sequence_id = e.at("sequence_id").get<std::string>();
      entry.path = e.at("path").get<std::string>();
      entry.domain = parse_domain(e.at("domain").get<std::string>());
      entry.frame_count = e.at("frame_count").get<int>();
      entry.triplets.first = e.at("triplets").at("first").get<int>();
      entry.triplets.end = e.at("triplets").at("end").get<int>();
      entry.triplets.stride = e.at("triplets").at("stride").get<int>();
      m.entries.push_back(std::move(entry));
    }
    return m;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed manifest: ") + e.what());
  }
}

void save_manifest(const DatasetManifest& manifest, const fs::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw NotFoundError("cannot write manifest " + file.string());
  out << manifest_to_string(manifest);
}

DatasetManifest load_manifest(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw NotFoundError("manifest not found: " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  DatasetManifest m = manifest_from_string(ss.str());
  const fs::path root = file.parent_path();
  for (const auto& e : m.entries) {
    for (int t = 0; t < e.frame_count; ++t) {
      const fs::path f = root / e.path / frame_file_name(t);
      if (!fs::exists(f)) throw NotFoundError("manifest references missing file " + f.string());
    }
  }
  return m;
}

}  // namespace rtgan

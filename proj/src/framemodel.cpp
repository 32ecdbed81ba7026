#include "rtgan/framemodel.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

namespace rtgan {

using nlohmann::json;

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t hash_doubles(std::initializer_list<double> values, std::uint64_t h) {
  for (double v : values) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    h = splitmix64(h ^ bits);
  }
  return h;
}

std::string format_number(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

std::map<std::string, std::string> parse_options(const std::string& text) {
  std::map<std::string, std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ConfigError("frame model option '" + item + "' is not key=value");
    out[item.substr(0, eq)] = item.substr(eq + 1);
  }
  return out;
}

double take_double(std::map<std::string, std::string>& opts, const std::string& key, double fallback) {
  auto it = opts.find(key);
  if (it == opts.end()) return fallback;
  try {
    double v = std::stod(it->second);
    opts.erase(it);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("frame model option " + key + " is not a number: " + it->second);
  }
}

}  // namespace

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) { return splitmix64(splitmix64(seed) ^ salt); }

Frame apply_frame_model(const FrameModel& model, const Frame& frame, const std::string& sequence_id) {
  Frame out = model.apply(frame, sequence_id);
  if (out.height != frame.height || out.width != frame.width) {
    throw ContractError("frame model '" + model.name() + "' changed the frame shape from " +
                        std::to_string(frame.height) + "x" + std::to_string(frame.width) + " to " +
                        std::to_string(out.height) + "x" + std::to_string(out.width));
  }
  if (out.channels != 3 || out.pixels.size() != out.plane_size() * 3) {
    throw ContractError("frame model '" + model.name() + "' must return RGB frames");
  }
  if (!out.pixels.isFinite().all() || out.pixels.minCoeff() < -1.0f || out.pixels.maxCoeff() > 1.0f) {
    throw ContractError("frame model '" + model.name() + "' produced values outside [-1, 1]");
  }
  out.t_index = frame.t_index;
  return out;
}

Frame IdentityOracle::apply(const Frame& frame, const std::string&) const { return frame.as_rgb(); }

JitterSegmentOracle::JitterSegmentOracle(JitterParams params) : params_(params) {
  if (params_.amplitude < 0) throw ConfigError("jitter amplitude must be >= 0");
  if (!(params_.threshold > -1.0 && params_.threshold <= 1.0)) throw ConfigError("jitter threshold must be in (-1, 1]");
}

std::string JitterSegmentOracle::name() const {
  return "oracle:jitter:tau=" + format_number(params_.threshold) + ",a=" + format_number(params_.amplitude) +
         ",seed=" + std::to_string(params_.seed);
}

std::uint64_t JitterSegmentOracle::checksum() const {
  return hash_doubles({params_.threshold, params_.amplitude}, params_.seed ^ 0x6a);
}

double JitterSegmentOracle::offset(int t_index) const {
  if (params_.amplitude == 0) return 0.0;
  std::mt19937_64 rng(mix_seed(params_.seed, static_cast<std::uint64_t>(t_index)));
  return std::uniform_real_distribution<double>(-params_.amplitude, params_.amplitude)(rng);
}

Frame JitterSegmentOracle::apply(const Frame& frame, const std::string&) const {
  const Eigen::ArrayXf lum = frame.luminance();
  const float threshold = static_cast<float>(params_.threshold + offset(frame.t_index));
  Frame out = Frame::filled(frame.height, frame.width, 3, frame.t_index, -1.0f);
  // tau = 1 is the top of the pixel range, so no offset can make a pixel exceed it.
  if (params_.threshold >= 1.0) return out;
  out.pixels.head(frame.plane_size()) = (lum > threshold).select(1.0f, Eigen::ArrayXf::Constant(lum.size(), -1.0f));
  return out;
}

ColorLutOracle::ColorLutOracle(ColorLutParams params) : params_(params) {
  if (params_.palette_count < 2) throw ConfigError("color LUT oracle needs at least 2 palettes");
  if (params_.specular_spots < 0) throw ConfigError("specular spot count must be >= 0");
  std::mt19937_64 rng(mix_seed(params_.seed, 0xc0102));
  std::uniform_real_distribution<float> dark(-1.0f, -0.3f), bright(0.0f, 0.9f);
  for (int k = 0; k < params_.palette_count; ++k) {
    Palette p;
    for (int c = 0; c < 3; ++c) p.dark[c] = quantize_pixel(dark(rng));
    for (int c = 0; c < 3; ++c) p.bright[c] = quantize_pixel(bright(rng));
    p.specular = {1.0f, 1.0f, 1.0f};
    palettes_.push_back(p);
  }
}

std::string ColorLutOracle::name() const {
  return "oracle:color_lut:k=" + std::to_string(params_.palette_count) + ",spots=" +
         std::to_string(params_.specular_spots) + ",seed=" + std::to_string(params_.seed);
}

std::uint64_t ColorLutOracle::checksum() const {
  std::uint64_t h = params_.seed ^ 0xc1;
  for (const auto& p : palettes_) {
    for (int c = 0; c < 3; ++c) h = hash_doubles({p.dark[c], p.bright[c], p.specular[c]}, h);
  }
  return hash_doubles({static_cast<double>(params_.specular_spots)}, h);
}

int ColorLutOracle::palette_index(int t_index) const {
  std::mt19937_64 rng(mix_seed(params_.seed, static_cast<std::uint64_t>(t_index)));
  return std::uniform_int_distribution<int>(0, params_.palette_count - 1)(rng);
}

Frame ColorLutOracle::apply(const Frame& frame, const std::string&) const {
  const Palette& pal = palettes_[palette_index(frame.t_index)];
  const Eigen::ArrayXf lum01 = (frame.luminance() + 1.0f) * 0.5f;
  Frame out = Frame::filled(frame.height, frame.width, 3, frame.t_index, 0.0f);
  const Eigen::Index plane = frame.plane_size();
  for (int c = 0; c < 3; ++c) {
    out.pixels.segment(c * plane, plane) = pal.dark[c] + (pal.bright[c] - pal.dark[c]) * lum01;
  }
  // Specular spots move independently of the scene every frame.
  std::mt19937_64 rng(mix_seed(params_.seed ^ 0x5bec, static_cast<std::uint64_t>(frame.t_index)));
  std::uniform_real_distribution<double> cy(0, frame.height), cx(0, frame.width), radius(1.5, 4.0);
  for (int s = 0; s < params_.specular_spots; ++s) {
    const double y0 = cy(rng), x0 = cx(rng), r = radius(rng);
    for (int y = 0; y < frame.height; ++y) {
      for (int x = 0; x < frame.width; ++x) {
        if ((y - y0) * (y - y0) + (x - x0) * (x - x0) > r * r) continue;
        for (int c = 0; c < 3; ++c) out.at(c, y, x) = pal.specular[c];
      }
    }
  }
  out.pixels = out.pixels.unaryExpr([](float v) { return quantize_pixel(v); });
  return out;
}

std::vector<std::pair<std::string, int>> referenced_frames(const DatasetManifest& manifest) {
  std::set<std::pair<std::string, int>> unique;
  for (const auto& e : manifest.entries) {
    for (int t = e.triplets.first; t < e.triplets.end; t += e.triplets.stride) {
      for (int k = 0; k < 3; ++k) {
        if (t + k < e.frame_count) unique.emplace(e.sequence_id, t + k);
      }
    }
  }
  return {unique.begin(), unique.end()};
}

namespace {

void write_cache_index(const PrecomputeCache& cache, const fs::path& dir) {
  json j;
  j["model_name"] = cache.model_name;
  json entries = json::object();
  for (const auto& [key, file] : cache.index) entries[key.first].push_back(key.second);
  j["entries"] = entries;
  const fs::path tmp = dir / "cache.json.tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    out << j.dump(2) << "\n";
  }
  fs::rename(tmp, dir / "cache.json");
}

std::string cache_file(const std::string& sequence_id, int t) {
  return (fs::path(sequence_id) / frame_file_name(t)).string();
}

}  // namespace

PrecomputeCache precompute_outputs(const FrameModel& model, const DatasetManifest& manifest,
                                   const fs::path& manifest_root, const std::string& stream, const fs::path& out_dir) {
  PrecomputeCache cache;
  cache.root_path = out_dir.string();
  cache.model_name = model.name();
  fs::create_directories(out_dir);
  if (fs::exists(out_dir / "cache.json")) {
    const PrecomputeCache prior = load_cache_index(out_dir);
    if (prior.model_name != model.name()) {
      throw ConfigError("cache " + out_dir.string() + " was produced by '" + prior.model_name + "', not '" +
                        model.name() + "'");
    }
  }

  std::map<std::string, const ManifestEntry*> entry_of;
  for (const auto& e : manifest.entries) entry_of.emplace(e.sequence_id, &e);

  for (const auto& [sequence_id, t] : referenced_frames(manifest)) {
    const fs::path src = stream_dir(manifest_root, *entry_of.at(sequence_id), stream) / frame_file_name(t);
    const fs::path dst = out_dir / cache_file(sequence_id, t);
    cache.index[{sequence_id, t}] = cache_file(sequence_id, t);
    const Frame input = load_frame(src, t);
    if (fs::exists(dst)) {
      try {
        const Frame existing = load_frame(dst, t);
        if (existing.height == input.height && existing.width == input.width && existing.channels == 3) {
          ++cache.reused;
          continue;
        }
      } catch (const FormatError&) {
        // unreadable partial write; recompute below
      }
    }
    fs::create_directories(dst.parent_path());
    const fs::path tmp = dst.string() + ".tmp";
    save_frame(apply_frame_model(model, input, sequence_id), tmp);
    fs::rename(tmp, dst);
    ++cache.computed;
  }
  write_cache_index(cache, out_dir);

  // The outputs double as a Y-domain dataset: one entry per sequence over its leading run of frames.
  DatasetManifest outputs;
  outputs.root_path = ".";
  outputs.split = manifest.split;
  outputs.seed = manifest.seed;
  for (const auto& e : manifest.entries) {
    if (e.domain != Domain::X) continue;
    int n = 0;
    while (cache.index.count({e.sequence_id, n})) ++n;
    if (n == 0) continue;
    outputs.entries.push_back({e.sequence_id, e.sequence_id, Domain::Y, n, {0, std::max(n - 2, 0), 1}});
  }
  if (!outputs.entries.empty()) save_manifest(outputs, out_dir / "manifest.json");
  return cache;
}

PrecomputeCache load_cache_index(const fs::path& dir) {
  std::ifstream in(dir / "cache.json", std::ios::binary);
  if (!in) {
    throw PreconditionError("no precompute cache at " + dir.string() + "; run `rtgan precompute` first");
  }
  try {
    const json j = json::parse(in);
    PrecomputeCache cache;
    cache.root_path = dir.string();
    cache.model_name = j.at("model_name").get<std::string>();
    for (const auto& [sequence_id, ts] : j.at("entries").items()) {
      for (const auto& t : ts) cache.index[{sequence_id, t.get<int>()}] = cache_file(sequence_id, t.get<int>());
    }
    return cache;
  } catch (const json::exception& e) {
    throw FormatError("malformed cache index in " + dir.string() + ": " + e.what());
  }
}

CachedFrameModel::CachedFrameModel(const fs::path& dir) : cache_(load_cache_index(dir)) {}

std::uint64_t CachedFrameModel::checksum() const {
  std::uint64_t h = 0xcace;
  for (char c : cache_.model_name) h = splitmix64(h ^ static_cast<unsigned char>(c));
  return h;
}

Frame CachedFrameModel::apply(const Frame& frame, const std::string& sequence_id) const {
  auto it = cache_.index.find({sequence_id, frame.t_index});
  if (it == cache_.index.end()) {
    throw PreconditionError("cache " + cache_.root_path + " has no output for (" + sequence_id + ", " +
                            std::to_string(frame.t_index) + "); rerun `rtgan precompute` over this data");
  }
  return load_frame(fs::path(cache_.root_path) / it->second, frame.t_index);
}

std::unique_ptr<FrameModel> make_frame_model(const std::string& ref) {
  if (ref.rfind("cache:", 0) == 0) return std::make_unique<CachedFrameModel>(ref.substr(6));
  if (ref.rfind("oracle:", 0) != 0) {
    throw ConfigError("frame model reference must be oracle:<name> or cache:<dir>, got '" + ref + "'");
  }
  const std::string rest = ref.substr(7);
  const auto colon = rest.find(':');
  const std::string name = rest.substr(0, colon);
  auto opts = parse_options(colon == std::string::npos ? "" : rest.substr(colon + 1));
  std::unique_ptr<FrameModel> model;
  if (name == "identity") {
    model = std::make_unique<IdentityOracle>();
  } else if (name == "jitter") {
    JitterParams p;
    p.threshold = take_double(opts, "tau", p.threshold);
    p.amplitude = take_double(opts, "a", p.amplitude);
    p.seed = static_cast<std::uint64_t>(take_double(opts, "seed", 0));
    model = std::make_unique<JitterSegmentOracle>(p);
  } else if (name == "color_lut") {
    ColorLutParams p;
    p.palette_count = static_cast<int>(take_double(opts, "k", p.palette_count));
    p.specular_spots = static_cast<int>(take_double(opts, "spots", p.specular_spots));
    p.seed = static_cast<std::uint64_t>(take_double(opts, "seed", 0));
    model = std::make_unique<ColorLutOracle>(p);
  } else {
    throw ConfigError("unknown oracle '" + name + "' (known: identity, jitter, color_lut)");
  }
  if (!opts.empty()) throw ConfigError("unknown option '" + opts.begin()->first + "' for oracle " + name);
  return model;
}

}  // namespace rtgan

#include "rtgan/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

namespace rtgan {

using nlohmann::json;

std::size_t BinaryMask::count() const { return static_cast<std::size_t>(std::count(pixels.begin(), pixels.end(), 1)); }

BinaryMask mask_from_frame(const Frame& frame, float threshold, std::string source) {
  BinaryMask m;
  m.height = frame.height;
  m.width = frame.width;
  m.source = std::move(source);
  m.pixels.resize(static_cast<std::size_t>(frame.plane_size()));
  for (Eigen::Index i = 0; i < frame.plane_size(); ++i) m.pixels[i] = frame.pixels[i] > threshold ? 1 : 0;
  return m;
}

namespace {

struct Counts {
  std::size_t a = 0, b = 0, both = 0;
};

Counts overlap(const BinaryMask& a, const BinaryMask& b) {
  if (a.height != b.height || a.width != b.width || a.pixels.size() != b.pixels.size()) {
    throw ContractError("mask shapes differ: " + std::to_string(a.height) + "x" + std::to_string(a.width) + " vs " +
                        std::to_string(b.height) + "x" + std::to_string(b.width));
  }
  Counts c;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) {
    c.a += a.pixels[i];
    c.b += b.pixels[i];
    c.both += a.pixels[i] & b.pixels[i];
  }
  return c;
}

}  // namespace

double dice(const BinaryMask& a, const BinaryMask& b) {
  const Counts c = overlap(a, b);
  if (c.a + c.b == 0) return 1.0;
  return 2.0 * static_cast<double>(c.both) / static_cast<double>(c.a + c.b);
}

double iou(const BinaryMask& a, const BinaryMask& b) {
  const Counts c = overlap(a, b);
  const std::size_t uni = c.a + c.b - c.both;
  if (uni == 0) return 1.0;
  return static_cast<double>(c.both) / static_cast<double>(uni);
}

double cross_texture_consistency(const std::vector<BinaryMask>& tex1, const std::vector<BinaryMask>& tex2,
                                 OverlapMetric metric) {
  if (tex1.size() != tex2.size()) {
    throw ContractError("prediction sequences differ in length: " + std::to_string(tex1.size()) + " vs " +
                        std::to_string(tex2.size()));
  }
  if (tex1.empty()) throw ContractError("no predictions to compare");
  double s = 0;
  for (std::size_t t = 0; t < tex1.size(); ++t) s += metric == OverlapMetric::dice ? dice(tex1[t], tex2[t]) : iou(tex1[t], tex2[t]);
  return s / static_cast<double>(tex1.size());
}

FlowField estimate_flow(const Frame& f1, const Frame& f2, const BlockMatchOptions& opt) {
  if (!f1.same_shape(f2)) throw ContractError("flow estimation needs frames of the same shape");
  if (opt.block < 1 || opt.radius < 0) throw ConfigError("block must be >= 1 and radius >= 0");
  if (f1.height < opt.block || f1.width < opt.block) {
    throw ContractError("frames of " + std::to_string(f1.height) + "x" + std::to_string(f1.width) +
                        " are smaller than the " + std::to_string(opt.block) + "-pixel block");
  }
  const int h = f1.height, w = f1.width;
  const Eigen::ArrayXf a = f1.luminance(), b = f2.luminance();
  FlowField flow = FlowField::zeros(h, w);

  // Candidates sorted by displacement norm, then row-major, so the first strict minimum wins ties.
  std::vector<std::pair<int, int>> candidates;
  for (int dy = -opt.radius; dy <= opt.radius; ++dy) {
    for (int dx = -opt.radius; dx <= opt.radius; ++dx) candidates.emplace_back(dy, dx);
  }
  std::stable_sort(candidates.begin(), candidates.end(), [](const auto& p, const auto& q) {
    return p.first * p.first + p.second * p.second < q.first * q.first + q.second * q.second;
  });

  for (int by = 0; by < h; by += opt.block) {
    for (int bx = 0; bx < w; bx += opt.block) {
      const int y1 = std::min(by + opt.block, h), x1 = std::min(bx + opt.block, w);
      const int area = (y1 - by) * (x1 - bx);
      double best = std::numeric_limits<double>::infinity();
      std::pair<int, int> best_d{0, 0};
      for (const auto& [dy, dx] : candidates) {
        // Mean over the part of the displaced block that stays in frame; at least half must.
        double sad = 0;
        int n = 0;
        for (int y = by; y < y1; ++y) {
          const int ty = y + dy;
          if (ty < 0 || ty >= h) continue;
          for (int x = bx; x < x1; ++x) {
            const int tx = x + dx;
            if (tx < 0 || tx >= w) continue;
            sad += std::abs(static_cast<double>(a[y * w + x]) - b[ty * w + tx]);
            ++n;
          }
        }
        if (2 * n < area) continue;
        const double mean = sad / n;
        if (mean < best) {
          best = mean;
          best_d = {dy, dx};
        }
      }
      for (int y = by; y < y1; ++y) {
        for (int x = bx; x < x1; ++x) {
          flow.dx[y * w + x] = static_cast<float>(best_d.second);
          flow.dy[y * w + x] = static_cast<float>(best_d.first);
        }
      }
    }
  }
  return flow;
}

double flow_difference(const VideoSequence& x_seq, const VideoSequence& y_seq, FlowSource source,
                       const std::vector<FlowField>* gt_flow, const BlockMatchOptions& options) {
  if (x_seq.size() != y_seq.size()) {
    throw ContractError("sequence lengths differ: " + std::to_string(x_seq.size()) + " vs " +
                        std::to_string(y_seq.size()));
  }
  if (x_seq.size() < 2) throw ContractError("flow difference needs at least 2 frames");
  if (source == FlowSource::ground_truth && (!gt_flow || gt_flow->size() + 1 < x_seq.size())) {
    throw PreconditionError("ground-truth flow source selected but flow fields are missing");
  }
  double sum = 0;
  long long n = 0;
  for (std::size_t t = 0; t + 1 < x_seq.size(); ++t) {
    const FlowField fx = source == FlowSource::ground_truth ? (*gt_flow)[t] : estimate_flow(x_seq[t], x_seq[t + 1], options);
    const FlowField fy = estimate_flow(y_seq[t], y_seq[t + 1], options);
    if (fx.height != fy.height || fx.width != fy.width) throw ContractError("flow field shape mismatch");
    for (Eigen::Index i = 0; i < fx.size(); ++i) {
      if (std::isnan(fx.dx[i]) || std::isnan(fx.dy[i])) continue;
      sum += std::hypot(static_cast<double>(fx.dx[i]) - fy.dx[i], static_cast<double>(fx.dy[i]) - fy.dy[i]);
      ++n;
    }
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

double flicker(const VideoSequence& y_seq, const std::vector<FlowField>* flow) {
  if (y_seq.size() < 2) throw ContractError("flicker needs at least 2 frames");
  if (flow && flow->size() + 1 < y_seq.size()) throw ContractError("fewer flow fields than frame pairs");
  double sum = 0;
  int pairs = 0;
  for (std::size_t t = 1; t < y_seq.size(); ++t) {
    const Frame& cur = y_seq[t];
    if (!flow) {
      sum += (cur.pixels - y_seq[t - 1].pixels).abs().mean();
      ++pairs;
      continue;
    }
    const WarpResult warped = warp_forward(y_seq[t - 1], (*flow)[t - 1]);
    const Eigen::Index plane = cur.plane_size();
    double s = 0;
    long long n = 0;
    for (Eigen::Index i = 0; i < plane; ++i) {
      if (!warped.valid[i]) continue;
      for (int c = 0; c < cur.channels; ++c) s += std::abs(cur.pixels[c * plane + i] - warped.frame.pixels[c * plane + i]);
      n += cur.channels;
    }
    if (n == 0) continue;
    sum += s / static_cast<double>(n);
    ++pairs;
  }
  return pairs == 0 ? 0.0 : sum / pairs;
}

double l1_distance(const VideoSequence& a, const VideoSequence& b) {
  if (a.size() != b.size() || a.empty()) throw ContractError("l1 distance needs two non-empty sequences of equal length");
  double s = 0;
  for (std::size_t t = 0; t < a.size(); ++t) {
    if (!a[t].same_shape(b[t])) throw ContractError("frame shapes differ at t=" + std::to_string(t));
    s += (a[t].pixels - b[t].pixels).abs().cast<double>().mean();
  }
  return s / static_cast<double>(a.size());
}

void MetricsReport::finalize() {
  std::map<std::string, std::pair<double, int>> acc;
  for (const auto& [seq, metrics] : per_sequence) {
    for (const auto& [name, v] : metrics) {
      acc[name].first += v;
      acc[name].second += 1;
    }
  }
  aggregate.clear();
  for (const auto& [name, sn] : acc) aggregate[name] = sn.first / sn.second;
}

void write_report(const MetricsReport& report, const fs::path& file) {
  if (report.per_sequence.empty()) throw ContractError("nothing to report");
  MetricsReport r = report;
  r.finalize();
  json j;
  j["aggregate"] = r.aggregate;
  j["config"] = r.config;
  j["dataset_hash"] = r.dataset_hash;
  j["dataset_ids"] = r.dataset_ids;
  j["sequences"] = r.per_sequence;
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::trunc);
  if (!out) throw NotFoundError("cannot write report " + file.string());
  out << j.dump(2) << "\n";
}

MetricsReport read_report(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw NotFoundError("report not found: " + file.string());
  MetricsReport r;
  try {
    const json j = json::parse(in);
    r.aggregate = j.at("aggregate").get<std::map<std::string, double>>();
    r.config = j.at("config").get<std::string>();
    r.dataset_hash = j.at("dataset_hash").get<std::string>();
    r.dataset_ids = j.at("dataset_ids").get<std::vector<std::string>>();
    r.per_sequence = j.at("sequences").get<std::map<std::string, std::map<std::string, double>>>();
  } catch (const json::exception& e) {
    throw FormatError("malformed report " + file.string() + ": " + e.what());
  }
  MetricsReport check = r;
  check.finalize();
  if (check.aggregate.size() != r.aggregate.size()) throw FormatError("report aggregates do not match its sequences");
  for (const auto& [name, v] : check.aggregate) {
    auto it = r.aggregate.find(name);
    if (it == r.aggregate.end() || std::abs(it->second - v) > 1e-12 * std::max(1.0, std::abs(v))) {
      throw FormatError("aggregate '" + name + "' is not the mean of its per-sequence values");
    }
  }
  return r;
}

namespace {

std::string sha1_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(data.data(), data.size(), md, &len, EVP_sha1(), nullptr);
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", md[i]);
    hex += buf;
  }
  return hex;
}

}  // namespace

std::string dataset_hash(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw NotFoundError("dataset directory not found: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files.push_back(fs::relative(e.path(), dir));
  }
  std::sort(files.begin(), files.end());
  std::string listing;
  for (const auto& rel : files) {
    std::ifstream in(dir / rel, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string content = ss.str();
    listing += sha1_hex("blob " + std::to_string(content.size()) + std::string(1, '\0') + content) + " " +
               rel.generic_string() + "\n";
  }
  return sha1_hex(listing);
}

}  // namespace rtgan

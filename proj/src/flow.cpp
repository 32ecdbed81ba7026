#include "rtgan/flow.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

namespace rtgan {

static_assert(std::endian::native == std::endian::little, "flow files assume a little-endian host");

FlowField FlowField::zeros(int height, int width) { return constant(height, width, 0.0f, 0.0f); }

FlowField FlowField::constant(int height, int width, float dx, float dy) {
  FlowField f;
  f.height = height;
  f.width = width;
  f.dx = Eigen::ArrayXf::Constant(f.size(), dx);
  f.dy = Eigen::ArrayXf::Constant(f.size(), dy);
  return f;
}

bool FlowField::operator==(const FlowField& o) const {
  if (height != o.height || width != o.width) return false;
  return std::memcmp(dx.data(), o.dx.data(), sizeof(float) * dx.size()) == 0 &&
         std::memcmp(dy.data(), o.dy.data(), sizeof(float) * dy.size()) == 0;
}

std::string flow_file_name(int t_index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "flow_%06d.bin", t_index);
  return buf;
}

void write_flow(const FlowField& flow, const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw NotFoundError("cannot write flow file " + file.string());
  const std::uint16_t h = static_cast<std::uint16_t>(flow.height), w = static_cast<std::uint16_t>(flow.width);
  out.write("RTFL", 4);
  out.write(reinterpret_cast<const char*>(&h), 2);
  out.write(reinterpret_cast<const char*>(&w), 2);
  std::vector<float> interleaved(static_cast<std::size_t>(flow.size()) * 2);
  for (Eigen::Index i = 0; i < flow.size(); ++i) {
    interleaved[2 * i] = flow.dx[i];
    interleaved[2 * i + 1] = flow.dy[i];
  }
  out.write(reinterpret_cast<const char*>(interleaved.data()), static_cast<std::streamsize>(interleaved.size() * 4));
}

FlowField read_flow(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw NotFoundError("flow file not found: " + file.string());
  std::array<char, 4> magic{};
  std::uint16_t h = 0, w = 0;
  in.read(magic.data(), 4);
  in.read(reinterpret_cast<char*>(&h), 2);
  in.read(reinterpret_cast<char*>(&w), 2);
  if (!in || std::memcmp(magic.data(), "RTFL", 4) != 0) throw FormatError("bad flow header in " + file.string());
  FlowField f = FlowField::zeros(h, w);
  std::vector<float> interleaved(static_cast<std::size_t>(f.size()) * 2);
  in.read(reinterpret_cast<char*>(interleaved.data()), static_cast<std::streamsize>(interleaved.size() * 4));
  if (!in) throw FormatError("truncated flow file " + file.string());
  for (Eigen::Index i = 0; i < f.size(); ++i) {
    f.dx[i] = interleaved[2 * i];
    f.dy[i] = interleaved[2 * i + 1];
  }
  return f;
}

namespace {

struct Bilinear {
  int x0, y0;
  float fx, fy;
};

// Bilinear footprint of a sample at continuous pixel-center coordinates (x, y).
bool footprint(float x, float y, int width, int height, Bilinear& b) {
  if (!(x >= 0.0f && y >= 0.0f && x <= static_cast<float>(width - 1) && y <= static_cast<float>(height - 1))) {
    return false;
  }
  b.x0 = std::min(static_cast<int>(x), width - 2);
  b.y0 = std::min(static_cast<int>(y), height - 2);
  b.fx = x - static_cast<float>(b.x0);
  b.fy = y - static_cast<float>(b.y0);
  return true;
}

float sample(const float* plane, int width, const Bilinear& b) {
  const float* r0 = plane + static_cast<std::ptrdiff_t>(b.y0) * width + b.x0;
  const float* r1 = r0 + width;
  return (1 - b.fy) * ((1 - b.fx) * r0[0] + b.fx * r0[1]) + b.fy * ((1 - b.fx) * r1[0] + b.fx * r1[1]);
}

}  // namespace

WarpResult warp_forward(const Frame& src, const FlowField& flow) {
  if (flow.height != src.height || flow.width != src.width) throw ContractError("flow and frame differ in size");
  WarpResult out;
  out.frame = Frame::filled(src.height, src.width, src.channels, src.t_index + 1, 0.0f);
  out.valid = Eigen::Array<bool, Eigen::Dynamic, 1>::Constant(src.plane_size(), false);
  const int w = src.width, h = src.height;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const Eigen::Index p = static_cast<Eigen::Index>(y) * w + x;
      if (!std::isfinite(flow.dx[p])) continue;
      float qx = static_cast<float>(x) - flow.dx[p];
      float qy = static_cast<float>(y) - flow.dy[p];
      Bilinear b{};
      bool ok = true;
      for (int iter = 0; iter < 8 && ok; ++iter) {
        ok = footprint(qx, qy, w, h, b);
        if (!ok) break;
        const float fdx = sample(flow.dx.data(), w, b), fdy = sample(flow.dy.data(), w, b);
        if (!std::isfinite(fdx) || !std::isfinite(fdy)) {
          ok = false;
          break;
        }
        qx = static_cast<float>(x) - fdx;
        qy = static_cast<float>(y) - fdy;
      }
      if (!ok || !footprint(qx, qy, w, h, b)) continue;
      if (!std::isfinite(sample(flow.dx.data(), w, b))) continue;
      for (int c = 0; c < src.channels; ++c) {
        out.frame.pixels[c * src.plane_size() + p] = sample(src.pixels.data() + c * src.plane_size(), w, b);
      }
      out.valid[p] = true;
    }
  }
  return out;
}

}  // namespace rtgan

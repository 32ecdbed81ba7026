#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace rtgan {

// Interleaved 8-bit image, 1 (gray) or 3 (RGB) channels.
struct Image8 {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<std::uint8_t> data;
};

Image8 read_png(const std::filesystem::path& file);
void write_png(const Image8& image, const std::filesystem::path& file);

}  // namespace rtgan

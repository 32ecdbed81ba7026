#include "rtgan/image_io.hpp"

#include <png.h>

#include <cstring>

#include "rtgan/error.hpp"

namespace rtgan {

Image8 read_png(const std::filesystem::path& file) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, file.c_str())) {
    throw FormatError("cannot read PNG " + file.string() + ": " + image.message);
  }
  Image8 out;
  const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
  image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  out.width = static_cast<int>(image.width);
  out.height = static_cast<int>(image.height);
  out.channels = color ? 3 : 1;
  out.data.resize(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, out.data.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw FormatError("cannot decode PNG " + file.string() + ": " + msg);
  }
  return out;
}

void write_png(const Image8& img, const std::filesystem::path& file) {
  if (img.channels != 1 && img.channels != 3) throw FormatError("PNG writer supports 1 or 3 channels");
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width);
  image.height = static_cast<png_uint_32>(img.height);
  image.format = img.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&image, file.c_str(), 0, img.data.data(), 0, nullptr)) {
    throw FormatError("cannot write PNG " + file.string() + ": " + image.message);
  }
}

}  // namespace rtgan

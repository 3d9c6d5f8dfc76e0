#pragma once

#include <cassert>
#include <cstddef>
#include <filesystem>
#include <vector>

namespace sdstex {

// Row-major, channel-interleaved image of doubles. Row 0 is the top row.
struct Image {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<double> data;

  Image() = default;
  Image(int w, int h, int c, double fill = 0.0)
      : width(w), height(h), channels(c),
        data(static_cast<std::size_t>(w) * h * c, fill) {}

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
  std::size_t size() const { return data.size(); }

  double& at(int x, int y, int c) {
    assert(x >= 0 && x < width && y >= 0 && y < height && c >= 0 && c < channels);
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  double at(int x, int y, int c) const {
    assert(x >= 0 && x < width && y >= 0 && y < height && c >= 0 && c < channels);
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }

  bool same_shape(const Image& o) const {
    return width == o.width && height == o.height && channels == o.channels;
  }
};

// 8-bit PNG I/O. Values are clamped to [0,1] and rounded on write.
void write_png(const std::filesystem::path& path, const Image& image);
// Writes a [-1,1] depth map as grayscale with -1 -> 0 and +1 -> 255.
void write_depth_png(const std::filesystem::path& path, const Image& depth);
// Reads RGB(A)/gray PNGs into a 3-channel image in [0,1].
Image read_png(const std::filesystem::path& path);

}  // namespace sdstex

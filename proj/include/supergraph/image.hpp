#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace supergraph {

/// 8-bit raster, interleaved row-major samples; 1 (gray) or 3 (RGB) channels.
struct Image {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<std::uint8_t> data;

  std::uint8_t at(int y, int x, int c = 0) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  std::uint8_t& at(int y, int x, int c = 0) {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
};

/// Decodes binary PPM (P6) or PGM (P5) with maxval 255. P5 yields channels=1.
/// Throws std::runtime_error on malformed header, truncated payload or
/// unsupported maxval.
Image load_ppm(const std::string& path);

/// Writes P6 (3 channels) or P5 (1 channel), maxval 255.
void write_ppm(const Image& img, const std::string& path);

/// 16-bit label raster: P5 with maxval 65535, big-endian samples. Labels must
/// fit in 16 bits.
void write_pgm16(const std::vector<int>& labels, int width, int height, const std::string& path);
std::vector<int> load_pgm16(const std::string& path, int& width, int& height);

/// Colors each label deterministically from the palette seed and darkens
/// pixels whose 4-neighborhood crosses a label boundary.
Image render_labels(const std::vector<int>& labels, int width, int height, std::uint64_t palette_seed);

}  // namespace supergraph

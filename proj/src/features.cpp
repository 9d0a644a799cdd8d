#include "supergraph/features.hpp"

#include <cmath>
#include <stdexcept>

#include "supergraph/parallel.hpp"

namespace supergraph {

namespace {

Scalar srgb_linearize(std::uint8_t v) {
  const Scalar c = v / Scalar(255);
  return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
}

Scalar lab_f(Scalar t) {
  constexpr Scalar cube = (6.0 / 29) * (6.0 / 29) * (6.0 / 29);
  return t > cube ? std::cbrt(t) : t / (3 * (6.0 / 29) * (6.0 / 29)) + 4.0 / 29;
}

void fill_positions(PixelFeatureMap& fm) {
  for (int y = 0; y < fm.height; ++y)
    for (int x = 0; x < fm.width; ++x) {
      fm.data(fm.pixel_index(y, x), fm.dim - 2) = y * fm.pos_scale;
      fm.data(fm.pixel_index(y, x), fm.dim - 1) = x * fm.pos_scale;
    }
}

// Symmetric reflection (edge sample duplicated) for out-of-range indices.
int reflect(int i, int n) {
  while (i < 0 || i >= n) {
    if (i < 0) i = -1 - i;
    if (i >= n) i = 2 * n - 1 - i;
  }
  return i;
}

}  // namespace

Scalar default_pos_scale(int width, int height, int n_superpixels, Scalar m) {
  return m / std::sqrt(static_cast<Scalar>(width) * height / n_superpixels);
}

std::array<Scalar, 3> srgb_to_lab(std::uint8_t r8, std::uint8_t g8, std::uint8_t b8) {
  const Scalar r = srgb_linearize(r8), g = srgb_linearize(g8), b = srgb_linearize(b8);
  // sRGB -> XYZ, D65 white.
  const Scalar x = 0.4124564 * r + 0.3575761 * g + 0.1804375 * b;
  const Scalar y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
  const Scalar z = 0.0193339 * r + 0.1191920 * g + 0.9503041 * b;
  const Scalar fx = lab_f(x / 0.95047), fy = lab_f(y), fz = lab_f(z / 1.08883);
  return {116 * fy - 16, 500 * (fx - fy), 200 * (fy - fz)};
}

PixelFeatureMap to_lab(const Image& img, Scalar pos_scale) {
  if (img.channels != 3)
    throw std::invalid_argument("to_lab: RGB input required (use to_gray_features)");
  PixelFeatureMap fm;
  fm.width = img.width;
  fm.height = img.height;
  fm.dim = 5;
  fm.pos_scale = pos_scale;
  fm.data.resize(static_cast<Index>(img.width) * img.height, fm.dim);
  parallel_for(img.height, [&](std::int64_t y0, std::int64_t y1) {
    for (int y = static_cast<int>(y0); y < y1; ++y)
      for (int x = 0; x < img.width; ++x) {
        const auto lab = srgb_to_lab(img.at(y, x, 0), img.at(y, x, 1), img.at(y, x, 2));
        fm.data(fm.pixel_index(y, x), 0) = lab[0];
        fm.data(fm.pixel_index(y, x), 1) = lab[1];
        fm.data(fm.pixel_index(y, x), 2) = lab[2];
      }
  });
  fill_positions(fm);
  return fm;
}

PixelFeatureMap to_gray_features(const Image& img, Scalar pos_scale) {
  if (img.channels != 1) throw std::invalid_argument("to_gray_features: grayscale input required");
  PixelFeatureMap fm;
  fm.width = img.width;
  fm.height = img.height;
  fm.dim = 3;
  fm.pos_scale = pos_scale;
  fm.data.resize(static_cast<Index>(img.width) * img.height, fm.dim);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      fm.data(fm.pixel_index(y, x), 0) = 116 * lab_f(srgb_linearize(img.at(y, x))) - 16;
  fill_positions(fm);
  return fm;
}

PixelFeatureMap filter_bank_features(const Image& img, const std::vector<Mat>& kernels,
                                     Scalar pos_scale) {
  for (const Mat& k : kernels)
    if (k.rows() > img.height || k.cols() > img.width)
      throw std::invalid_argument("filter_bank_features: kernel larger than image");

  const PixelFeatureMap base =
      img.channels == 3 ? to_lab(img, pos_scale) : to_gray_features(img, pos_scale);
  const int base_dim = base.feature_dim();

  PixelFeatureMap fm;
  fm.width = img.width;
  fm.height = img.height;
  fm.dim = base_dim + static_cast<int>(kernels.size()) + 2;
  fm.pos_scale = pos_scale;
  fm.data.resize(base.data.rows(), fm.dim);
  fm.data.leftCols(base_dim) = base.data.leftCols(base_dim);

  // Convolve the L* channel (column 0 of the base features).
  for (std::size_t ki = 0; ki < kernels.size(); ++ki) {
    const Mat& ker = kernels[ki];
    const int kh = static_cast<int>(ker.rows()), kw = static_cast<int>(ker.cols());
    const int cy = kh / 2, cx = kw / 2;
    const int col = base_dim + static_cast<int>(ki);
    parallel_for(img.height, [&](std::int64_t y0, std::int64_t y1) {
      for (int y = static_cast<int>(y0); y < y1; ++y)
        for (int x = 0; x < img.width; ++x) {
          // Center-relative samples: identical to plain convolution for
          // zero-sum stencils, and exactly zero on constant inputs.
          const Scalar center = base.data(base.pixel_index(y, x), 0);
          Scalar acc = 0;
          for (int dy = 0; dy < kh; ++dy)
            for (int dx = 0; dx < kw; ++dx) {
              const int sy = reflect(y + dy - cy, img.height);
              const int sx = reflect(x + dx - cx, img.width);
              acc += ker(dy, dx) * (base.data(base.pixel_index(sy, sx), 0) - center);
            }
          fm.data(fm.pixel_index(y, x), col) = acc;
        }
    });
  }
  fill_positions(fm);
  return fm;
}

std::vector<Mat> sobel_kernels() {
  // Gain-normalized (1/8) so responses stay commensurate with L* units.
  Mat gx(3, 3), gy(3, 3);
  gx << -1, 0, 1, -2, 0, 2, -1, 0, 1;
  gy << -1, -2, -1, 0, 0, 0, 1, 2, 1;
  return {gx / 8, gy / 8};
}

}  // namespace supergraph

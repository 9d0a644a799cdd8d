#pragma once

#include <array>
#include <vector>

#include "supergraph/image.hpp"
#include "supergraph/types.hpp"

namespace supergraph {

/// Per-pixel feature vectors: D appearance dims followed by the two scaled
/// positional dims (row * pos_scale, col * pos_scale). Pixel (y, x) lives at
/// matrix row y * width + x.
struct PixelFeatureMap {
  int width = 0;
  int height = 0;
  int dim = 0;  // D + 2
  Scalar pos_scale = 1;
  Mat data;  // (height * width) x dim

  int feature_dim() const { return dim - 2; }
  Index pixel_index(int y, int x) const { return static_cast<Index>(y) * width + x; }
  auto pixel(int y, int x) const { return data.row(pixel_index(y, x)); }
  auto appearance(int y, int x) const { return data.row(pixel_index(y, x)).head(dim - 2); }
  auto position(int y, int x) const { return data.row(pixel_index(y, x)).tail(2); }
};

/// SLIC-style compactness weight: m / sqrt(H*W / N) for N superpixels.
Scalar default_pos_scale(int width, int height, int n_superpixels, Scalar m = 10);

std::array<Scalar, 3> srgb_to_lab(std::uint8_t r, std::uint8_t g, std::uint8_t b);

/// CIELAB(L*, a*, b*) under D65 plus scaled positions; D = 3. RGB input only.
PixelFeatureMap to_lab(const Image& img, Scalar pos_scale);

/// L* of a grayscale image plus scaled positions; D = 1.
PixelFeatureMap to_gray_features(const Image& img, Scalar pos_scale);

/// Lab (or gray) channels plus one stencil response per kernel, computed on
/// L* over center-relative samples with reflected borders (equal to plain
/// convolution for zero-sum stencils, exactly zero on constant images).
/// D = base + |kernels|.
PixelFeatureMap filter_bank_features(const Image& img, const std::vector<Mat>& kernels,
                                     Scalar pos_scale);

/// Horizontal and vertical 3x3 Sobel stencils, the default filter bank.
std::vector<Mat> sobel_kernels();

}  // namespace supergraph

#pragma once

#include "supergraph/image.hpp"
#include "supergraph/rng.hpp"
#include "supergraph/superpixel.hpp"

namespace supergraph {

/// Synthetic inputs shared by the self-check suites and the tests.

inline Image constant_image(int width, int height, std::uint8_t r, std::uint8_t g,
                            std::uint8_t b) {
  Image img;
  img.width = width;
  img.height = height;
  img.channels = 3;
  img.data.resize(static_cast<std::size_t>(width) * height * 3);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      img.at(y, x, 0) = r;
      img.at(y, x, 1) = g;
      img.at(y, x, 2) = b;
    }
  return img;
}

/// Left half black, right half white.
inline Image two_tone_image(int width, int height) {
  Image img = constant_image(width, height, 0, 0, 0);
  for (int y = 0; y < height; ++y)
    for (int x = width / 2; x < width; ++x)
      for (int c = 0; c < 3; ++c) img.at(y, x, c) = 255;
  return img;
}

/// Smooth diagonal luminance ramp.
inline Image ramp_image(int width, int height) {
  Image img;
  img.width = width;
  img.height = height;
  img.channels = 3;
  img.data.resize(static_cast<std::size_t>(width) * height * 3);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const int v = static_cast<int>(255.0 * (x + y) / (width + height - 2));
      for (int c = 0; c < 3; ++c) img.at(y, x, c) = static_cast<std::uint8_t>(v);
    }
  return img;
}

inline Image random_image(Rng& rng, int width, int height, int channels = 3) {
  Image img;
  img.width = width;
  img.height = height;
  img.channels = channels;
  img.data.resize(static_cast<std::size_t>(width) * height * channels);
  for (auto& v : img.data) v = static_cast<std::uint8_t>(rng.next_below(256));
  return img;
}

/// Random pixel features with the positional dims filled consistently.
inline PixelFeatureMap random_feature_map(Rng& rng, int width, int height, int appearance_dim,
                                          Scalar pos_scale = 1) {
  PixelFeatureMap fm;
  fm.width = width;
  fm.height = height;
  fm.dim = appearance_dim + 2;
  fm.pos_scale = pos_scale;
  fm.data.resize(static_cast<Index>(width) * height, fm.dim);
  for (Index p = 0; p < fm.data.rows(); ++p)
    for (int c = 0; c < appearance_dim; ++c) fm.data(p, c) = rng.next_uniform(-1, 1);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      fm.data(fm.pixel_index(y, x), fm.dim - 2) = y * pos_scale;
      fm.data(fm.pixel_index(y, x), fm.dim - 1) = x * pos_scale;
    }
  return fm;
}

/// Random soft association: positive rows over the in-bounds candidates,
/// normalized to 1; out-of-bounds slots exactly 0.
inline SoftAssociation random_association(Rng& rng, int width, int height, int grid_w,
                                          int grid_h) {
  SoftAssociation q;
  q.width = width;
  q.height = height;
  q.grid_w = grid_w;
  q.grid_h = grid_h;
  q.probs = Mat::Zero(static_cast<Index>(width) * height, 9);
  q.cell_of.resize(static_cast<std::size_t>(width) * height);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const Index p = q.pixel_index(y, x);
      const int gy = static_cast<int>(static_cast<std::int64_t>(y) * grid_h / height);
      const int gx = static_cast<int>(static_cast<std::int64_t>(x) * grid_w / width);
      q.cell_of[p] = gy * grid_w + gx;
      Scalar total = 0;
      for (int c = 0; c < 9; ++c) {
        if (q.candidate_cell(p, c) < 0) continue;
        q.probs(p, c) = 0.05 + rng.next_unit();
        total += q.probs(p, c);
      }
      q.probs.row(p) /= total;
    }
  return q;
}

}  // namespace supergraph

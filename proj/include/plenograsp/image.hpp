#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace plenograsp {

// Dense float image, interleaved channels, row-major. Color images hold
// linear RGB in [0, 1]; gradient images hold two channels (d/dx, d/dy of
// luminance).
struct Image {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<float> data;

  Image() = default;
  Image(int w, int h, int c) : width(w), height(h), channels(c), data(size_t(w) * h * c, 0.0f) {}

  float* at(int x, int y) { return data.data() + (size_t(y) * width + x) * channels; }
  const float* at(int x, int y) const {
    return data.data() + (size_t(y) * width + x) * channels;
  }
  bool empty() const { return data.empty(); }
};

// Quantize a channel value to the 8-bit lattice {k/255}. Rendered images are
// snapped through this so that an in-memory image and its PNG round trip are
// bit-identical.
inline float quantize8(float v) {
  v = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
  const int k = int(v * 255.0f + 0.5f);
  return float(k) / 255.0f;
}

// (r+g+b)/3 luminance.
inline float luminance(const float* rgb) {
  return (rgb[0] + rgb[1] + rgb[2]) / 3.0f;
}

// Central-difference luminance gradients with clamped borders.
Image luminance_gradient(const Image& rgb);

// True when (x, y) lies in the bilinear-interpolable domain [0, w-1] x [0, h-1].
inline bool in_sample_domain(const Image& img, double x, double y) {
  return x >= 0.0 && y >= 0.0 && x <= double(img.width - 1) && y <= double(img.height - 1);
}

// Bilinear sample of every channel at (x, y); caller guarantees the point is
// inside the sample domain. Writes `channels` doubles.
inline void sample_bilinear(const Image& img, double x, double y, double* out) {
  int x0 = int(x);
  int y0 = int(y);
  if (x0 > img.width - 2) x0 = img.width - 2;
  if (y0 > img.height - 2) y0 = img.height - 2;
  if (x0 < 0) x0 = 0;
  if (y0 < 0) y0 = 0;
  const double fx = x - x0;
  const double fy = y - y0;
  const double w00 = (1.0 - fx) * (1.0 - fy);
  const double w10 = fx * (1.0 - fy);
  const double w01 = (1.0 - fx) * fy;
  const double w11 = fx * fy;
  const float* p00 = img.at(x0, y0);
  const float* p10 = img.at(x0 + 1, y0);
  const float* p01 = img.at(x0, y0 + 1);
  const float* p11 = img.at(x0 + 1, y0 + 1);
  for (int c = 0; c < img.channels; ++c) {
    out[c] = w00 * p00[c] + w10 * p10[c] + w01 * p01[c] + w11 * p11[c];
  }
}

// Bilinear resize with half-pixel-centered mapping; for equal sizes the
// output is bit-identical to the input.
Image resize_bilinear(const Image& src, int out_w, int out_h);

}  // namespace plenograsp

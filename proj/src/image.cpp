#include "plenograsp/image.hpp"

namespace plenograsp {

Image luminance_gradient(const Image& rgb) {
  Image g(rgb.width, rgb.height, 2);
  const int w = rgb.width;
  const int h = rgb.height;
  auto lum = [&](int x, int y) { return luminance(rgb.at(x, y)); };
  for (int y = 0; y < h; ++y) {
    const int ym = y > 0 ? y - 1 : 0;
    const int yp = y < h - 1 ? y + 1 : h - 1;
    for (int x = 0; x < w; ++x) {
      const int xm = x > 0 ? x - 1 : 0;
      const int xp = x < w - 1 ? x + 1 : w - 1;
      float* out = g.at(x, y);
      out[0] = (lum(xp, y) - lum(xm, y)) * 0.5f;
      out[1] = (lum(x, yp) - lum(x, ym)) * 0.5f;
    }
  }
  return g;
}

Image resize_bilinear(const Image& src, int out_w, int out_h) {
  if (out_w == src.width && out_h == src.height) return src;
  Image dst(out_w, out_h, src.channels);
  const double sx = double(src.width) / out_w;
  const double sy = double(src.height) / out_h;
  for (int y = 0; y < out_h; ++y) {
    double fy = (y + 0.5) * sy - 0.5;
    if (fy < 0.0) fy = 0.0;
    if (fy > src.height - 1) fy = src.height - 1;
    int y0 = int(fy);
    int y1 = y0 + 1 < src.height ? y0 + 1 : y0;
    const double wy = fy - y0;
    for (int x = 0; x < out_w; ++x) {
      double fx = (x + 0.5) * sx - 0.5;
      if (fx < 0.0) fx = 0.0;
      if (fx > src.width - 1) fx = src.width - 1;
      int x0 = int(fx);
      int x1 = x0 + 1 < src.width ? x0 + 1 : x0;
      const double wx = fx - x0;
      const float* p00 = src.at(x0, y0);
      const float* p10 = src.at(x1, y0);
      const float* p01 = src.at(x0, y1);
      const float* p11 = src.at(x1, y1);
      float* out = dst.at(x, y);
      for (int c = 0; c < src.channels; ++c) {
        const double top = (1.0 - wx) * p00[c] + wx * p10[c];
        const double bot = (1.0 - wx) * p01[c] + wx * p11[c];
        out[c] = float((1.0 - wy) * top + wy * bot);
      }
    }
  }
  return dst;
}

}  // namespace plenograsp

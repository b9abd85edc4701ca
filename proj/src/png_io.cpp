#include "plenograsp/png_io.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>

#include "plenograsp/errors.hpp"

namespace plenograsp {
namespace {

constexpr unsigned char kSignature[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

void put_u32(std::vector<unsigned char>& out, uint32_t v) {
  out.push_back((v >> 24) & 0xff);
  out.push_back((v >> 16) & 0xff);
  out.push_back((v >> 8) & 0xff);
  out.push_back(v & 0xff);
}

uint32_t get_u32(const unsigned char* p) {
  return (uint32_t(p[0]) << 24) | (uint32_t(p[1]) << 16) | (uint32_t(p[2]) << 8) | uint32_t(p[3]);
}

void append_chunk(std::vector<unsigned char>& out, const char type[4],
                  const unsigned char* payload, size_t size) {
  put_u32(out, uint32_t(size));
  const size_t start = out.size();
  out.insert(out.end(), type, type + 4);
  if (size > 0) out.insert(out.end(), payload, payload + size);
  const uint32_t crc =
      uint32_t(crc32(0, out.data() + start, uInt(out.size() - start)));
  put_u32(out, crc);
}

std::vector<unsigned char> zlib_compress(const std::vector<unsigned char>& raw) {
  uLongf bound = compressBound(uLong(raw.size()));
  std::vector<unsigned char> out(bound);
  if (compress2(out.data(), &bound, raw.data(), uLong(raw.size()), 6) != Z_OK) {
    throw ComputeError("png: zlib compression failed");
  }
  out.resize(bound);
  return out;
}

std::vector<unsigned char> zlib_decompress(const std::vector<unsigned char>& comp,
                                           size_t expected) {
  std::vector<unsigned char> out(expected);
  uLongf size = uLongf(expected);
  const int rc = uncompress(out.data(), &size, comp.data(), uLong(comp.size()));
  if (rc != Z_OK || size != expected) {
    throw ValidationError("png: corrupt compressed stream");
  }
  return out;
}

int paeth(int a, int b, int c) {
  const int p = a + b - c;
  const int pa = std::abs(p - a);
  const int pb = std::abs(p - b);
  const int pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

}  // namespace

void write_png(const std::filesystem::path& path, const Image& img) {
  if (img.channels != 1 && img.channels != 3) {
    throw ValidationError("png: only 1- or 3-channel images are written");
  }
  const int w = img.width, h = img.height, ch = img.channels;
  std::vector<unsigned char> raw;
  raw.reserve(size_t(h) * (size_t(w) * ch + 1));
  for (int y = 0; y < h; ++y) {
    raw.push_back(0);  // filter: none
    const float* row = img.at(0, y);
    for (int i = 0; i < w * ch; ++i) {
      float v = row[i];
      v = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
      raw.push_back((unsigned char)(int(v * 255.0f + 0.5f)));
    }
  }
  const auto compressed = zlib_compress(raw);

  std::vector<unsigned char> out;
  out.insert(out.end(), kSignature, kSignature + 8);
  unsigned char ihdr[13];
  ihdr[0] = (w >> 24) & 0xff;
  ihdr[1] = (w >> 16) & 0xff;
  ihdr[2] = (w >> 8) & 0xff;
  ihdr[3] = w & 0xff;
  ihdr[4] = (h >> 24) & 0xff;
  ihdr[5] = (h >> 16) & 0xff;
  ihdr[6] = (h >> 8) & 0xff;
  ihdr[7] = h & 0xff;
  ihdr[8] = 8;                          // bit depth
  ihdr[9] = ch == 3 ? 2 : 0;            // color type
  ihdr[10] = ihdr[11] = ihdr[12] = 0;   // compression, filter, interlace
  append_chunk(out, "IHDR", ihdr, sizeof(ihdr));
  append_chunk(out, "IDAT", compressed.data(), compressed.size());
  append_chunk(out, "IEND", nullptr, 0);

  std::ofstream f(path, std::ios::binary);
  if (!f) throw ValidationError("png: cannot open for writing: " + path.string());
  f.write(reinterpret_cast<const char*>(out.data()), std::streamsize(out.size()));
  if (!f) throw ComputeError("png: short write: " + path.string());
}

Image read_png(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ValidationError("png: cannot open: " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kSignature, 8) != 0) {
    throw ValidationError("png: bad signature: " + path.string());
  }

  int w = 0, h = 0, bit_depth = 0, color_type = 0;
  std::vector<unsigned char> idat;
  size_t pos = 8;
  bool saw_end = false;
  while (pos + 8 <= bytes.size()) {
    const uint32_t len = get_u32(&bytes[pos]);
    if (pos + 12 + len > bytes.size()) throw ValidationError("png: truncated chunk");
    const char* type = reinterpret_cast<const char*>(&bytes[pos + 4]);
    const unsigned char* payload = &bytes[pos + 8];
    if (std::memcmp(type, "IHDR", 4) == 0) {
      if (len != 13) throw ValidationError("png: bad IHDR");
      w = int(get_u32(payload));
      h = int(get_u32(payload + 4));
      bit_depth = payload[8];
      color_type = payload[9];
      if (payload[12] != 0) throw ValidationError("png: interlaced files unsupported");
    } else if (std::memcmp(type, "IDAT", 4) == 0) {
      idat.insert(idat.end(), payload, payload + len);
    } else if (std::memcmp(type, "IEND", 4) == 0) {
      saw_end = true;
      break;
    }
    pos += 12 + len;
  }
  if (!saw_end) throw ValidationError("png: missing IEND: " + path.string());
  if (w <= 0 || h <= 0) throw ValidationError("png: bad dimensions");
  if (bit_depth != 8) throw ValidationError("png: only 8-bit depth supported");
  int src_ch = 0;
  switch (color_type) {
    case 0: src_ch = 1; break;
    case 2: src_ch = 3; break;
    case 6: src_ch = 4; break;
    default: throw ValidationError("png: unsupported color type");
  }

  const size_t stride = size_t(w) * src_ch;
  auto raw = zlib_decompress(idat, size_t(h) * (stride + 1));

  // Undo per-row filters in place (into `pix`).
  std::vector<unsigned char> pix(size_t(h) * stride);
  for (int y = 0; y < h; ++y) {
    const unsigned char filter = raw[size_t(y) * (stride + 1)];
    const unsigned char* src = &raw[size_t(y) * (stride + 1) + 1];
    unsigned char* dst = &pix[size_t(y) * stride];
    const unsigned char* up = y > 0 ? &pix[size_t(y - 1) * stride] : nullptr;
    for (size_t i = 0; i < stride; ++i) {
      const int a = i >= size_t(src_ch) ? dst[i - src_ch] : 0;
      const int b = up ? up[i] : 0;
      const int c = (up && i >= size_t(src_ch)) ? up[i - src_ch] : 0;
      int v = src[i];
      switch (filter) {
        case 0: break;
        case 1: v += a; break;
        case 2: v += b; break;
        case 3: v += (a + b) / 2; break;
        case 4: v += paeth(a, b, c); break;
        default: throw ValidationError("png: bad filter type");
      }
      dst[i] = (unsigned char)(v & 0xff);
    }
  }

  Image img(w, h, src_ch == 1 ? 1 : 3);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const unsigned char* s = &pix[size_t(y) * stride + size_t(x) * src_ch];
      float* d = img.at(x, y);
      if (src_ch == 1) {
        d[0] = float(s[0]) / 255.0f;
      } else {
        d[0] = float(s[0]) / 255.0f;
        d[1] = float(s[1]) / 255.0f;
        d[2] = float(s[2]) / 255.0f;
      }
    }
  }
  return img;
}

}  // namespace plenograsp

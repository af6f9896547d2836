// Grayscale images with values in [0,1], PGM (P5) and 8-bit grayscale PNG io.
// PGM is the bit-exact interchange format; PNG is a convenience export.
#pragma once

#include <zlib.h>

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "handshadow/autodiff.hpp"

namespace handshadow {

class ImageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GrayImage {
  int height = 0, width = 0;
  std::vector<double> pixels;  // row-major, [0,1]
  std::vector<VarId> ids;      // per-pixel tape vars when rendered differentiably

  GrayImage() = default;
  GrayImage(int h, int w, double fill = 0.0)
      : height(h), width(w), pixels(size_t(h) * size_t(w), fill) {}

  double& at(int r, int c) { return pixels[size_t(r) * size_t(width) + size_t(c)]; }
  double at(int r, int c) const { return pixels[size_t(r) * size_t(width) + size_t(c)]; }
  size_t count() const { return pixels.size(); }

  bool in_unit_range(double eps = 1e-12) const {
    for (double p : pixels)
      if (!(p >= -eps && p <= 1.0 + eps)) return false;
    return true;
  }
};

// Round-half-up 8-bit quantization.
inline uint8_t quantize8(double v) {
  if (v <= 0.0) return 0;
  if (v >= 1.0) return 255;
  return uint8_t(v * 255.0 + 0.5);
}

inline std::vector<uint8_t> to_bytes(const GrayImage& img) {
  std::vector<uint8_t> b(img.count());
  for (size_t i = 0; i < img.count(); ++i) b[i] = quantize8(img.pixels[i]);
  return b;
}

// --- PGM ----------------------------------------------------------------------

inline void write_pgm(const GrayImage& img, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ImageError("cannot open for writing: " + path);
  out << "P5\n" << img.width << " " << img.height << "\n255\n";
  auto bytes = to_bytes(img);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            std::streamsize(bytes.size()));
  if (!out) throw ImageError("write failed: " + path);
}

inline GrayImage load_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ImageError("cannot open: " + path);
  auto next_token = [&]() {
    std::string tok;
    int c;
    while ((c = in.get()) != EOF) {
      if (c == '#') {
        while ((c = in.get()) != EOF && c != '\n') {}
        continue;
      }
      if (!std::isspace(c)) {
        tok.push_back(char(c));
        while ((c = in.peek()) != EOF && !std::isspace(c)) tok.push_back(char(in.get()));
        return tok;
      }
    }
    return tok;
  };
  std::string magic = next_token();
  if (magic != "P5" && magic != "P2")
    throw ImageError(path + ": not a PGM (P5/P2) file");
  int w = std::stoi(next_token());
  int h = std::stoi(next_token());
  int maxval = std::stoi(next_token());
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255)
    throw ImageError(path + ": unsupported PGM header");
  GrayImage img(h, w);
  if (magic == "P5") {
    in.get();  // single whitespace after maxval
    std::vector<uint8_t> bytes(img.count());
    in.read(reinterpret_cast<char*>(bytes.data()), std::streamsize(bytes.size()));
    if (!in) throw ImageError(path + ": truncated PGM data");
    for (size_t i = 0; i < img.count(); ++i)
      img.pixels[i] = double(bytes[i]) / double(maxval);
  } else {
    for (size_t i = 0; i < img.count(); ++i) {
      std::string t = next_token();
      if (t.empty()) throw ImageError(path + ": truncated PGM data");
      img.pixels[i] = double(std::stoi(t)) / double(maxval);
    }
  }
  return img;
}

// --- PNG (8-bit grayscale) ------------------------------------------------------

namespace detail {

inline void put_u32be(std::vector<uint8_t>& v, uint32_t x) {
  v.push_back(uint8_t(x >> 24));
  v.push_back(uint8_t(x >> 16));
  v.push_back(uint8_t(x >> 8));
  v.push_back(uint8_t(x));
}

inline void png_chunk(std::vector<uint8_t>& out, const char type[5],
                      const std::vector<uint8_t>& data) {
  put_u32be(out, uint32_t(data.size()));
  size_t start = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), data.begin(), data.end());
  uint32_t crc = uint32_t(
      ::crc32(0, out.data() + start, uInt(out.size() - start)));
  put_u32be(out, crc);
}

}  // namespace detail

inline void write_png(const GrayImage& img, const std::string& path) {
  std::vector<uint8_t> raw;
  raw.reserve(size_t(img.height) * (size_t(img.width) + 1));
  auto bytes = to_bytes(img);
  for (int r = 0; r < img.height; ++r) {
    raw.push_back(0);  // filter: none
    raw.insert(raw.end(), bytes.begin() + size_t(r) * size_t(img.width),
               bytes.begin() + size_t(r + 1) * size_t(img.width));
  }
  uLongf comp_len = compressBound(uLong(raw.size()));
  std::vector<uint8_t> comp(comp_len);
  if (compress2(comp.data(), &comp_len, raw.data(), uLong(raw.size()), 9) != Z_OK)
    throw ImageError("png: deflate failed");
  comp.resize(comp_len);

  std::vector<uint8_t> out = {137, 80, 78, 71, 13, 10, 26, 10};
  std::vector<uint8_t> ihdr;
  detail::put_u32be(ihdr, uint32_t(img.width));
  detail::put_u32be(ihdr, uint32_t(img.height));
  ihdr.push_back(8);  // bit depth
  ihdr.push_back(0);  // grayscale
  ihdr.push_back(0);
  ihdr.push_back(0);
  ihdr.push_back(0);
  detail::png_chunk(out, "IHDR", ihdr);
  detail::png_chunk(out, "IDAT", comp);
  detail::png_chunk(out, "IEND", {});

  std::ofstream f(path, std::ios::binary);
  if (!f) throw ImageError("cannot open for writing: " + path);
  f.write(reinterpret_cast<const char*>(out.data()), std::streamsize(out.size()));
  if (!f) throw ImageError("write failed: " + path);
}

inline GrayImage load_png(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ImageError("cannot open: " + path);
  std::vector<uint8_t> buf((std::istreambuf_iterator<char>(f)),
                           std::istreambuf_iterator<char>());
  static const uint8_t sig[8] = {137, 80, 78, 71, 13, 10, 26, 10};
  if (buf.size() < 8 || std::memcmp(buf.data(), sig, 8) != 0)
    throw ImageError(path + ": not a PNG file");

  auto u32 = [&](size_t off) {
    return (uint32_t(buf[off]) << 24) | (uint32_t(buf[off + 1]) << 16) |
           (uint32_t(buf[off + 2]) << 8) | uint32_t(buf[off + 3]);
  };

  size_t pos = 8;
  int w = 0, h = 0;
  std::vector<uint8_t> idat;
  while (pos + 8 <= buf.size()) {
    uint32_t len = u32(pos);
    std::string type(buf.begin() + long(pos) + 4, buf.begin() + long(pos) + 8);
    size_t data = pos + 8;
    if (data + len > buf.size()) throw ImageError(path + ": truncated PNG");
    if (type == "IHDR") {
      w = int(u32(data));
      h = int(u32(data + 4));
      int depth = buf[data + 8], color = buf[data + 9], interlace = buf[data + 12];
      if (depth != 8 || color != 0 || interlace != 0)
        throw ImageError(path + ": only 8-bit non-interlaced grayscale PNG supported");
    } else if (type == "IDAT") {
      idat.insert(idat.end(), buf.begin() + long(data), buf.begin() + long(data + len));
    } else if (type == "IEND") {
      break;
    }
    pos = data + len + 4;  // skip CRC
  }
  if (w <= 0 || h <= 0 || idat.empty()) throw ImageError(path + ": missing PNG data");

  std::vector<uint8_t> raw(size_t(h) * (size_t(w) + 1));
  uLongf raw_len = uLongf(raw.size());
  if (uncompress(raw.data(), &raw_len, idat.data(), uLong(idat.size())) != Z_OK ||
      raw_len != raw.size())
    throw ImageError(path + ": PNG inflate failed");

  GrayImage img(h, w);
  std::vector<uint8_t> prev(size_t(w), 0);
  std::vector<uint8_t> cur(size_t(w), 0);
  for (int r = 0; r < h; ++r) {
    const uint8_t* line = raw.data() + size_t(r) * (size_t(w) + 1);
    uint8_t filter = line[0];
    for (int c = 0; c < w; ++c) {
      int x = line[c + 1];
      int a = c > 0 ? cur[size_t(c - 1)] : 0;   // left
      int b = prev[size_t(c)];                  // up
      int cc = c > 0 ? prev[size_t(c - 1)] : 0; // up-left
      switch (filter) {
        case 0: break;
        case 1: x += a; break;
        case 2: x += b; break;
        case 3: x += (a + b) / 2; break;
        case 4: {
          int p = a + b - cc;
          int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - cc);
          x += (pa <= pb && pa <= pc) ? a : (pb <= pc ? b : cc);
          break;
        }
        default: throw ImageError(path + ": unknown PNG filter");
      }
      cur[size_t(c)] = uint8_t(x & 0xff);
      img.at(r, c) = double(cur[size_t(c)]) / 255.0;
    }
    std::swap(prev, cur);
  }
  return img;
}

// Loads PGM or PNG by magic bytes.
inline GrayImage load_image(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ImageError("cannot open: " + path);
  char m[2] = {0, 0};
  f.read(m, 2);
  f.close();
  if (m[0] == 'P' && (m[1] == '5' || m[1] == '2')) return load_pgm(path);
  if (uint8_t(m[0]) == 137 && m[1] == 'P') return load_png(path);
  throw ImageError(path + ": unrecognized image format (expected PGM or PNG)");
}

// --- small image utilities -----------------------------------------------------

inline GrayImage threshold_binary(const GrayImage& img, double thr = 0.5) {
  GrayImage out(img.height, img.width);
  for (size_t i = 0; i < img.count(); ++i)
    out.pixels[i] = img.pixels[i] >= thr ? 1.0 : 0.0;
  return out;
}

// Intersection-over-union of two images thresholded at 0.5.
inline double iou(const GrayImage& a, const GrayImage& b) {
  if (a.height != b.height || a.width != b.width)
    throw ImageError("iou: resolution mismatch");
  size_t inter = 0, uni = 0;
  for (size_t i = 0; i < a.count(); ++i) {
    bool pa = a.pixels[i] >= 0.5, pb = b.pixels[i] >= 0.5;
    inter += pa && pb;
    uni += pa || pb;
  }
  return uni == 0 ? 1.0 : double(inter) / double(uni);
}

inline double mean_abs_diff(const GrayImage& a, const GrayImage& b) {
  if (a.height != b.height || a.width != b.width)
    throw ImageError("mean_abs_diff: resolution mismatch");
  double s = 0.0;
  for (size_t i = 0; i < a.count(); ++i) s += std::abs(a.pixels[i] - b.pixels[i]);
  return s / double(a.count());
}

}  // namespace handshadow

// Binary PPM (P6, 8-bit) for color and PFM (little-endian fp32, bottom-up)
// for depth, plus minimal readers used by the tests.
#pragma once

#include <cstdint>
#include <fstream>

#include "rfdet/array.hpp"

namespace rfdet {

inline void write_ppm(const Array<double>& img, const std::string& path) {
  check(img.ndim() == 3 && img.shape[2] == 3, "write_ppm expects an {H,W,3} array");
  const int h = img.shape[0], w = img.shape[1];
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for writing: " + path);
  f << "P6\n" << w << " " << h << "\n255\n";
  std::vector<unsigned char> row(static_cast<size_t>(w) * 3);
  for (int j = 0; j < h; ++j) {
    for (int i = 0; i < w * 3; ++i) {
      double v = img[static_cast<int64_t>(j) * w * 3 + i];
      v = std::min(1.0, std::max(0.0, v));
      row[static_cast<size_t>(i)] = static_cast<unsigned char>(std::lround(v * 255.0));
    }
    f.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
  if (!f) throw IoError("write failed: " + path);
}

// PFM stores rows bottom-up; the negative scale marks little-endian floats.
inline void write_pfm(const Array<double>& depth, const std::string& path) {
  check(depth.ndim() == 2, "write_pfm expects an {H,W} array");
  const int h = depth.shape[0], w = depth.shape[1];
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for writing: " + path);
  f << "Pf\n" << w << " " << h << "\n-1.0\n";
  std::vector<float> row(static_cast<size_t>(w));
  for (int j = h - 1; j >= 0; --j) {
    for (int i = 0; i < w; ++i)
      row[static_cast<size_t>(i)] = static_cast<float>(depth[static_cast<int64_t>(j) * w + i]);
    f.write(reinterpret_cast<const char*>(row.data()),
            static_cast<std::streamsize>(row.size() * sizeof(float)));
  }
  if (!f) throw IoError("write failed: " + path);
}

inline Array<double> read_ppm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open: " + path);
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  f >> magic >> w >> h >> maxval;
  if (magic != "P6" || maxval != 255 || w <= 0 || h <= 0) throw IoError("not an 8-bit P6 PPM: " + path);
  f.get();  // single whitespace after header
  Array<double> img = Array<double>::zeros({h, w, 3});
  std::vector<unsigned char> buf(static_cast<size_t>(w) * static_cast<size_t>(h) * 3);
  f.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (f.gcount() != static_cast<std::streamsize>(buf.size())) throw IoError("truncated PPM: " + path);
  for (int64_t i = 0; i < img.numel(); ++i) img[i] = buf[static_cast<size_t>(i)] / 255.0;
  return img;
}

inline Array<double> read_pfm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open: " + path);
  std::string magic;
  int w = 0, h = 0;
  double scale = 0;
  f >> magic >> w >> h >> scale;
  if (magic != "Pf" || w <= 0 || h <= 0 || scale >= 0) throw IoError("not a little-endian grayscale PFM: " + path);
  f.get();
  Array<double> img = Array<double>::zeros({h, w});
  std::vector<float> row(static_cast<size_t>(w));
  for (int j = h - 1; j >= 0; --j) {
    f.read(reinterpret_cast<char*>(row.data()),
           static_cast<std::streamsize>(row.size() * sizeof(float)));
    if (f.gcount() != static_cast<std::streamsize>(row.size() * sizeof(float)))
      throw IoError("truncated PFM: " + path);
    for (int i = 0; i < w; ++i) img[static_cast<int64_t>(j) * w + i] = row[static_cast<size_t>(i)];
  }
  return img;
}

}  // namespace rfdet

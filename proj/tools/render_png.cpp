#include "render_png.hpp"

#include <zlib.h>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include "snapkit/io.hpp"

namespace snapkit {

namespace {

void put_u32(std::vector<std::uint8_t>& v, std::uint32_t x) {
  v.push_back((x >> 24) & 0xff);
  v.push_back((x >> 16) & 0xff);
  v.push_back((x >> 8) & 0xff);
  v.push_back(x & 0xff);
}

void write_chunk(std::ofstream& out, const char type[4], const std::vector<std::uint8_t>& data) {
  std::vector<std::uint8_t> head;
  put_u32(head, static_cast<std::uint32_t>(data.size()));
  out.write(reinterpret_cast<const char*>(head.data()), 4);
  out.write(type, 4);
  if (!data.empty()) out.write(reinterpret_cast<const char*>(data.data()), data.size());
  std::uint32_t crc = crc32(0, reinterpret_cast<const Bytef*>(type), 4);
  if (!data.empty()) crc = crc32(crc, data.data(), static_cast<uInt>(data.size()));
  std::vector<std::uint8_t> tail;
  put_u32(tail, crc);
  out.write(reinterpret_cast<const char*>(tail.data()), 4);
}

}  // namespace

void render_wigner_png(const std::filesystem::path& csv, const std::filesystem::path& png) {
  WignerGrid grid = read_wigner_csv(csv);
  const int n = static_cast<int>(grid.points.size());
  const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(n))));
  if (side * side != n)
    throw ConfigError("render_wigner_png: grid is not square: " + csv.string());

  const double vm = std::max(grid.values.cwiseAbs().maxCoeff(), 1e-12);
  const int scale = std::max(1, 512 / side);
  const int w = side * scale, h = side * scale;

  // raw scanlines: filter byte 0 + RGB; grid rows run im ascending, the image
  // top row is the largest im
  std::vector<std::uint8_t> raw;
  raw.reserve(static_cast<std::size_t>(h) * (1 + 3 * w));
  for (int py = 0; py < h; ++py) {
    raw.push_back(0);
    const int gy = side - 1 - py / scale;
    for (int px = 0; px < w; ++px) {
      const int gx = px / scale;
      const double t = grid.values(gy * side + gx) / vm;  // [-1, 1]
      const double r = 255.0 * std::min(1.0, 1.0 + t);
      const double b = 255.0 * std::min(1.0, 1.0 - t);
      const double g = 255.0 * (1.0 - std::abs(t));
      raw.push_back(static_cast<std::uint8_t>(std::lround(r)));
      raw.push_back(static_cast<std::uint8_t>(std::lround(g)));
      raw.push_back(static_cast<std::uint8_t>(std::lround(b)));
    }
  }

  uLongf zcap = compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> zdata(zcap);
  if (compress2(zdata.data(), &zcap, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
    throw NumericalFailure("render_wigner_png: deflate failed");
  zdata.resize(zcap);

  std::ofstream out(png, std::ios::binary);
  if (!out) throw ConfigError("cannot open for writing: " + png.string());
  static const std::uint8_t sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  out.write(reinterpret_cast<const char*>(sig), 8);

  std::vector<std::uint8_t> ihdr;
  put_u32(ihdr, static_cast<std::uint32_t>(w));
  put_u32(ihdr, static_cast<std::uint32_t>(h));
  ihdr.push_back(8);  // bit depth
  ihdr.push_back(2);  // truecolor
  ihdr.push_back(0);
  ihdr.push_back(0);
  ihdr.push_back(0);
  write_chunk(out, "IHDR", ihdr);
  write_chunk(out, "IDAT", zdata);
  write_chunk(out, "IEND", {});
}

}  // namespace snapkit

#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "srcnpat/core.hpp"

namespace srcnpat {

namespace io {

// Little-endian byte buffer writer/reader used by every binary format here.
class ByteWriter {
 public:
  void magic(std::string_view m) { bytes_.insert(bytes_.end(), m.begin(), m.end()); }
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u32(std::uint32_t v) { put(v); }
  void u64(std::uint64_t v) { put(v); }
  void f32(float v) { put(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { put(std::bit_cast<std::uint64_t>(v)); }
  const std::vector<char>& bytes() const { return bytes_; }

 private:
  template <class U>
  void put(U v) {
    for (std::size_t k = 0; k < sizeof(U); ++k) bytes_.push_back(static_cast<char>((v >> (8 * k)) & 0xFFu));
  }
  std::vector<char> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::vector<char> bytes) : bytes_(std::move(bytes)) {}

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

  void expect_magic(std::string_view m, const char* format) {
    need(m.size(), format);
    if (std::memcmp(bytes_.data() + pos_, m.data(), m.size()) != 0)
      throw FormatError(std::string(format) + ": bad magic, expected \"" + std::string(m) + "\"", pos_);
    pos_ += m.size();
  }
  std::uint8_t u8(const char* what) {
    need(1, what);
    return static_cast<std::uint8_t>(bytes_[pos_++]);
  }
  std::uint32_t u32(const char* what) { return get<std::uint32_t>(what); }
  std::uint64_t u64(const char* what) { return get<std::uint64_t>(what); }
  float f32(const char* what) { return std::bit_cast<float>(get<std::uint32_t>(what)); }
  double f64(const char* what) { return std::bit_cast<double>(get<std::uint64_t>(what)); }

  void need(std::size_t n, const char* what) const {
    if (remaining() < n)
      throw FormatError(std::string(what) + ": truncated, need " + std::to_string(n) + " more bytes, have " +
                            std::to_string(remaining()),
                        pos_);
  }

 private:
  template <class U>
  U get(const char* what) {
    need(sizeof(U), what);
    U v = 0;
    for (std::size_t k = 0; k < sizeof(U); ++k)
      v |= static_cast<U>(static_cast<unsigned char>(bytes_[pos_ + k])) << (8 * k);
    pos_ += sizeof(U);
    return v;
  }
  std::vector<char> bytes_;
  std::size_t pos_ = 0;
};

inline std::vector<char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  return std::vector<char>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_file(const std::filesystem::path& path, std::span<const char> bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace io

inline constexpr std::uint32_t kSinogramFormatVersion = 1;
inline constexpr std::uint32_t kFieldFormatVersion = 1;

// "PASG" layout: magic, u32 version, u32 T, u32 D, f64 dt, f64 t0, then T*D
// f64 values, time-major.
inline std::vector<char> encode_sinogram(const Sinogram& s) {
  s.validate();
  io::ByteWriter w;
  w.magic("PASG");
  w.u32(kSinogramFormatVersion);
  w.u32(static_cast<std::uint32_t>(s.samples()));
  w.u32(static_cast<std::uint32_t>(s.detectors()));
  w.f64(s.dt);
  w.f64(s.t0);
  for (Eigen::Index t = 0; t < s.data.rows(); ++t)
    for (Eigen::Index d = 0; d < s.data.cols(); ++d) w.f64(s.data(t, d));
  return w.bytes();
}

inline Sinogram decode_sinogram(std::vector<char> bytes) {
  io::ByteReader r(std::move(bytes));
  r.expect_magic("PASG", "sinogram");
  const std::size_t at_version = r.offset();
  const auto version = r.u32("sinogram header");
  if (version != kSinogramFormatVersion)
    throw FormatError("sinogram: unsupported version " + std::to_string(version), at_version);
  const auto T = r.u32("sinogram header");
  const auto D = r.u32("sinogram header");
  const double dt = r.f64("sinogram header");
  const double t0 = r.f64("sinogram header");
  if (T == 0 || D == 0) throw FormatError("sinogram: zero dimension in header", 8);
  r.need(static_cast<std::size_t>(T) * D * 8, "sinogram payload");
  Matrix m(T, D);
  for (std::uint32_t t = 0; t < T; ++t)
    for (std::uint32_t d = 0; d < D; ++d) m(t, d) = r.f64("sinogram payload");
  if (r.remaining() != 0) throw FormatError("sinogram: trailing bytes after payload", r.offset());
  return Sinogram(std::move(m), dt, t0);
}

inline void write_sinogram(const Sinogram& s, const std::filesystem::path& path) {
  io::write_file(path, encode_sinogram(s));
}

inline Sinogram read_sinogram(const std::filesystem::path& path) { return decode_sinogram(io::read_file(path)); }

// "PAFD" layout: magic, u32 version, u32 nx, u32 ny, f64 dx, f64 origin.x,
// f64 origin.y, then nx*ny f64 values with the x index outermost.
inline std::vector<char> encode_field(const PressureField& f) {
  f.validate();
  io::ByteWriter w;
  w.magic("PAFD");
  w.u32(kFieldFormatVersion);
  w.u32(static_cast<std::uint32_t>(f.grid.nx));
  w.u32(static_cast<std::uint32_t>(f.grid.ny));
  w.f64(f.grid.dx);
  w.f64(f.grid.origin.x);
  w.f64(f.grid.origin.y);
  for (Eigen::Index i = 0; i < f.values.rows(); ++i)
    for (Eigen::Index j = 0; j < f.values.cols(); ++j) w.f64(f.values(i, j));
  return w.bytes();
}

inline PressureField decode_field(std::vector<char> bytes) {
  io::ByteReader r(std::move(bytes));
  r.expect_magic("PAFD", "field");
  const std::size_t at_version = r.offset();
  const auto version = r.u32("field header");
  if (version != kFieldFormatVersion) throw FormatError("field: unsupported version " + std::to_string(version), at_version);
  const auto nx = r.u32("field header");
  const auto ny = r.u32("field header");
  const double dx = r.f64("field header");
  const double ox = r.f64("field header");
  const double oy = r.f64("field header");
  r.need(static_cast<std::size_t>(nx) * ny * 8, "field payload");
  Matrix m(nx, ny);
  for (std::uint32_t i = 0; i < nx; ++i)
    for (std::uint32_t j = 0; j < ny; ++j) m(i, j) = r.f64("field payload");
  if (r.remaining() != 0) throw FormatError("field: trailing bytes after payload", r.offset());
  return PressureField(Grid2D(nx, ny, dx, {ox, oy}), std::move(m));
}

inline void write_field(const PressureField& f, const std::filesystem::path& path) { io::write_file(path, encode_field(f)); }

inline PressureField read_field(const std::filesystem::path& path) { return decode_field(io::read_file(path)); }

// 8- or 16-bit grayscale image, row-major.
struct GrayImage {
  std::size_t width = 0;
  std::size_t height = 0;
  unsigned maxval = 255;
  std::vector<std::uint16_t> pixels;

  std::uint16_t at(std::size_t row, std::size_t col) const { return pixels[row * width + col]; }
};

// Binary PGM (P5). 16-bit samples are big-endian as the format requires.
inline std::vector<char> encode_pgm(const GrayImage& img) {
  if (img.maxval == 0 || img.maxval > 65535) throw ValidationError("pgm: maxval must be in [1, 65535]");
  if (img.pixels.size() != img.width * img.height) throw DimensionError("pgm: pixel count does not match size");
  std::string header = "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n" +
                       std::to_string(img.maxval) + "\n";
  std::vector<char> out(header.begin(), header.end());
  const bool wide = img.maxval > 255;
  for (auto p : img.pixels) {
    if (wide) out.push_back(static_cast<char>(p >> 8));
    out.push_back(static_cast<char>(p & 0xFF));
  }
  return out;
}

inline GrayImage decode_pgm(const std::vector<char>& bytes) {
  std::size_t pos = 0;
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      const char c = bytes[pos];
      if (c == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto number = [&](const char* what) {
    skip_space();
    std::size_t start = pos;
    unsigned long v = 0;
    while (pos < bytes.size() && bytes[pos] >= '0' && bytes[pos] <= '9') {
      v = v * 10 + static_cast<unsigned long>(bytes[pos] - '0');
      if (v > 1u << 24) throw FormatError(std::string("pgm: ") + what + " too large", start);
      ++pos;
    }
    if (pos == start) throw FormatError(std::string("pgm: expected ") + what, start);
    return v;
  };
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') throw FormatError("pgm: not a binary graymap (P5)", 0);
  pos = 2;
  GrayImage img;
  img.width = number("width");
  img.height = number("height");
  img.maxval = static_cast<unsigned>(number("maxval"));
  if (img.width == 0 || img.height == 0) throw FormatError("pgm: zero dimension", pos);
  if (img.maxval == 0 || img.maxval > 65535) throw FormatError("pgm: maxval out of range", pos);
  if (pos >= bytes.size()) throw FormatError("pgm: missing pixel data", pos);
  ++pos;  // single whitespace byte before the raster
  const std::size_t bpp = img.maxval > 255 ? 2 : 1;
  const std::size_t need = img.width * img.height * bpp;
  if (bytes.size() - pos < need) throw FormatError("pgm: truncated raster", bytes.size());
  img.pixels.resize(img.width * img.height);
  for (std::size_t k = 0; k < img.pixels.size(); ++k) {
    const auto hi = static_cast<unsigned char>(bytes[pos]);
    if (bpp == 2) {
      const auto lo = static_cast<unsigned char>(bytes[pos + 1]);
      img.pixels[k] = static_cast<std::uint16_t>((hi << 8) | lo);
    } else {
      img.pixels[k] = hi;
    }
    pos += bpp;
  }
  return img;
}

inline GrayImage read_pgm(const std::filesystem::path& path) { return decode_pgm(io::read_file(path)); }

inline void write_pgm(const GrayImage& img, const std::filesystem::path& path) { io::write_file(path, encode_pgm(img)); }

// Min-max normalized preview of a matrix. Rows of the image follow matrix
// rows. A constant matrix maps to all-zero pixels.
inline GrayImage to_graymap(const Matrix& m, unsigned bits = 8) {
  if (bits != 8 && bits != 16) throw ValidationError("graymap: bits must be 8 or 16");
  if (!all_finite(m)) throw ValidationError("graymap: matrix has non-finite values");
  GrayImage img;
  img.height = static_cast<std::size_t>(m.rows());
  img.width = static_cast<std::size_t>(m.cols());
  img.maxval = bits == 8 ? 255u : 65535u;
  img.pixels.resize(img.width * img.height);
  const double lo = m.minCoeff();
  const double hi = m.maxCoeff();
  const double span = hi - lo;
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      const double u = span > 0.0 ? (m(r, c) - lo) / span : 0.0;
      img.pixels[static_cast<std::size_t>(r) * img.width + static_cast<std::size_t>(c)] =
          static_cast<std::uint16_t>(std::lround(u * img.maxval));
    }
  return img;
}

inline void export_graymap(const PressureField& f, const std::filesystem::path& path, unsigned bits = 8) {
  f.validate();
  write_pgm(to_graymap(f.values, bits), path);
}

inline void export_graymap(const Sinogram& s, const std::filesystem::path& path, unsigned bits = 8) {
  s.validate();
  write_pgm(to_graymap(s.data, bits), path);
}

}  // namespace srcnpat

#include "camconv/image_io.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

namespace camconv {

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ImageIoError("cannot open for writing: " + path.string());
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ImageIoError("cannot open for reading: " + path.string());
  return in;
}

// Netpbm header token, skipping whitespace and '#' comments.
std::string token(std::istream& in, const std::filesystem::path& path) {
  std::string tok;
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(ch)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(static_cast<char>(ch));
  }
  if (tok.empty()) throw ImageIoError("truncated header: " + path.string());
  return tok;
}

long positive(const std::string& tok, const std::filesystem::path& path) {
  try {
    const long v = std::stol(tok);
    if (v > 0) return v;
  } catch (const std::exception&) {
  }
  throw ImageIoError("bad header value '" + tok + "' in " + path.string());
}

std::uint32_t to_little(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) v = __builtin_bswap32(v);
  return v;
}

void write_pfm_raw(const std::filesystem::path& path, const float* data, std::size_t h, std::size_t w,
                   std::size_t c) {
  auto out = open_out(path);
  out << (c == 3 ? "PF" : "Pf") << '\n' << w << ' ' << h << '\n' << "-1.0\n";
  std::vector<std::uint32_t> row(w * c);
  for (std::size_t r = h; r-- > 0;) {
    for (std::size_t k = 0; k < w * c; ++k) row[k] = to_little(std::bit_cast<std::uint32_t>(data[r * w * c + k]));
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size() * 4));
  }
  if (!out) throw ImageIoError("write failed: " + path.string());
}

}  // namespace

void write_pfm(const std::filesystem::path& path, const GridF& image) {
  if (image.rank() != 3 || (image.c() != 1 && image.c() != 3)) {
    throw ImageIoError("PFM holds 1 or 3 channels, got " + shape_string(image.shape()));
  }
  write_pfm_raw(path, image.data(), image.h(), image.w(), image.c());
}

GridF read_pfm(const std::filesystem::path& path) {
  auto in = open_in(path);
  const std::string magic = token(in, path);
  if (magic != "Pf" && magic != "PF") throw ImageIoError("not a PFM file: " + path.string());
  const std::size_t c = magic == "PF" ? 3 : 1;
  const auto w = static_cast<std::size_t>(positive(token(in, path), path));
  const auto h = static_cast<std::size_t>(positive(token(in, path), path));
  double scale = 0;
  try {
    scale = std::stod(token(in, path));
  } catch (const std::exception&) {
    throw ImageIoError("bad PFM scale in " + path.string());
  }
  if (scale == 0.0 || !std::isfinite(scale)) throw ImageIoError("bad PFM scale in " + path.string());
  const bool file_little = scale < 0;
  const bool swap = file_little != (std::endian::native == std::endian::little);
  GridF img(h, w, c);
  std::vector<std::uint32_t> row(w * c);
  for (std::size_t r = h; r-- > 0;) {
    in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size() * 4));
    if (!in) throw ImageIoError("truncated PFM data: " + path.string());
    for (std::size_t k = 0; k < w * c; ++k) {
      const std::uint32_t v = swap ? __builtin_bswap32(row[k]) : row[k];
      img[r * w * c + k] = std::bit_cast<float>(v);
    }
  }
  return img;
}

void write_pfm_planes(const std::filesystem::path& path, const GridF& image) {
  const std::size_t h = image.h(), w = image.w(), c = image.c();
  std::vector<float> planes(h * w * c);
  for (std::size_t k = 0; k < c; ++k) {
    for (std::size_t p = 0; p < h * w; ++p) planes[k * h * w + p] = image[p * c + k];
  }
  write_pfm_raw(path, planes.data(), h * c, w, 1);
}

GridF read_pfm_planes(const std::filesystem::path& path, std::size_t channels) {
  const GridF flat = read_pfm(path);
  if (flat.c() != 1 || channels == 0 || flat.h() % channels) {
    throw ImageIoError("PFM does not hold " + std::to_string(channels) + " stacked planes: " + path.string());
  }
  const std::size_t h = flat.h() / channels, w = flat.w();
  GridF out(h, w, channels);
  for (std::size_t k = 0; k < channels; ++k) {
    for (std::size_t p = 0; p < h * w; ++p) out[p * channels + k] = flat[k * h * w + p];
  }
  return out;
}

void write_ppm(const std::filesystem::path& path, const GridF& rgb) {
  if (rgb.rank() != 3 || rgb.c() != 3) throw ImageIoError("PPM needs 3 channels, got " + shape_string(rgb.shape()));
  auto out = open_out(path);
  out << "P6\n" << rgb.w() << ' ' << rgb.h() << "\n255\n";
  std::vector<unsigned char> bytes(rgb.size());
  for (std::size_t k = 0; k < rgb.size(); ++k) {
    const double v = std::clamp(static_cast<double>(rgb[k]), 0.0, 1.0);
    bytes[k] = static_cast<unsigned char>(std::lround(v * 255.0));
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ImageIoError("write failed: " + path.string());
}

namespace {

std::vector<unsigned char> read_netpbm(const std::filesystem::path& path, const char* magic, std::size_t c,
                                       std::size_t& h, std::size_t& w) {
  auto in = open_in(path);
  if (token(in, path) != magic) throw ImageIoError(std::string("expected ") + magic + " file: " + path.string());
  w = static_cast<std::size_t>(positive(token(in, path), path));
  h = static_cast<std::size_t>(positive(token(in, path), path));
  const long maxval = positive(token(in, path), path);
  if (maxval > 255) throw ImageIoError("only 8-bit netpbm files are supported: " + path.string());
  std::vector<unsigned char> bytes(h * w * c);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!in) throw ImageIoError("truncated netpbm data: " + path.string());
  return bytes;
}

}  // namespace

GridF read_ppm(const std::filesystem::path& path) {
  std::size_t h = 0, w = 0;
  const auto bytes = read_netpbm(path, "P6", 3, h, w);
  GridF rgb(h, w, 3);
  for (std::size_t k = 0; k < bytes.size(); ++k) rgb[k] = static_cast<float>(bytes[k]) / 255.0f;
  return rgb;
}

void write_mask_pgm(const std::filesystem::path& path, const Mask& mask) {
  auto out = open_out(path);
  out << "P5\n" << mask.w << ' ' << mask.h << "\n255\n";
  std::vector<unsigned char> bytes(mask.bits.size());
  for (std::size_t k = 0; k < bytes.size(); ++k) bytes[k] = mask.bits[k] ? 255 : 0;
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ImageIoError("write failed: " + path.string());
}

Mask read_mask_pgm(const std::filesystem::path& path) {
  std::size_t h = 0, w = 0;
  const auto bytes = read_netpbm(path, "P5", 1, h, w);
  Mask m(h, w, false);
  for (std::size_t k = 0; k < bytes.size(); ++k) m.bits[k] = bytes[k] >= 128;
  return m;
}

}  // namespace camconv

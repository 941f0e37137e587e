#pragma once

#include <filesystem>
#include <stdexcept>

#include "camconv/grid.hpp"

namespace camconv {

class ImageIoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Portable Float Map. One channel writes "Pf", three channels "PF"; the scale
// line is -1.0 (little-endian) and rows are stored bottom to top.
void write_pfm(const std::filesystem::path& path, const GridF& image);
// Reads "Pf"/"PF" files of either byte order into (h, w, 1|3).
GridF read_pfm(const std::filesystem::path& path);

// Writes a multi-channel grid as a grayscale PFM whose height is h * c: channel
// k occupies image rows [k*h, (k+1)*h) in top-to-bottom order.
void write_pfm_planes(const std::filesystem::path& path, const GridF& image);
GridF read_pfm_planes(const std::filesystem::path& path, std::size_t channels);

// Binary PPM (P6, maxval 255) from an (h, w, 3) grid in [0, 1].
void write_ppm(const std::filesystem::path& path, const GridF& rgb);
GridF read_ppm(const std::filesystem::path& path);

// Binary PGM (P5, maxval 255) holding a mask: 255 valid, 0 invalid.
void write_mask_pgm(const std::filesystem::path& path, const Mask& mask);
Mask read_mask_pgm(const std::filesystem::path& path);

}  // namespace camconv

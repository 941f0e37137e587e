#include <cstring>
#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "camconv/image_io.hpp"
#include "camconv/rng.hpp"

using namespace camconv;
namespace fs = std::filesystem;

namespace {

fs::path tmp(const std::string& name) { return fs::temp_directory_path() / ("camconv_test_io_" + name); }

GridF random(std::size_t h, std::size_t w, std::size_t c, std::uint64_t seed) {
  Rng rng(seed);
  GridF g(h, w, c);
  for (auto& v : g.values()) v = static_cast<float>(rng.uniform(-5, 5));
  return g;
}

}  // namespace

TEST(Pfm, RoundTripOneAndThreeChannels) {
  for (std::size_t c : {1u, 3u}) {
    const GridF g = random(7, 5, c, c);
    write_pfm(tmp("rt.pfm"), g);
    EXPECT_EQ(read_pfm(tmp("rt.pfm")), g);
  }
}

TEST(Pfm, HeaderAndBottomUpRows) {
  GridF g(2, 3, 1);
  for (std::size_t p = 0; p < 6; ++p) g[p] = static_cast<float>(p);
  write_pfm(tmp("hdr.pfm"), g);
  std::ifstream in(tmp("hdr.pfm"), std::ios::binary);
  std::string magic, scale;
  int w = 0, h = 0;
  in >> magic >> w >> h >> scale;
  in.get();
  EXPECT_EQ(magic, "Pf");
  EXPECT_EQ(w, 3);
  EXPECT_EQ(h, 2);
  EXPECT_EQ(std::stod(scale), -1.0);
  float first = 0;
  in.read(reinterpret_cast<char*>(&first), 4);
  EXPECT_EQ(first, 3.0f);  // bottom row comes first
}

TEST(Pfm, ReadsBigEndian) {
  {
    std::ofstream out(tmp("be.pfm"), std::ios::binary);
    out << "Pf\n2 1\n1.0\n";
    for (float v : {1.5f, -2.0f}) {
      unsigned char b[4];
      std::memcpy(b, &v, 4);
      for (int k = 3; k >= 0; --k) out.put(static_cast<char>(b[k]));
    }
  }
  const GridF g = read_pfm(tmp("be.pfm"));
  EXPECT_EQ(g[0], 1.5f);
  EXPECT_EQ(g[1], -2.0f);
}

TEST(Pfm, Errors) {
  EXPECT_THROW(read_pfm(tmp("nope.pfm")), ImageIoError);
  std::ofstream(tmp("trunc.pfm"), std::ios::binary) << "Pf\n4 4\n-1.0\nabc";
  EXPECT_THROW(read_pfm(tmp("trunc.pfm")), ImageIoError);
  std::ofstream(tmp("magic.pfm"), std::ios::binary) << "P6\n4 4\n255\n";
  EXPECT_THROW(read_pfm(tmp("magic.pfm")), ImageIoError);
  EXPECT_THROW(write_pfm(tmp("bad.pfm"), GridF(2, 2, 2)), ImageIoError);
}

TEST(PfmPlanes, RoundTripSixChannels) {
  const GridF g = random(4, 6, 6, 9);
  write_pfm_planes(tmp("planes.pfm"), g);
  const GridF flat = read_pfm(tmp("planes.pfm"));
  EXPECT_EQ(flat.shape(), (Shape{24, 6, 1}));
  EXPECT_EQ(flat.at(4 * 2 + 1, 3, 0), g.at(1, 3, 2));
  EXPECT_EQ(read_pfm_planes(tmp("planes.pfm"), 6), g);
  EXPECT_THROW(read_pfm_planes(tmp("planes.pfm"), 5), ImageIoError);
}

TEST(Ppm, QuantizesAndClamps) {
  GridF g(1, 3, 3);
  g.at(0, 0, 0) = -0.5f;
  g.at(0, 1, 1) = 2.0f;
  g.at(0, 2, 2) = 0.5f;
  write_ppm(tmp("q.ppm"), g);
  const GridF r = read_ppm(tmp("q.ppm"));
  EXPECT_EQ(r.at(0, 0, 0), 0.0f);
  EXPECT_EQ(r.at(0, 1, 1), 1.0f);
  EXPECT_NEAR(r.at(0, 2, 2), 0.5f, 0.5 / 255 + 1e-6);
}

TEST(MaskPgm, RoundTrip) {
  Mask m(3, 5, false);
  m.set(0, 0, true);
  m.set(2, 4, true);
  write_mask_pgm(tmp("m.pgm"), m);
  EXPECT_EQ(read_mask_pgm(tmp("m.pgm")), m);
}

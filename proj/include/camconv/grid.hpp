#pragma once

#include <algorithm>
#include <cassert>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace camconv {

// Dense row-major array. Image-like data uses rank 3 (height, width, channels)
// with channels innermost; convolution kernels use rank 4 (kh, kw, cin, cout).
using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);

template <typename T>
class Grid {
 public:
  using value_type = T;

  Grid() = default;
  explicit Grid(Shape shape, T fill = T(0)) : shape_(std::move(shape)) {
    data_.assign(count(shape_), fill);
  }
  Grid(std::size_t h, std::size_t w, std::size_t c, T fill = T(0))
      : Grid(Shape{h, w, c}, fill) {}

  static Grid scalar(T v) { return Grid(1, 1, 1, v); }

  static std::size_t count(const Shape& s) {
    std::size_t n = 1;
    for (auto d : s) n *= d;
    return s.empty() ? 0 : n;
  }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::size_t h() const { return shape_.at(0); }
  std::size_t w() const { return shape_.at(1); }
  std::size_t c() const { return shape_.at(2); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  std::vector<T>& storage() { return data_; }
  const std::vector<T>& storage() const { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  // Rank-3 element access: row j, column i, channel k.
  T& at(std::size_t j, std::size_t i, std::size_t k = 0) {
    assert(rank() == 3);
    return data_[(j * shape_[1] + i) * shape_[2] + k];
  }
  const T& at(std::size_t j, std::size_t i, std::size_t k = 0) const {
    assert(rank() == 3);
    return data_[(j * shape_[1] + i) * shape_[2] + k];
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  bool same_shape(const Grid& o) const { return shape_ == o.shape_; }

  template <typename U>
  Grid<U> cast() const {
    Grid<U> out(shape_);
    for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
    return out;
  }

  bool operator==(const Grid& o) const = default;

 private:
  Shape shape_;
  std::vector<T> data_;
};

using GridF = Grid<float>;
using GridD = Grid<double>;

// Per-pixel validity bitmap, row-major (h, w).
struct Mask {
  std::size_t h = 0;
  std::size_t w = 0;
  std::vector<unsigned char> bits;

  Mask() = default;
  Mask(std::size_t h_, std::size_t w_, bool v = true) : h(h_), w(w_), bits(h_ * w_, v ? 1 : 0) {}

  bool operator()(std::size_t j, std::size_t i) const { return bits[j * w + i] != 0; }
  void set(std::size_t j, std::size_t i, bool v) { bits[j * w + i] = v ? 1 : 0; }
  std::size_t count() const {
    return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), static_cast<unsigned char>(1)));
  }
  bool operator==(const Mask&) const = default;
};

inline void require_shape(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument("shape mismatch: " + what);
}

}  // namespace camconv

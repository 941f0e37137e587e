#include "camconv/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>

#include <Eigen/Core>

#include "camconv/maps.hpp"

namespace camconv::ad {

// ---------------------------------------------------------------------------
// Tape

template <typename T>
Var<T> Tape<T>::constant(Grid<T> value) {
  nodes_.push_back(Node{std::move(value), {}, false, {}, {}});
  return {this, nodes_.size() - 1};
}

template <typename T>
Var<T> Tape<T>::variable(Grid<T> value) {
  nodes_.push_back(Node{std::move(value), {}, true, {}, {}});
  return {this, nodes_.size() - 1};
}

template <typename T>
Var<T> Tape<T>::push(Grid<T> value, std::vector<std::size_t> parents, BackwardFn backward) {
  const std::size_t self = nodes_.size();
  bool rg = false;
  for (auto p : parents) {
    if (p >= self) throw GraphError("op references a node that does not precede it");
    rg = rg || nodes_[p].requires_grad;
  }
  nodes_.push_back(Node{std::move(value), {}, rg, std::move(parents), rg ? std::move(backward) : BackwardFn{}});
  return {this, self};
}

template <typename T>
void Tape<T>::backward(Var<T> loss) {
  if (loss.tape != this) throw GraphError("loss belongs to a different tape");
  if (loss.id >= nodes_.size()) throw GraphError("loss id out of range");
  if (nodes_[loss.id].value.size() != 1) {
    throw GraphError("backward requires a scalar root, got " + shape_string(nodes_[loss.id].value.shape()));
  }
  if (backward_done_) throw GraphError("backward called twice without reset_grad()");
  backward_done_ = true;
  for (std::size_t i = 0; i <= loss.id; ++i) {
    auto& n = nodes_[i];
    if (n.requires_grad) n.grad = Grid<T>(n.value.shape());
  }
  if (!nodes_[loss.id].requires_grad) return;
  nodes_[loss.id].grad[0] = T(1);
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    auto& n = nodes_[i];
    if (n.requires_grad && n.backward) n.backward(*this, i);
  }
}

template <typename T>
void Tape<T>::reset_grad() {
  for (auto& n : nodes_) n.grad = Grid<T>();
  backward_done_ = false;
}

template class Tape<float>;
template class Tape<double>;

// ---------------------------------------------------------------------------
// Convolution

std::size_t conv_output_size(std::size_t in, std::size_t k, int stride, Padding padding) {
  const auto s = static_cast<std::size_t>(stride);
  if (padding == Padding::Same) return (in + s - 1) / s;
  if (in < k) throw std::invalid_argument("valid convolution: kernel larger than input");
  return (in - k) / s + 1;
}

std::size_t conv_pad_before(std::size_t in, std::size_t k, int stride, Padding padding) {
  if (padding == Padding::Valid) return 0;
  const std::size_t out = conv_output_size(in, k, stride, padding);
  const std::size_t need = (out - 1) * static_cast<std::size_t>(stride) + k;
  return need > in ? (need - in) / 2 : 0;
}

namespace {

template <typename T>
struct ConvGeometry {
  std::size_t h, w, cin, kh, kw, cout, oh, ow, pt, pl;
  int stride;
};

template <typename T>
ConvGeometry<T> conv_geometry(const Grid<T>& x, const Grid<T>& k, int stride, Padding padding) {
  require_shape(x.rank() == 3, "conv2d input must be (h, w, c), got " + shape_string(x.shape()));
  require_shape(k.rank() == 4, "conv2d kernel must be (kh, kw, cin, cout), got " + shape_string(k.shape()));
  require_shape(k.shape()[2] == x.c(), "conv2d channels: input " + shape_string(x.shape()) + " kernel " +
                                           shape_string(k.shape()));
  if (stride < 1) throw std::invalid_argument("conv2d stride must be >= 1");
  ConvGeometry<T> g{};
  g.h = x.h();
  g.w = x.w();
  g.cin = x.c();
  g.kh = k.shape()[0];
  g.kw = k.shape()[1];
  g.cout = k.shape()[3];
  g.stride = stride;
  g.oh = conv_output_size(g.h, g.kh, stride, padding);
  g.ow = conv_output_size(g.w, g.kw, stride, padding);
  g.pt = conv_pad_before(g.h, g.kh, stride, padding);
  g.pl = conv_pad_before(g.w, g.kw, stride, padding);
  return g;
}

// Calls fn(oy, ox, ky, kx, iy, ix) for every in-bounds tap.
template <typename G, typename Fn>
inline void for_each_tap(const G& g, std::size_t oy, std::size_t ox, Fn&& fn) {
  for (std::size_t ky = 0; ky < g.kh; ++ky) {
    const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - static_cast<std::ptrdiff_t>(g.pt);
    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
    for (std::size_t kx = 0; kx < g.kw; ++kx) {
      const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) - static_cast<std::ptrdiff_t>(g.pl);
      if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.w)) continue;
      fn(ky, kx, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix));
    }
  }
}

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Patch matrix: one row per output pixel, columns in kernel (ky, kx, ci) order,
// zero where a tap falls in the padding.
template <typename T>
RowMatrix<T> im2col(const ConvGeometry<T>& g, const T* x) {
  const std::size_t cols = g.kh * g.kw * g.cin;
  RowMatrix<T> p = RowMatrix<T>::Zero(static_cast<Eigen::Index>(g.oh * g.ow), static_cast<Eigen::Index>(cols));
  for (std::size_t oy = 0; oy < g.oh; ++oy) {
    for (std::size_t ox = 0; ox < g.ow; ++ox) {
      T* row = p.data() + (oy * g.ow + ox) * cols;
      for_each_tap(g, oy, ox, [&](std::size_t ky, std::size_t kx, std::size_t iy, std::size_t ix) {
        std::copy_n(x + (iy * g.w + ix) * g.cin, g.cin, row + (ky * g.kw + kx) * g.cin);
      });
    }
  }
  return p;
}

}  // namespace

template <typename T>
Var<T> conv2d(Var<T> x, Var<T> kernel, std::optional<Var<T>> bias, int stride, Padding padding) {
  Tape<T>& tape = *x.tape;
  const Grid<T>& xv = x.value();
  const Grid<T>& kv = kernel.value();
  const auto g = conv_geometry(xv, kv, stride, padding);
  if (bias) require_shape(bias->value().size() == g.cout, "conv2d bias length");

  const auto rows = static_cast<Eigen::Index>(g.oh * g.ow);
  const auto inner = static_cast<Eigen::Index>(g.kh * g.kw * g.cin);
  const auto cout = static_cast<Eigen::Index>(g.cout);
  auto patches = std::make_shared<RowMatrix<T>>(im2col(g, xv.data()));
  Eigen::Map<const RowMatrix<T>> k(kv.data(), inner, cout);
  Grid<T> y(g.oh, g.ow, g.cout);
  Eigen::Map<RowMatrix<T>> ym(y.data(), rows, cout);
  ym.noalias() = *patches * k;
  if (bias) {
    Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> b(bias->value().data(), cout);
    ym.rowwise() += b;
  }

  std::vector<std::size_t> parents{x.id, kernel.id};
  if (bias) parents.push_back(bias->id);
  const std::size_t xid = x.id, kid = kernel.id;
  const std::optional<std::size_t> bid = bias ? std::optional<std::size_t>(bias->id) : std::nullopt;
  return tape.push(std::move(y), std::move(parents), [g, xid, kid, bid, patches, rows, inner, cout](Tape<T>& t, std::size_t self) {
    Eigen::Map<const RowMatrix<T>> dy(t.node(self).grad.data(), rows, cout);
    if (t.needs_grad(kid)) {
      Eigen::Map<RowMatrix<T>> dk(t.grad_of(kid).data(), inner, cout);
      dk.noalias() += patches->transpose() * dy;
    }
    if (t.needs_grad(xid)) {
      Eigen::Map<const RowMatrix<T>> k(t.node(kid).value.data(), inner, cout);
      const RowMatrix<T> dp = dy * k.transpose();
      T* dx = t.grad_of(xid).data();
      for (std::size_t oy = 0; oy < g.oh; ++oy) {
        for (std::size_t ox = 0; ox < g.ow; ++ox) {
          const T* row = dp.data() + (oy * g.ow + ox) * static_cast<std::size_t>(inner);
          for_each_tap(g, oy, ox, [&](std::size_t ky, std::size_t kx, std::size_t iy, std::size_t ix) {
            T* __restrict d = dx + (iy * g.w + ix) * g.cin;
            const T* __restrict r = row + (ky * g.kw + kx) * g.cin;
            for (std::size_t ci = 0; ci < g.cin; ++ci) d[ci] += r[ci];
          });
        }
      }
    }
    if (bid && t.needs_grad(*bid)) {
      Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>> db(t.grad_of(*bid).data(), cout);
      db += dy.colwise().sum();
    }
  });
}

// ---------------------------------------------------------------------------
// Structural ops

template <typename T>
Var<T> concat_channels(const std::vector<Var<T>>& xs) {
  if (xs.empty()) throw std::invalid_argument("concat_channels: no inputs");
  Tape<T>& tape = *xs.front().tape;
  const std::size_t h = xs.front().value().h(), w = xs.front().value().w();
  std::vector<std::size_t> offsets, widths, ids;
  std::size_t c = 0;
  for (const auto& x : xs) {
    require_shape(x.value().rank() == 3 && x.value().h() == h && x.value().w() == w,
                  "concat_channels " + shape_string(x.value().shape()) + " vs " +
                      shape_string(xs.front().value().shape()));
    offsets.push_back(c);
    widths.push_back(x.value().c());
    ids.push_back(x.id);
    c += x.value().c();
  }
  Grid<T> y(h, w, c);
  for (std::size_t n = 0; n < xs.size(); ++n) {
    const Grid<T>& xv = xs[n].value();
    for (std::size_t p = 0; p < h * w; ++p) {
      std::copy_n(xv.data() + p * widths[n], widths[n], y.data() + p * c + offsets[n]);
    }
  }
  return tape.push(std::move(y), ids, [ids, offsets, widths, c, hw = h * w](Tape<T>& t, std::size_t self) {
    const Grid<T>& dy = t.node(self).grad;
    for (std::size_t n = 0; n < ids.size(); ++n) {
      if (!t.needs_grad(ids[n])) continue;
      T* dx = t.grad_of(ids[n]).data();
      for (std::size_t p = 0; p < hw; ++p) {
        for (std::size_t k = 0; k < widths[n]; ++k) dx[p * widths[n] + k] += dy[p * c + offsets[n] + k];
      }
    }
  });
}

namespace {

struct Tap {
  std::size_t i0, i1;
  double a;  // weight of i1
};

std::vector<Tap> resize_taps(std::size_t src, std::size_t dst) {
  std::vector<Tap> taps(dst);
  for (std::size_t t = 0; t < dst; ++t) {
    const double x = std::clamp(corner_aligned_coord(t, src, dst), 0.0, static_cast<double>(src - 1));
    const auto i0 = static_cast<std::size_t>(std::floor(x));
    taps[t] = {i0, std::min(i0 + 1, src - 1), x - static_cast<double>(i0)};
  }
  return taps;
}

}  // namespace

template <typename T>
Var<T> resize_bilinear(Var<T> x, std::size_t h, std::size_t w) {
  const Grid<T>& xv = x.value();
  require_shape(xv.rank() == 3 && h >= 1 && w >= 1, "resize_bilinear " + shape_string(xv.shape()));
  const std::size_t c = xv.c(), sw = xv.w();
  const auto ty = resize_taps(xv.h(), h), tx = resize_taps(xv.w(), w);
  Grid<T> y(h, w, c);
  for (std::size_t j = 0; j < h; ++j) {
    for (std::size_t i = 0; i < w; ++i) {
      const double ay = ty[j].a, ax = tx[i].a;
      const double w00 = (1 - ay) * (1 - ax), w01 = (1 - ay) * ax, w10 = ay * (1 - ax), w11 = ay * ax;
      const T* p00 = xv.data() + (ty[j].i0 * sw + tx[i].i0) * c;
      const T* p01 = xv.data() + (ty[j].i0 * sw + tx[i].i1) * c;
      const T* p10 = xv.data() + (ty[j].i1 * sw + tx[i].i0) * c;
      const T* p11 = xv.data() + (ty[j].i1 * sw + tx[i].i1) * c;
      T* out = y.data() + (j * w + i) * c;
      for (std::size_t k = 0; k < c; ++k) {
        out[k] = static_cast<T>(w00 * p00[k] + w01 * p01[k] + w10 * p10[k] + w11 * p11[k]);
      }
    }
  }
  const std::size_t xid = x.id;
  return x.tape->push(std::move(y), {xid}, [xid, ty, tx, c, sw, w](Tape<T>& t, std::size_t self) {
    const Grid<T>& dy = t.node(self).grad;
    T* dx = t.grad_of(xid).data();
    for (std::size_t j = 0; j < ty.size(); ++j) {
      for (std::size_t i = 0; i < tx.size(); ++i) {
        const double ay = ty[j].a, ax = tx[i].a;
        const T w00 = static_cast<T>((1 - ay) * (1 - ax)), w01 = static_cast<T>((1 - ay) * ax),
                w10 = static_cast<T>(ay * (1 - ax)), w11 = static_cast<T>(ay * ax);
        const T* g = dy.data() + (j * w + i) * c;
        T* d00 = dx + (ty[j].i0 * sw + tx[i].i0) * c;
        T* d01 = dx + (ty[j].i0 * sw + tx[i].i1) * c;
        T* d10 = dx + (ty[j].i1 * sw + tx[i].i0) * c;
        T* d11 = dx + (ty[j].i1 * sw + tx[i].i1) * c;
        for (std::size_t k = 0; k < c; ++k) {
          d00[k] += w00 * g[k];
          d01[k] += w01 * g[k];
          d10[k] += w10 * g[k];
          d11[k] += w11 * g[k];
        }
      }
    }
  });
}

template <typename T>
Var<T> upsample_bilinear_x2(Var<T> x) {
  return resize_bilinear(x, 2 * x.value().h(), 2 * x.value().w());
}

// ---------------------------------------------------------------------------
// Elementwise ops

namespace {

// dfn(x, y) returns dy/dx given input and output values.
template <typename T, typename Fwd, typename Deriv>
Var<T> unary(Var<T> x, Fwd fwd, Deriv dfn) {
  const Grid<T>& xv = x.value();
  Grid<T> y(xv.shape());
  for (std::size_t p = 0; p < y.size(); ++p) y[p] = fwd(xv[p]);
  const std::size_t xid = x.id;
  return x.tape->push(std::move(y), {xid}, [xid, dfn](Tape<T>& t, std::size_t self) {
    const auto& n = t.node(self);
    const Grid<T>& xv = t.node(xid).value;
    T* dx = t.grad_of(xid).data();
    for (std::size_t p = 0; p < n.value.size(); ++p) dx[p] += n.grad[p] * dfn(xv[p], n.value[p]);
  });
}

template <typename T>
void note_signs(Tape<T>& tape, const Grid<T>& v) {
  for (std::size_t p = 0; p < v.size(); ++p) tape.note_branch(v[p] > T(0));
}

}  // namespace

template <typename T>
Var<T> relu(Var<T> x) {
  note_signs(*x.tape, x.value());
  return unary(x, [](T v) { return v > T(0) ? v : T(0); }, [](T v, T) { return v > T(0) ? T(1) : T(0); });
}

template <typename T>
Var<T> sigmoid(Var<T> x) {
  return unary(
      x, [](T v) { return T(1) / (T(1) + std::exp(-v)); }, [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Var<T> softplus(Var<T> x) {
  return unary(
      x, [](T v) { return v > T(20) ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v)); },
      [](T v, T) { return T(1) / (T(1) + std::exp(-v)); });
}

template <typename T>
Var<T> abs(Var<T> x) {
  note_signs(*x.tape, x.value());
  return unary(
      x, [](T v) { return std::abs(v); }, [](T v, T) { return v > T(0) ? T(1) : (v < T(0) ? T(-1) : T(0)); });
}

template <typename T>
Var<T> square(Var<T> x) {
  return unary(x, [](T v) { return v * v; }, [](T v, T) { return T(2) * v; });
}

template <typename T>
Var<T> sqrt(Var<T> x) {
  return unary(
      x, [](T v) { return std::sqrt(v); }, [](T, T y) { return y > T(0) ? T(0.5) / y : T(0); });
}

template <typename T>
Var<T> exp(Var<T> x) {
  return unary(x, [](T v) { return std::exp(v); }, [](T, T y) { return y; });
}

template <typename T>
Var<T> log(Var<T> x) {
  return unary(x, [](T v) { return std::log(v); }, [](T v, T) { return T(1) / v; });
}

template <typename T>
Var<T> mul_scalar(Var<T> x, T s) {
  return unary(x, [s](T v) { return v * s; }, [s](T, T) { return s; });
}

template <typename T>
Var<T> add_scalar(Var<T> x, T s) {
  return unary(x, [s](T v) { return v + s; }, [](T, T) { return T(1); });
}

namespace {

template <typename T, typename Fwd, typename DA, typename DB>
Var<T> binary(Var<T> a, Var<T> b, const char* name, Fwd fwd, DA da, DB db) {
  require_shape(a.value().same_shape(b.value()), std::string(name) + " " + shape_string(a.value().shape()) +
                                                     " vs " + shape_string(b.value().shape()));
  const Grid<T>& av = a.value();
  const Grid<T>& bv = b.value();
  Grid<T> y(av.shape());
  for (std::size_t p = 0; p < y.size(); ++p) y[p] = fwd(av[p], bv[p]);
  const std::size_t aid = a.id, bid = b.id;
  return a.tape->push(std::move(y), {aid, bid}, [aid, bid, da, db](Tape<T>& t, std::size_t self) {
    const Grid<T>& g = t.node(self).grad;
    const Grid<T>& av = t.node(aid).value;
    const Grid<T>& bv = t.node(bid).value;
    if (t.needs_grad(aid)) {
      T* d = t.grad_of(aid).data();
      for (std::size_t p = 0; p < g.size(); ++p) d[p] += g[p] * da(av[p], bv[p]);
    }
    if (t.needs_grad(bid)) {
      T* d = t.grad_of(bid).data();
      for (std::size_t p = 0; p < g.size(); ++p) d[p] += g[p] * db(av[p], bv[p]);
    }
  });
}

}  // namespace

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
  return binary(
      a, b, "add", [](T x, T y) { return x + y; }, [](T, T) { return T(1); }, [](T, T) { return T(1); });
}

template <typename T>
Var<T> sub(Var<T> a, Var<T> b) {
  return binary(
      a, b, "sub", [](T x, T y) { return x - y; }, [](T, T) { return T(1); }, [](T, T) { return T(-1); });
}

template <typename T>
Var<T> mul(Var<T> a, Var<T> b) {
  return binary(
      a, b, "mul", [](T x, T y) { return x * y; }, [](T, T y) { return y; }, [](T x, T) { return x; });
}

template <typename T>
Var<T> normalize_channels(Var<T> x, T eps) {
  const Grid<T>& xv = x.value();
  require_shape(xv.rank() == 3, "normalize_channels " + shape_string(xv.shape()));
  const std::size_t c = xv.c(), n = xv.h() * xv.w();
  Grid<T> y(xv.shape());
  std::vector<T> inv_norm(n);
  for (std::size_t p = 0; p < n; ++p) {
    T s = eps;
    for (std::size_t k = 0; k < c; ++k) s += xv[p * c + k] * xv[p * c + k];
    inv_norm[p] = T(1) / std::sqrt(s);
    for (std::size_t k = 0; k < c; ++k) y[p * c + k] = xv[p * c + k] * inv_norm[p];
  }
  const std::size_t xid = x.id;
  return x.tape->push(std::move(y), {xid}, [xid, c, n, inv_norm = std::move(inv_norm)](Tape<T>& t, std::size_t self) {
    const auto& node = t.node(self);
    T* dx = t.grad_of(xid).data();
    // d(x / r) = (g - y (y . g)) / r
    for (std::size_t p = 0; p < n; ++p) {
      const T* y = node.value.data() + p * c;
      const T* g = node.grad.data() + p * c;
      T dot = 0;
      for (std::size_t k = 0; k < c; ++k) dot += y[k] * g[k];
      for (std::size_t k = 0; k < c; ++k) dx[p * c + k] += (g[k] - y[k] * dot) * inv_norm[p];
    }
  });
}

template <typename T>
Var<T> sum_all(Var<T> x) {
  T s = 0;
  for (auto v : x.value().values()) s += v;
  const std::size_t xid = x.id;
  return x.tape->push(Grid<T>::scalar(s), {xid}, [xid](Tape<T>& t, std::size_t self) {
    const T g = t.node(self).grad[0];
    for (auto& d : t.grad_of(xid).values()) d += g;
  });
}

template <typename T>
Var<T> weighted_sum(const std::vector<Var<T>>& terms, const std::vector<T>& weights) {
  if (terms.empty() || terms.size() != weights.size()) {
    throw std::invalid_argument("weighted_sum: terms and weights must be non-empty and equally long");
  }
  T s = 0;
  std::vector<std::size_t> ids;
  for (std::size_t n = 0; n < terms.size(); ++n) {
    require_shape(terms[n].value().size() == 1, "weighted_sum terms must be scalars");
    s += weights[n] * terms[n].value()[0];
    ids.push_back(terms[n].id);
  }
  return terms.front().tape->push(Grid<T>::scalar(s), ids, [ids, weights](Tape<T>& t, std::size_t self) {
    const T g = t.node(self).grad[0];
    for (std::size_t n = 0; n < ids.size(); ++n) {
      if (t.needs_grad(ids[n])) t.grad_of(ids[n])[0] += weights[n] * g;
    }
  });
}

#define CAMCONV_INSTANTIATE_AD(T)                                                                 \
  template Var<T> conv2d(Var<T>, Var<T>, std::optional<Var<T>>, int, Padding);                  \
  template Var<T> concat_channels(const std::vector<Var<T>>&);                                  \
  template Var<T> resize_bilinear(Var<T>, std::size_t, std::size_t);                            \
  template Var<T> upsample_bilinear_x2(Var<T>);                                                 \
  template Var<T> relu(Var<T>);                                                                 \
  template Var<T> sigmoid(Var<T>);                                                              \
  template Var<T> softplus(Var<T>);                                                             \
  template Var<T> abs(Var<T>);                                                                  \
  template Var<T> square(Var<T>);                                                               \
  template Var<T> sqrt(Var<T>);                                                                 \
  template Var<T> exp(Var<T>);                                                                  \
  template Var<T> log(Var<T>);                                                                  \
  template Var<T> add(Var<T>, Var<T>);                                                          \
  template Var<T> sub(Var<T>, Var<T>);                                                          \
  template Var<T> mul(Var<T>, Var<T>);                                                          \
  template Var<T> mul_scalar(Var<T>, T);                                                        \
  template Var<T> add_scalar(Var<T>, T);                                                        \
  template Var<T> normalize_channels(Var<T>, T);                                                \
  template Var<T> sum_all(Var<T>);                                                              \
  template Var<T> weighted_sum(const std::vector<Var<T>>&, const std::vector<T>&);

CAMCONV_INSTANTIATE_AD(float)
CAMCONV_INSTANTIATE_AD(double)

// ---------------------------------------------------------------------------
// Finite-difference check

GradCheckResult check_gradients(const LossBuilder& build, const std::vector<GridD>& inputs, double step,
                                double floor, std::size_t max_elements_per_input) {
  auto evaluate = [&](const std::vector<GridD>& xs, std::uint64_t* branch) {
    Tape<double> tape;
    std::vector<Var<double>> vars;
    for (const auto& x : xs) vars.push_back(tape.constant(x));
    const double v = build(tape, vars).value()[0];
    if (branch) *branch = tape.branch_hash();
    return v;
  };

  Tape<double> tape;
  std::vector<Var<double>> vars;
  for (const auto& x : inputs) vars.push_back(tape.variable(x));
  Var<double> loss = build(tape, vars);
  const std::uint64_t base_branch = tape.branch_hash();
  tape.backward(loss);
  // Central differences cannot resolve gradients much below eps * |L| / step.
  const double scaled_floor = floor * std::max(1.0, std::abs(loss.value()[0]));

  GradCheckResult res;
  std::vector<GridD> xs = inputs;
  for (std::size_t n = 0; n < inputs.size(); ++n) {
    const GridD& analytic = vars[n].grad();
    const std::size_t count = inputs[n].size();
    const std::size_t stride =
        max_elements_per_input && count > max_elements_per_input ? (count + max_elements_per_input - 1) / max_elements_per_input : 1;
    for (std::size_t e = 0; e < count; e += stride) {
      const double orig = xs[n][e];
      std::uint64_t bp = 0, bm = 0;
      xs[n][e] = orig + step;
      const double fp = evaluate(xs, &bp);
      xs[n][e] = orig - step;
      const double fm = evaluate(xs, &bm);
      xs[n][e] = orig;
      if (bp != base_branch || bm != base_branch) {
        ++res.skipped_kinks;
        continue;
      }
      const double numeric = (fp - fm) / (2.0 * step);
      const double a = analytic[e];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), scaled_floor});
      res.max_rel_error = std::max(res.max_rel_error, rel);
      ++res.checked;
    }
  }
  return res;
}

}  // namespace camconv::ad

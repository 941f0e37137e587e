#include "camconv/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace camconv {

namespace {

void check_mask(const Mask& mask, std::size_t h, std::size_t w, const char* op) {
  if (mask.h != h || mask.w != w) throw std::invalid_argument(std::string(op) + ": mask shape mismatch");
}

template <typename T>
void check_pair(const Grid<T>& pred, const Grid<T>& gt, const Mask& mask, const char* op) {
  require_shape(pred.rank() == 3 && pred.same_shape(gt),
                std::string(op) + " " + shape_string(pred.shape()) + " vs " + shape_string(gt.shape()));
  check_mask(mask, pred.h(), pred.w(), op);
}

template <typename T>
T reduction_scale(Reduction r, std::size_t n, const char* op) {
  if (n == 0) throw std::invalid_argument(std::string(op) + ": empty validity mask");
  return r == Reduction::Mean ? T(1) / static_cast<T>(n) : T(1);
}

// Per-pixel vector distance sum_p |pred_p - gt_p|_2 over channels; with one
// channel this is the L1 loss.
template <typename T>
ad::Var<T> masked_distance(ad::Var<T> pred, const Grid<T>& gt, const Mask& mask, Reduction r, const char* op) {
  const Grid<T>& pv = pred.value();
  check_pair(pv, gt, mask, op);
  const std::size_t c = pv.c(), n = pv.h() * pv.w();
  const T scale = reduction_scale<T>(r, mask.count(), op);
  T total = 0;
  for (std::size_t p = 0; p < n; ++p) {
    if (!mask.bits[p]) continue;
    T s = 0;
    for (std::size_t k = 0; k < c; ++k) {
      const T e = pv[p * c + k] - gt[p * c + k];
      s += e * e;
    }
    if (c == 1) {
      pred.tape->note_branch(pv[p] > gt[p]);
      total += std::abs(pv[p] - gt[p]);
    } else {
      pred.tape->note_branch(s > T(0));
      total += std::sqrt(s);
    }
  }
  const std::size_t pid = pred.id;
  return pred.tape->push(Grid<T>::scalar(total * scale), {pid}, [pid, gt, mask, c, n, scale](ad::Tape<T>& t, std::size_t self) {
    const T g = t.node(self).grad[0] * scale;
    const Grid<T>& pv = t.node(pid).value;
    T* d = t.grad_of(pid).data();
    for (std::size_t p = 0; p < n; ++p) {
      if (!mask.bits[p]) continue;
      if (c == 1) {
        const T e = pv[p] - gt[p];
        d[p] += g * (e > T(0) ? T(1) : (e < T(0) ? T(-1) : T(0)));
        continue;
      }
      T s = 0;
      for (std::size_t k = 0; k < c; ++k) {
        const T e = pv[p * c + k] - gt[p * c + k];
        s += e * e;
      }
      if (s <= T(0)) continue;
      const T inv = g / std::sqrt(s);
      for (std::size_t k = 0; k < c; ++k) d[p * c + k] += inv * (pv[p * c + k] - gt[p * c + k]);
    }
  });
}

// (a - b) / max(|a + b|, eps) and its partials.
template <typename T>
struct SigTerm {
  T value, d_a, d_b;
};

template <typename T>
SigTerm<T> sig_term(T a, T b) {
  const T s = a + b;
  const T abs_s = std::abs(s);
  const T eps = static_cast<T>(kSigEpsilon);
  if (abs_s < eps) return {(a - b) / eps, T(1) / eps, T(-1) / eps};
  const T inv = T(1) / abs_s;
  const T v = (a - b) * inv;
  const T sign = s > T(0) ? T(1) : T(-1);
  const T dd = -v * sign * inv;  // derivative through the denominator
  return {v, inv + dd, -inv + dd};
}

}  // namespace

template <typename T>
SigGradient<T> sig_operator(const Grid<T>& d, int h, const Mask& mask) {
  require_shape(d.rank() == 3 && d.c() == 1, "sig_operator expects a single-channel map");
  check_mask(mask, d.h(), d.w(), "sig_operator");
  if (h < 1) throw std::invalid_argument("sig_operator: spacing must be >= 1");
  const std::size_t H = d.h(), W = d.w(), s = static_cast<std::size_t>(h);
  SigGradient<T> out{Grid<T>(H, W, 2), Mask(H, W, false), Mask(H, W, false)};
  for (std::size_t j = 0; j < H; ++j) {
    for (std::size_t i = 0; i < W; ++i) {
      if (!mask(j, i)) continue;
      if (i + s < W && mask(j, i + s)) {
        out.values.at(j, i, 0) = sig_term(d.at(j, i + s), d.at(j, i)).value;
        out.valid_x.set(j, i, true);
      }
      if (j + s < H && mask(j + s, i)) {
        out.values.at(j, i, 1) = sig_term(d.at(j + s, i), d.at(j, i)).value;
        out.valid_y.set(j, i, true);
      }
    }
  }
  return out;
}

template <typename T>
ad::Var<T> depth_loss(ad::Var<T> pred, const Grid<T>& gt, const Mask& mask, Reduction r) {
  require_shape(pred.value().rank() == 3 && pred.value().c() == 1, "depth_loss expects a single-channel map");
  return masked_distance(pred, gt, mask, r, "depth_loss");
}

template <typename T>
ad::Var<T> confidence_loss(ad::Var<T> pred, const Grid<T>& target, const Mask& mask, Reduction r) {
  require_shape(pred.value().rank() == 3 && pred.value().c() == 1, "confidence_loss expects a single-channel map");
  return masked_distance(pred, target, mask, r, "confidence_loss");
}

template <typename T>
ad::Var<T> normal_loss(ad::Var<T> pred, const Grid<T>& gt, const Mask& mask, Reduction r) {
  require_shape(pred.value().rank() == 3 && pred.value().c() == 3, "normal_loss expects a 3-channel map");
  return masked_distance(pred, gt, mask, r, "normal_loss");
}

template <typename T>
ad::Var<T> gradient_loss(ad::Var<T> pred, const Grid<T>& gt, const Mask& mask, Reduction r) {
  const Grid<T>& pv = pred.value();
  check_pair(pv, gt, mask, "gradient_loss");
  require_shape(pv.c() == 1, "gradient_loss expects a single-channel map");
  const std::size_t H = pv.h(), W = pv.w();

  // One record per contributing (spacing, pixel).
  struct Term {
    std::size_t p, px, py;  // pixel, x-neighbor, y-neighbor (index or npos)
    T ex, ey, norm;
  };
  constexpr std::size_t npos = static_cast<std::size_t>(-1);
  std::vector<Term> terms;
  T total = 0;
  for (int h : kGradientSpacings) {
    const auto s = static_cast<std::size_t>(h);
    for (std::size_t j = 0; j < H; ++j) {
      for (std::size_t i = 0; i < W; ++i) {
        if (!mask(j, i)) continue;
        const std::size_t p = j * W + i;
        Term t{p, npos, npos, 0, 0, 0};
        if (i + s < W && mask(j, i + s)) {
          t.px = p + s;
          t.ex = sig_term(pv[t.px], pv[p]).value - sig_term(gt[t.px], gt[p]).value;
        }
        if (j + s < H && mask(j + s, i)) {
          t.py = p + s * W;
          t.ey = sig_term(pv[t.py], pv[p]).value - sig_term(gt[t.py], gt[p]).value;
        }
        if (t.px == npos && t.py == npos) continue;
        t.norm = std::sqrt(t.ex * t.ex + t.ey * t.ey);
        pred.tape->note_branch(t.norm > T(0));
        total += t.norm;
        terms.push_back(t);
      }
    }
  }
  const T scale = reduction_scale<T>(r, terms.size(), "gradient_loss");
  const std::size_t pid = pred.id;
  return pred.tape->push(Grid<T>::scalar(total * scale), {pid},
                         [pid, terms = std::move(terms), scale](ad::Tape<T>& t, std::size_t self) {
                           const T g = t.node(self).grad[0] * scale;
                           const Grid<T>& pv = t.node(pid).value;
                           T* d = t.grad_of(pid).data();
                           for (const auto& term : terms) {
                             if (term.norm <= T(0)) continue;
                             const T inv = g / term.norm;
                             if (term.px != npos) {
                               const auto st = sig_term(pv[term.px], pv[term.p]);
                               d[term.px] += inv * term.ex * st.d_a;
                               d[term.p] += inv * term.ex * st.d_b;
                             }
                             if (term.py != npos) {
                               const auto st = sig_term(pv[term.py], pv[term.p]);
                               d[term.py] += inv * term.ey * st.d_a;
                               d[term.p] += inv * term.ey * st.d_b;
                             }
                           }
                         });
}

template <typename T>
ad::Var<T> eigen_scale_invariant_loss(ad::Var<T> pred, const Grid<T>& gt, const Mask& mask) {
  const Grid<T>& pv = pred.value();
  check_pair(pv, gt, mask, "eigen_scale_invariant_loss");
  const std::size_t n = mask.count();
  if (n == 0) throw std::invalid_argument("eigen_scale_invariant_loss: empty validity mask");
  T sum = 0, sum_sq = 0;
  for (std::size_t p = 0; p < pv.size(); ++p) {
    if (!mask.bits[p]) continue;
    const T z = std::log(pv[p]) - std::log(gt[p]);
    sum += z;
    sum_sq += z * z;
  }
  const T nn = static_cast<T>(n);
  const T mean = sum / nn;
  const T value = sum_sq / nn - mean * mean;
  const std::size_t pid = pred.id;
  return pred.tape->push(Grid<T>::scalar(value), {pid}, [pid, gt, mask, mean, nn](ad::Tape<T>& t, std::size_t self) {
    const T g = t.node(self).grad[0];
    const Grid<T>& pv = t.node(pid).value;
    T* d = t.grad_of(pid).data();
    for (std::size_t p = 0; p < pv.size(); ++p) {
      if (!mask.bits[p]) continue;
      const T z = std::log(pv[p]) - std::log(gt[p]);
      d[p] += g * T(2) * (z - mean) / (nn * pv[p]);
    }
  });
}

template <typename T>
ad::Var<T> total_loss(const std::vector<ScaleLosses<T>>& scales, const LossWeights& w) {
  if (scales.empty()) throw std::invalid_argument("total_loss: no scales");
  std::vector<ad::Var<T>> terms;
  std::vector<T> weights;
  for (const auto& s : scales) {
    terms.insert(terms.end(), {s.depth, s.gradient, s.confidence});
    weights.insert(weights.end(), {static_cast<T>(w.depth), static_cast<T>(w.gradient), static_cast<T>(w.confidence)});
    if (s.normal) {
      terms.push_back(*s.normal);
      weights.push_back(static_cast<T>(w.normal));
    }
  }
  return ad::weighted_sum(terms, weights);
}

template <typename T>
double depth_loss_value(const Grid<T>& pred, const Grid<T>& gt, const Mask& mask, Reduction r) {
  ad::Tape<T> t;
  return depth_loss(t.constant(pred), gt, mask, r).value()[0];
}

template <typename T>
double gradient_loss_value(const Grid<T>& pred, const Grid<T>& gt, const Mask& mask, Reduction r) {
  ad::Tape<T> t;
  return gradient_loss(t.constant(pred), gt, mask, r).value()[0];
}

template <typename T>
double confidence_loss_value(const Grid<T>& pred, const Grid<T>& target, const Mask& mask, Reduction r) {
  ad::Tape<T> t;
  return confidence_loss(t.constant(pred), target, mask, r).value()[0];
}

template <typename T>
double normal_loss_value(const Grid<T>& pred, const Grid<T>& gt, const Mask& mask, Reduction r) {
  ad::Tape<T> t;
  return normal_loss(t.constant(pred), gt, mask, r).value()[0];
}

template <typename T>
double eigen_scale_invariant_loss_value(const Grid<T>& pred, const Grid<T>& gt, const Mask& mask) {
  ad::Tape<T> t;
  return eigen_scale_invariant_loss(t.constant(pred), gt, mask).value()[0];
}

double total_loss_value(double depth, double gradient, double confidence, double normal, const LossWeights& w) {
  return w.depth * depth + w.gradient * gradient + w.confidence * confidence + w.normal * normal;
}

#define CAMCONV_INSTANTIATE_LOSSES(T)                                                                     \
  template SigGradient<T> sig_operator(const Grid<T>&, int, const Mask&);                                \
  template ad::Var<T> depth_loss(ad::Var<T>, const Grid<T>&, const Mask&, Reduction);                    \
  template ad::Var<T> gradient_loss(ad::Var<T>, const Grid<T>&, const Mask&, Reduction);                 \
  template ad::Var<T> confidence_loss(ad::Var<T>, const Grid<T>&, const Mask&, Reduction);               \
  template ad::Var<T> normal_loss(ad::Var<T>, const Grid<T>&, const Mask&, Reduction);                   \
  template ad::Var<T> eigen_scale_invariant_loss(ad::Var<T>, const Grid<T>&, const Mask&);               \
  template ad::Var<T> total_loss(const std::vector<ScaleLosses<T>>&, const LossWeights&);                \
  template double depth_loss_value(const Grid<T>&, const Grid<T>&, const Mask&, Reduction);              \
  template double gradient_loss_value(const Grid<T>&, const Grid<T>&, const Mask&, Reduction);           \
  template double confidence_loss_value(const Grid<T>&, const Grid<T>&, const Mask&, Reduction);         \
  template double normal_loss_value(const Grid<T>&, const Grid<T>&, const Mask&, Reduction);             \
  template double eigen_scale_invariant_loss_value(const Grid<T>&, const Grid<T>&, const Mask&);

CAMCONV_INSTANTIATE_LOSSES(float)
CAMCONV_INSTANTIATE_LOSSES(double)

}  // namespace camconv

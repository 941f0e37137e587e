#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

#include "camconv/grid.hpp"

namespace camconv::ad {

template <typename T>
class Tape;

// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
template <typename T>
struct Var {
  Tape<T>* tape = nullptr;
  std::size_t id = 0;

  const Grid<T>& value() const;
  const Grid<T>& grad() const;
  const Shape& shape() const { return value().shape(); }
};

class GraphError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Reverse-mode tape. Nodes are appended in evaluation order, so parents always
// precede children and reverse order is a valid backward schedule.
//
// A tape is single-owner; independent tapes may run on independent threads.
template <typename T>
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  struct Node {
    Grid<T> value;
    Grid<T> grad;
    bool requires_grad = false;
    std::vector<std::size_t> parents;
    BackwardFn backward;
  };

  Var<T> constant(Grid<T> value);
  Var<T> variable(Grid<T> value);
  // Records an op result. The node requires grad iff any parent does; otherwise
  // the backward closure is dropped.
  Var<T> push(Grid<T> value, std::vector<std::size_t> parents, BackwardFn backward);

  // Populates grad on every reachable requires-grad node. Throws GraphError on
  // a non-scalar root, on a malformed graph, or when called twice without reset_grad().
  void backward(Var<T> loss);
  void reset_grad();

  Node& node(std::size_t id) { return nodes_.at(id); }
  const Node& node(std::size_t id) const { return nodes_.at(id); }
  std::size_t size() const { return nodes_.size(); }

  // Accumulates into a parent's gradient buffer during backward.
  Grid<T>& grad_of(std::size_t id) { return nodes_[id].grad; }
  bool needs_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  // Running fingerprint of the branch taken by every non-smooth op (relu, abs,
  // norms at zero). Gradient checks skip perturbations that change it.
  void note_branch(bool b) { branch_hash_ = (branch_hash_ ^ (b ? 0x9e3779b97f4a7c15ULL : 0x7f4a7c159e3779b9ULL)) * 0x100000001b3ULL; }
  std::uint64_t branch_hash() const { return branch_hash_; }

 private:
  std::vector<Node> nodes_;
  bool backward_done_ = false;
  std::uint64_t branch_hash_ = 0xcbf29ce484222325ULL;
};

template <typename T>
const Grid<T>& Var<T>::value() const {
  return tape->node(id).value;
}
template <typename T>
const Grid<T>& Var<T>::grad() const {
  return tape->node(id).grad;
}

enum class Padding { Same, Valid };

// x: (h, w, cin); kernel: (kh, kw, cin, cout); bias: (cout) or absent.
// Same padding follows the ceil(h / stride) output rule with the extra pad on
// the bottom/right.
template <typename T>
Var<T> conv2d(Var<T> x, Var<T> kernel, std::optional<Var<T>> bias, int stride, Padding padding);

template <typename T>
Var<T> concat_channels(const std::vector<Var<T>>& xs);
// Corner-aligned bilinear resize to (h, w); upsample_bilinear_x2 doubles both extents.
template <typename T>
Var<T> resize_bilinear(Var<T> x, std::size_t h, std::size_t w);
template <typename T>
Var<T> upsample_bilinear_x2(Var<T> x);

template <typename T> Var<T> relu(Var<T> x);
template <typename T> Var<T> sigmoid(Var<T> x);
template <typename T> Var<T> softplus(Var<T> x);
template <typename T> Var<T> abs(Var<T> x);
template <typename T> Var<T> square(Var<T> x);
template <typename T> Var<T> sqrt(Var<T> x);
template <typename T> Var<T> exp(Var<T> x);
template <typename T> Var<T> log(Var<T> x);
template <typename T> Var<T> add(Var<T> a, Var<T> b);
template <typename T> Var<T> sub(Var<T> a, Var<T> b);
template <typename T> Var<T> mul(Var<T> a, Var<T> b);
template <typename T> Var<T> mul_scalar(Var<T> x, T s);
template <typename T> Var<T> add_scalar(Var<T> x, T s);
// Per-pixel L2 normalization across channels: x / sqrt(|x|^2 + eps).
template <typename T> Var<T> normalize_channels(Var<T> x, T eps = T(1e-12));
// Sum of every element as a (1, 1, 1) scalar.
template <typename T> Var<T> sum_all(Var<T> x);
// Scalar weighted sum of (1, 1, 1) terms.
template <typename T> Var<T> weighted_sum(const std::vector<Var<T>>& terms, const std::vector<T>& weights);

// Output size for one spatial axis.
std::size_t conv_output_size(std::size_t in, std::size_t k, int stride, Padding padding);
// Leading (top/left) zero padding for one spatial axis.
std::size_t conv_pad_before(std::size_t in, std::size_t k, int stride, Padding padding);

// Result of comparing analytic and central finite-difference gradients.
struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  // Perturbations skipped because they crossed a non-smooth branch.
  std::size_t skipped_kinks = 0;
};

// Builds a scalar loss from leaf variables on a fresh tape.
using LossBuilder = std::function<Var<double>(Tape<double>&, const std::vector<Var<double>>&)>;

// Relative error per element is |a - n| / max(|a|, |n|, floor * max(1, |L|)),
// L the loss at the unperturbed point.
GradCheckResult check_gradients(const LossBuilder& build, const std::vector<GridD>& inputs, double step = 1e-5,
                                double floor = 1e-7, std::size_t max_elements_per_input = 0);

}  // namespace camconv::ad

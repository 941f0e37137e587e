#include <cmath>

#include <gtest/gtest.h>

#include "camconv/autodiff.hpp"
#include "camconv/gradcheck.hpp"
#include "camconv/rng.hpp"
#include "oracles.hpp"

using namespace camconv;
using namespace camconv::ad;

namespace {

GridD random(Shape s, std::uint64_t seed) {
  GridD g(std::move(s));
  Rng rng(seed);
  for (auto& v : g.values()) v = rng.uniform(-1, 1);
  return g;
}

oracle::Image image(const GridD& g) { return {g.h(), g.w(), g.c(), std::vector<double>(g.data(), g.data() + g.size())}; }

}  // namespace

TEST(Conv2d, IdentityKernel) {
  Tape<double> t;
  const GridD x = random({4, 5, 3}, 1);
  GridD k(Shape{1, 1, 3, 3});
  for (std::size_t c = 0; c < 3; ++c) k[c * 3 + c] = 1.0;
  EXPECT_EQ(conv2d(t.constant(x), t.constant(k), std::optional<Var<double>>{}, 1, Padding::Same).value(), x);
}

TEST(Conv2d, OnesKernelOnConstant) {
  Tape<double> t;
  const auto y = conv2d(t.constant(GridD(5, 5, 1, 2.0)), t.constant(GridD(Shape{3, 3, 1, 1}, 1.0)), std::optional<Var<double>>{}, 1,
                        Padding::Same);
  EXPECT_EQ(y.value().at(2, 2, 0), 18.0);
  EXPECT_EQ(y.value().at(0, 0, 0), 8.0);
}

TEST(Conv2d, MatchesNestedLoopOracle) {
  for (int stride : {1, 2, 3}) {
    for (bool same : {true, false}) {
      for (auto [h, w] : {std::pair<std::size_t, std::size_t>{5, 5}, {8, 6}, {7, 9}}) {
        Tape<double> t;
        const GridD x = random({h, w, 3}, 2 + h), k = random({3, 3, 3, 4}, 3), b = random({4}, 4);
        const auto y = conv2d(t.constant(x), t.constant(k), std::optional(t.constant(b)), stride,
                              same ? Padding::Same : Padding::Valid);
        const auto ref = oracle::conv2d(image(x), std::vector<double>(k.data(), k.data() + k.size()), 3, 3, 4,
                                        std::vector<double>(b.data(), b.data() + 4), stride, same);
        ASSERT_EQ(y.value().h(), ref.h);
        ASSERT_EQ(y.value().w(), ref.w);
        for (std::size_t p = 0; p < ref.v.size(); ++p) EXPECT_NEAR(y.value()[p], ref.v[p], 1e-12);
      }
    }
  }
}

TEST(Conv2d, ShapeErrors) {
  Tape<double> t;
  EXPECT_THROW(conv2d(t.constant(GridD(4, 4, 2)), t.constant(GridD(Shape{3, 3, 3, 1})), std::optional<Var<double>>{}, 1, Padding::Same),
               std::invalid_argument);
  EXPECT_THROW(conv2d(t.constant(GridD(4, 4, 2)), t.constant(GridD(Shape{3, 3, 2, 1})), std::optional<Var<double>>{}, 0, Padding::Same),
               std::invalid_argument);
  EXPECT_THROW(conv2d(t.constant(GridD(4, 4, 2)), t.constant(GridD(Shape{3, 3, 2, 2})),
                      std::optional(t.constant(GridD(Shape{3}))), 1, Padding::Same),
               std::invalid_argument);
}

TEST(Ops, ReluValues) {
  Tape<double> t;
  GridD x(1, 2, 1);
  x[0] = -1;
  x[1] = 2;
  const auto y = relu(t.constant(x));
  EXPECT_EQ(y.value()[0], 0.0);
  EXPECT_EQ(y.value()[1], 2.0);
}

TEST(Ops, ConcatOrder) {
  Tape<double> t;
  const GridD a(3, 3, 2, 1.0), b(3, 3, 6, 2.0);
  const auto y = concat_channels<double>({t.constant(a), t.constant(b)});
  ASSERT_EQ(y.value().c(), 8u);
  for (std::size_t k = 0; k < 8; ++k) EXPECT_EQ(y.value().at(1, 2, k), k < 2 ? 1.0 : 2.0);
  EXPECT_THROW(concat_channels<double>({t.constant(a), t.constant(GridD(2, 3, 1))}), std::invalid_argument);
}

TEST(Ops, UpsampleUsesCornerAlignedBilinear) {
  Tape<double> t;
  const GridD x = random({3, 4, 2}, 9);
  const auto y = upsample_bilinear_x2(t.constant(x));
  ASSERT_EQ(y.value().h(), 6u);
  ASSERT_EQ(y.value().w(), 8u);
  const auto img = image(x);
  for (std::size_t j = 0; j < 6; ++j)
    for (std::size_t i = 0; i < 8; ++i)
      for (std::size_t k = 0; k < 2; ++k) EXPECT_NEAR(y.value().at(j, i, k), oracle::bilinear(img, 6, 8, j, i, k), 1e-12);
}

TEST(Ops, ElementwiseShapeMismatch) {
  Tape<double> t;
  EXPECT_THROW(add(t.constant(GridD(2, 2, 1)), t.constant(GridD(2, 3, 1))), std::invalid_argument);
  EXPECT_THROW(mul(t.constant(GridD(2, 2, 1)), t.constant(GridD(2, 2, 2))), std::invalid_argument);
}

TEST(Backward, SumGivesOnes) {
  Tape<double> t;
  auto x = t.variable(random({3, 4, 2}, 5));
  t.backward(sum_all(x));
  for (double g : x.grad().values()) EXPECT_EQ(g, 1.0);
}

TEST(Backward, SumOfSquaresGivesTwoX) {
  Tape<double> t;
  const GridD v = random({3, 4, 2}, 6);
  auto x = t.variable(v);
  t.backward(sum_all(square(x)));
  for (std::size_t p = 0; p < v.size(); ++p) EXPECT_EQ(x.grad()[p], 2 * v[p]);
}

TEST(Backward, Errors) {
  Tape<double> t;
  auto x = t.variable(random({2, 2, 1}, 7));
  EXPECT_THROW(t.backward(x), GraphError);  // not a scalar
  auto l = sum_all(x);
  t.backward(l);
  EXPECT_THROW(t.backward(l), GraphError);  // repeated without reset
  t.reset_grad();
  EXPECT_NO_THROW(t.backward(l));
}

TEST(Backward, LinearInLosses) {
  const GridD v = random({4, 4, 1}, 8);
  auto grad_of = [&](int which) {
    Tape<double> t;
    auto x = t.variable(v);
    const auto a = sum_all(square(x));
    const auto b = sum_all(exp(x));
    t.backward(which == 0 ? a : which == 1 ? b : add(a, b));
    return x.grad();
  };
  const auto ga = grad_of(0), gb = grad_of(1), gs = grad_of(2);
  for (std::size_t p = 0; p < v.size(); ++p) EXPECT_NEAR(gs[p], ga[p] + gb[p], 1e-12);
}

TEST(Backward, ConstantsReceiveNoGradient) {
  Tape<double> t;
  auto c = t.constant(random({2, 2, 1}, 9));
  auto x = t.variable(random({2, 2, 1}, 10));
  auto l = sum_all(mul(c, x));
  t.backward(l);
  EXPECT_FALSE(t.needs_grad(c.id));
  EXPECT_TRUE(t.needs_grad(x.id));
}

TEST(Backward, Deterministic) {
  auto run = [] {
    Tape<float> t;
    auto x = t.variable(random({6, 6, 2}, 11).cast<float>());
    auto k = t.variable(random({3, 3, 2, 3}, 12).cast<float>());
    auto y = sum_all(square(relu(conv2d(x, k, std::optional<Var<float>>{}, 2, Padding::Same))));
    t.backward(y);
    return std::pair{x.grad(), k.grad()};
  };
  EXPECT_EQ(run(), run());
}

TEST(GradCheck, SkipsPerturbationsThatCrossKinks) {
  GridD x(1, 3, 1);
  x[0] = 0.5;
  x[1] = 2e-6;  // x - step lands on the other side of the kink
  x[2] = -0.7;
  const auto r = check_gradients([](Tape<double>&, const std::vector<Var<double>>& in) { return sum_all(relu(in[0])); },
                                 {x}, 1e-5);
  EXPECT_EQ(r.skipped_kinks, 1u);
  EXPECT_EQ(r.checked, 2u);
  EXPECT_LT(r.max_rel_error, 1e-9);
}

TEST(GradCheck, DetectsAWrongGradient) {
  // log(x) evaluated through exp(-log) has the right gradient; a builder that
  // differentiates one function and evaluates another must fail the check.
  int calls = 0;
  const auto r = check_gradients(
      [&](Tape<double>&, const std::vector<Var<double>>& in) {
        ++calls;
        return calls == 1 ? sum_all(square(in[0])) : sum_all(mul_scalar(square(in[0]), 1.1));
      },
      {random({2, 2, 1}, 13)});
  EXPECT_GT(r.max_rel_error, 0.05);
}

TEST(GradCheck, EveryPrimitivePasses) {
  for (const auto& e : run_gradient_suite(false)) {
    if (e.name.rfind("network", 0) == 0) continue;
    if (e.name.find("loss") != std::string::npos) continue;
    EXPECT_TRUE(e.pass) << e.name << " max_rel " << e.result.max_rel_error;
    EXPECT_GT(e.result.checked, 0u) << e.name;
  }
}

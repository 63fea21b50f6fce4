#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "tensor.hpp"

using namespace srforge;

namespace {

template <typename T>
double max_abs_diff(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  REQUIRE(a.shape() == b.shape());
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    worst = std::max(worst, std::fabs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
  return worst;
}

}  // namespace

TEST_CASE("conv2d matches the direct loop for assorted geometries") {
  std::mt19937_64 rng(11);
  struct Case {
    std::size_t cin, cout, k, stride, pad, groups, h, w;
  };
  const Case cases[] = {
      {1, 1, 3, 1, 1, 1, 5, 5},   {3, 4, 3, 1, 1, 1, 7, 6},  {8, 8, 3, 1, 1, 4, 6, 6},
      {4, 6, 5, 2, 2, 2, 9, 11},  {2, 3, 1, 1, 0, 1, 4, 4},  {16, 32, 3, 2, 1, 1, 28, 28},
      {64, 64, 3, 1, 1, 32, 8, 8}, {3, 2, 3, 3, 0, 1, 10, 10},
  };
  for (const Case& c : cases) {
    ConvSpec s{c.cin, c.cout, c.k, c.k, c.stride, c.pad, c.groups};
    TensorD x({2, c.cin, c.h, c.w});
    TensorD w(s.weight_shape());
    oracle::fill_uniform(x, rng, -1, 1);
    oracle::fill_uniform(w, rng, -1, 1);
    std::vector<double> bias(c.cout);
    for (auto& b : bias) b = std::uniform_real_distribution<double>(-1, 1)(rng);

    const TensorD got = conv2d_forward<double>(x, w, bias, s);
    const TensorD want = oracle::conv2d(x, w, bias, s);
    CHECK(max_abs_diff(got, want) < 1e-10);

    const TensorD nobias = conv2d_forward<double>(x, w, {}, s);
    CHECK(max_abs_diff(nobias, oracle::conv2d(x, w, std::vector<double>{}, s)) < 1e-10);
  }
}

TEST_CASE("float conv agrees with the double oracle to float precision") {
  std::mt19937_64 rng(5);
  ConvSpec s{16, 16, 3, 3, 1, 1, 4};
  Tensor x({3, 16, 12, 12});
  Tensor w(s.weight_shape());
  oracle::fill_uniform(x, rng, 0, 1);
  oracle::fill_uniform(w, rng, -0.2, 0.2);
  const Tensor got = conv2d_forward<float>(x, w, {}, s);
  const Tensor want = oracle::conv2d(x, w, std::vector<float>{}, s);
  CHECK(max_abs_diff(got, want) < 1e-4);
}

TEST_CASE("conv spec validation and shapes") {
  ConvSpec bad{6, 4, 3, 3, 1, 1, 4};
  CHECK_THROWS_AS(bad.validate(), Error);
  ConvSpec ok{8, 4, 3, 3, 2, 1, 2};
  CHECK_NOTHROW(ok.validate());
  CHECK(ok.output_shape({1, 8, 9, 9}) == Shape{1, 4, 5, 5});
  CHECK(ok.weight_shape() == Shape{4, 4, 3, 3});
  CHECK(ok.fan_in() == 36);
}

TEST_CASE("mse loss is halved and its gradient is (pred - target) / N") {
  TensorD p({1, 1, 1, 4}, std::vector<double>{1, 2, 3, 4});
  TensorD t({1, 1, 1, 4}, std::vector<double>{0, 2, 5, 4});
  const auto r = mse_loss(p, t);
  CHECK(r.loss == doctest::Approx((1.0 + 4.0) / 8.0));
  CHECK(r.grad[0] == doctest::Approx(0.25));
  CHECK(r.grad[2] == doctest::Approx(-0.5));
  CHECK(r.grad[1] == 0.0);
  CHECK_THROWS_AS(mse_loss(p, TensorD({1, 1, 2, 2})), Error);
}

TEST_CASE("check_finite reports numeric errors") {
  Tensor t({1, 1, 2, 2}, 1.0f);
  CHECK_NOTHROW(check_finite(t, "t"));
  t[3] = std::nanf("");
  try {
    check_finite(t, "t");
    FAIL("expected a throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Numeric);
  }
  t[3] = INFINITY;
  CHECK_THROWS_AS(check_finite(t, "t"), Error);
}

TEST_CASE("tensor construction, reshape and elementwise helpers") {
  CHECK_THROWS_AS(Tensor({1, 1, 2, 2}, std::vector<float>(3)), Error);
  Tensor a({1, 2, 2, 2}, 2.0f);
  CHECK(a.reshaped({1, 8, 1, 1}).shape() == Shape{1, 8, 1, 1});
  CHECK_THROWS_AS(a.reshaped({1, 7, 1, 1}), Error);
  Tensor b({1, 2, 2, 2}, 0.5f);
  CHECK(add(a, b)[0] == 2.5f);
  CHECK(sub(a, b)[7] == 1.5f);
  CHECK(scale(a, 3.0)[4] == 6.0f);
  CHECK(clamp(a, 0.0f, 1.0f)[1] == 1.0f);
  CHECK_THROWS_AS(add(a, Tensor({1, 1, 2, 2})), Error);
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "aamgan/kernels.hpp"
#include "aamgan/rng.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace aamgan;
namespace K = aamgan::kernels;

namespace {

template <typename T>
Tensor<T> random_tensor(std::vector<int> shape, Rng& rng, double stddev = 1.0) {
  Tensor<T> t(std::move(shape));
  rng.fill_normal(t, stddev);
  return t;
}

template <typename T>
double max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
  REQUIRE(a.same_shape(b));
  double m = 0;
  for (int64_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(double(a[i]) - double(b[i])));
  return m;
}

}  // namespace

TEST_CASE("matmul fast matches reference") {
  Rng rng(1);
  const int M = 13, Kd = 37, N = 29;
  std::vector<double> a(M * Kd), b(Kd * N), y_ref(M * N, 0.5), y_fast(M * N, 0.5);
  for (auto& v : a) v = rng.normal();
  for (auto& v : b) v = rng.normal();
  K::ref::matmul(a.data(), b.data(), y_ref.data(), M, Kd, N, true);
  K::fast::matmul(a.data(), b.data(), y_fast.data(), M, Kd, N, true);
  double m = 0;
  for (int i = 0; i < M * N; ++i) m = std::max(m, std::abs(y_ref[i] - y_fast[i]));
  CHECK(m < 1e-12);
}

TEST_CASE("conv2d forward/backward fast matches reference") {
  Rng rng(2);
  for (auto [stride, pad, kh] : {std::tuple{1, 1, 3}, {2, 1, 4}, {1, 3, 7}, {2, 0, 2}}) {
    K::ConvSpec s{.in_c = 5, .out_c = 7, .kh = kh, .kw = kh, .stride = stride, .pad = pad};
    const int n = 3, h = 12, w = 12;
    auto x = random_tensor<double>({n, s.in_c, h, w}, rng);
    auto wt = random_tensor<double>({s.out_c, s.in_c, s.kh, s.kw}, rng);
    auto bias = random_tensor<double>({s.out_c}, rng);
    const int oh = K::conv_out_dim(h, s.kh, s.stride, s.pad);
    const int ow = K::conv_out_dim(w, s.kw, s.stride, s.pad);
    REQUIRE(oh > 0);
    Tensor<double> y1({n, s.out_c, oh, ow}), y2({n, s.out_c, oh, ow});
    K::ref::conv2d_forward(x, wt, bias, s, y1);
    K::fast::conv2d_forward(x, wt, bias, s, y2);
    CHECK(max_abs_diff(y1, y2) < 1e-11);

    auto gy = random_tensor<double>({n, s.out_c, oh, ow}, rng);
    Tensor<double> dx1(x.shape()), dx2(x.shape());
    Tensor<double> dw1(wt.shape()), dw2(wt.shape());
    Tensor<double> db1(bias.shape()), db2(bias.shape());
    K::ref::conv2d_backward(x, wt, s, gy, &dx1, &dw1, &db1);
    K::fast::conv2d_backward(x, wt, s, gy, &dx2, &dw2, &db2);
    CHECK(max_abs_diff(dx1, dx2) < 1e-11);
    CHECK(max_abs_diff(dw1, dw2) < 1e-11);
    CHECK(max_abs_diff(db1, db2) < 1e-11);
  }
}

TEST_CASE("instance norm fast matches reference") {
  Rng rng(3);
  const int n = 2, c = 6, h = 9, w = 7;
  auto x = random_tensor<double>({n, c, h, w}, rng);
  auto gamma = random_tensor<double>({c}, rng);
  auto beta = random_tensor<double>({c}, rng);
  Tensor<double> y1({n, c, h, w}), y2({n, c, h, w});
  Tensor<double> xh1({n, c, h, w}), xh2({n, c, h, w});
  Tensor<double> is1({n, c}), is2({n, c});
  K::ref::instance_norm_forward(x, gamma, beta, 1e-5, y1, xh1, is1);
  K::fast::instance_norm_forward(x, gamma, beta, 1e-5, y2, xh2, is2);
  CHECK(max_abs_diff(y1, y2) < 1e-12);

  auto gy = random_tensor<double>({n, c, h, w}, rng);
  Tensor<double> dx1(x.shape()), dx2(x.shape());
  Tensor<double> dg1({c}), dg2({c}), db1({c}), db2({c});
  K::ref::instance_norm_backward(gy, xh1, is1, gamma, dx1, dg1, db1);
  K::fast::instance_norm_backward(gy, xh2, is2, gamma, dx2, dg2, db2);
  CHECK(max_abs_diff(dx1, dx2) < 1e-12);
  CHECK(max_abs_diff(dg1, dg2) < 1e-12);
  CHECK(max_abs_diff(db1, db2) < 1e-12);
}

TEST_CASE("elementwise and pooling kernels match reference") {
  Rng rng(4);
  const int n = 2, c = 3, h = 8, w = 8;
  auto x = random_tensor<double>({n, c, h, w}, rng);
  auto gy = random_tensor<double>({n, c, h, w}, rng);

  Tensor<double> y1(x.shape()), y2(x.shape()), d1(x.shape()), d2(x.shape());
  K::ref::leaky_relu_forward(x, 0.01, y1);
  K::fast::leaky_relu_forward(x, 0.01, y2);
  CHECK(max_abs_diff(y1, y2) == 0.0);
  K::ref::leaky_relu_backward(gy, x, 0.01, d1);
  K::fast::leaky_relu_backward(gy, x, 0.01, d2);
  CHECK(max_abs_diff(d1, d2) == 0.0);

  K::ref::tanh_forward(x, y1);
  K::fast::tanh_forward(x, y2);
  CHECK(max_abs_diff(y1, y2) == 0.0);
  K::ref::tanh_backward(gy, y1, d1);
  K::fast::tanh_backward(gy, y2, d2);
  CHECK(max_abs_diff(d1, d2) == 0.0);

  Tensor<double> up1({n, c, 2 * h, 2 * w}), up2({n, c, 2 * h, 2 * w});
  K::ref::upsample2x_forward(x, up1);
  K::fast::upsample2x_forward(x, up2);
  CHECK(max_abs_diff(up1, up2) == 0.0);
  auto gup = random_tensor<double>({n, c, 2 * h, 2 * w}, rng);
  K::ref::upsample2x_backward(gup, d1);
  K::fast::upsample2x_backward(gup, d2);
  CHECK(max_abs_diff(d1, d2) == 0.0);

  Tensor<double> p1({n, c}), p2({n, c});
  K::ref::global_avg_pool_forward(x, p1);
  K::fast::global_avg_pool_forward(x, p2);
  CHECK(max_abs_diff(p1, p2) < 1e-15);
  auto gp = random_tensor<double>({n, c}, rng);
  K::ref::global_avg_pool_backward(gp, h, w, d1);
  K::fast::global_avg_pool_backward(gp, h, w, d2);
  CHECK(max_abs_diff(d1, d2) == 0.0);
}

#ifdef _OPENMP
TEST_CASE("fast kernels are bit-identical across thread counts") {
  Rng rng(5);
  K::ConvSpec s{.in_c = 4, .out_c = 6, .kh = 3, .kw = 3, .stride = 1, .pad = 1};
  auto x = random_tensor<float>({2, 4, 16, 16}, rng);
  auto wt = random_tensor<float>({6, 4, 3, 3}, rng);
  Tensor<float> bias;

  const int prev = omp_get_max_threads();
  omp_set_num_threads(1);
  Tensor<float> y1({2, 6, 16, 16});
  K::fast::conv2d_forward(x, wt, bias, s, y1);
  omp_set_num_threads(3);
  Tensor<float> y3({2, 6, 16, 16});
  K::fast::conv2d_forward(x, wt, bias, s, y3);
  omp_set_num_threads(prev);

  for (int64_t i = 0; i < y1.numel(); ++i) REQUIRE(y1[i] == y3[i]);
}
#endif

TEST_CASE("rng round-trips through serialization") {
  Rng a(42);
  for (int i = 0; i < 7; ++i) a.normal();  // leave a spare cached
  std::string s = a.serialize();
  Rng b = Rng::deserialize(s);
  for (int i = 0; i < 100; ++i) {
    CHECK(a.normal() == b.normal());
    CHECK(a.uniform_int(97) == b.uniform_int(97));
  }
}

TEST_CASE("rng shuffle and uniform_int are in range and deterministic") {
  Rng a(7), b(7);
  std::vector<int> va(50), vb(50);
  for (int i = 0; i < 50; ++i) va[i] = vb[i] = i;
  a.shuffle(va.begin(), va.end());
  b.shuffle(vb.begin(), vb.end());
  CHECK(va == vb);
  std::sort(va.begin(), va.end());
  for (int i = 0; i < 50; ++i) CHECK(va[i] == i);
}

// Timing comparison of the reference kernels against the OpenMP fast path,
// on the convolution shapes the networks actually run.

#include <chrono>
#include <cstdio>
#include <functional>

#include "aamgan/kernels.hpp"
#include "aamgan/rng.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace aamgan;
namespace K = aamgan::kernels;

namespace {

double time_ms(const std::function<void()>& fn, int reps) {
  fn();  // warm up
  auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < reps; ++i) fn();
  auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

void bench_conv(const char* name, int n, int c, int h, int oc, int k, int stride, int pad, int reps) {
  Rng rng(1);
  K::ConvSpec s{.in_c = c, .out_c = oc, .kh = k, .kw = k, .stride = stride, .pad = pad};
  Tensor<float> x({n, c, h, h});
  Tensor<float> w({oc, c, k, k});
  Tensor<float> b({oc});
  rng.fill_normal(x, 1.0);
  rng.fill_normal(w, 0.05);
  const int oh = K::conv_out_dim(h, k, stride, pad);
  Tensor<float> y({n, oc, oh, oh});
  Tensor<float> gy({n, oc, oh, oh});
  rng.fill_normal(gy, 1.0);
  Tensor<float> dx(x.shape()), dw(w.shape()), db(b.shape());

  const double macs = double(n) * oc * oh * oh * c * k * k;
  double t_ref_f = time_ms([&] { K::ref::conv2d_forward(x, w, b, s, y); }, reps);
  double t_fast_f = time_ms([&] { K::fast::conv2d_forward(x, w, b, s, y); }, reps);
  double t_ref_b = time_ms([&] { K::ref::conv2d_backward(x, w, s, gy, &dx, &dw, &db); }, reps);
  double t_fast_b = time_ms([&] { K::fast::conv2d_backward(x, w, s, gy, &dx, &dw, &db); }, reps);
  std::printf("%-28s fwd ref %8.3f ms  fast %8.3f ms (%5.1fx, %6.2f GFLOP/s)   bwd ref %8.3f ms  fast %8.3f ms (%5.1fx)\n",
              name, t_ref_f, t_fast_f, t_ref_f / t_fast_f, 2e-6 * macs / t_fast_f, t_ref_b, t_fast_b,
              t_ref_b / t_fast_b);
}

}  // namespace

int main() {
#ifdef _OPENMP
  std::printf("OpenMP enabled, max threads = %d\n", omp_get_max_threads());
#else
  std::printf("OpenMP disabled\n");
#endif

  // matmul throughput probe
  {
    Rng rng(2);
    const int M = 64, Kd = 576, N = 1024;
    std::vector<float> a(M * Kd), b(Kd * N), y(M * N);
    for (auto& v : a) v = float(rng.normal());
    for (auto& v : b) v = float(rng.normal());
    double t_ref = time_ms([&] { K::ref::matmul(a.data(), b.data(), y.data(), M, Kd, N, false); }, 5);
    double t_fast = time_ms([&] { K::fast::matmul(a.data(), b.data(), y.data(), M, Kd, N, false); }, 20);
    double flops = 2.0 * M * Kd * N;
    std::printf("matmul %dx%dx%d: ref %.3f ms  fast %.3f ms  (%.2f GFLOP/s fast)\n", M, Kd, N, t_ref, t_fast,
                flops / t_fast * 1e-6);
  }

  bench_conv("G entry 7x7 11->32 @32", 4, 11, 32, 32, 7, 1, 3, 5);
  bench_conv("G down 4x4 32->64 @32", 4, 32, 32, 64, 4, 2, 1, 5);
  bench_conv("G res 3x3 128->128 @8", 4, 128, 8, 128, 3, 1, 1, 5);
  bench_conv("G up 3x3 64->32 @32", 4, 64, 32, 32, 3, 1, 1, 5);
  bench_conv("D stage 4x4 64->128 @4", 4, 64, 4, 128, 4, 2, 1, 10);
  return 0;
}

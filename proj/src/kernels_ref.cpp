#include <cmath>

#include "aamgan/kernels.hpp"

// Reference kernels: the shortest obviously-correct loops. Serial on purpose;
// the fast kernels are tested against these.

namespace aamgan::kernels::ref {

template <typename T>
void matmul(const T* a, const T* b, T* y, int M, int K, int N, bool accumulate) {
  for (int i = 0; i < M; ++i) {
    for (int j = 0; j < N; ++j) {
      T acc = accumulate ? y[static_cast<size_t>(i) * N + j] : T(0);
      for (int k = 0; k < K; ++k) acc += a[static_cast<size_t>(i) * K + k] * b[static_cast<size_t>(k) * N + j];
      y[static_cast<size_t>(i) * N + j] = acc;
    }
  }
}

template <typename T>
void conv2d_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, const ConvSpec& s, Tensor<T>& y) {
  const int n = x.dim(0), h = x.dim(2), wd = x.dim(3);
  const int oh = conv_out_dim(h, s.kh, s.stride, s.pad);
  const int ow = conv_out_dim(wd, s.kw, s.stride, s.pad);
  for (int i = 0; i < n; ++i)
    for (int oc = 0; oc < s.out_c; ++oc)
      for (int r = 0; r < oh; ++r)
        for (int c = 0; c < ow; ++c) {
          T acc = b.empty() ? T(0) : b[oc];
          for (int ic = 0; ic < s.in_c; ++ic)
            for (int kr = 0; kr < s.kh; ++kr)
              for (int kc = 0; kc < s.kw; ++kc) {
                int ih = r * s.stride - s.pad + kr;
                int iw = c * s.stride - s.pad + kc;
                if (ih >= 0 && ih < h && iw >= 0 && iw < wd)
                  acc += x.at(i, ic, ih, iw) * w.at(oc, ic, kr, kc);
              }
          y.at(i, oc, r, c) = acc;
        }
}

template <typename T>
void conv2d_backward(const Tensor<T>& x, const Tensor<T>& w, const ConvSpec& s, const Tensor<T>& gy, Tensor<T>* dx,
                     Tensor<T>* dw, Tensor<T>* db) {
  const int n = x.dim(0), h = x.dim(2), wd = x.dim(3);
  const int oh = gy.dim(2), ow = gy.dim(3);
  if (dx) dx->zero();
  for (int i = 0; i < n; ++i)
    for (int oc = 0; oc < s.out_c; ++oc)
      for (int r = 0; r < oh; ++r)
        for (int c = 0; c < ow; ++c) {
          const T g = gy.at(i, oc, r, c);
          if (db) (*db)[oc] += g;
          for (int ic = 0; ic < s.in_c; ++ic)
            for (int kr = 0; kr < s.kh; ++kr)
              for (int kc = 0; kc < s.kw; ++kc) {
                int ih = r * s.stride - s.pad + kr;
                int iw = c * s.stride - s.pad + kc;
                if (ih < 0 || ih >= h || iw < 0 || iw >= wd) continue;
                if (dw) dw->at(oc, ic, kr, kc) += g * x.at(i, ic, ih, iw);
                if (dx) dx->at(i, ic, ih, iw) += g * w.at(oc, ic, kr, kc);
              }
        }
}

template <typename T>
void instance_norm_forward(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, T eps, Tensor<T>& y,
                           Tensor<T>& xhat, Tensor<T>& inv_std) {
  const int n = x.dim(0), ch = x.dim(1), plane = x.dim(2) * x.dim(3);
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < ch; ++c) {
      const T* xp = x.data() + (static_cast<size_t>(i) * ch + c) * plane;
      T* yp = y.data() + (static_cast<size_t>(i) * ch + c) * plane;
      T* hp = xhat.data() + (static_cast<size_t>(i) * ch + c) * plane;
      T mean = 0;
      for (int k = 0; k < plane; ++k) mean += xp[k];
      mean /= plane;
      T var = 0;
      for (int k = 0; k < plane; ++k) var += (xp[k] - mean) * (xp[k] - mean);
      var /= plane;
      T istd = T(1) / std::sqrt(var + eps);
      inv_std.at(i, c) = istd;
      for (int k = 0; k < plane; ++k) {
        hp[k] = (xp[k] - mean) * istd;
        yp[k] = gamma[c] * hp[k] + beta[c];
      }
    }
}

template <typename T>
void instance_norm_backward(const Tensor<T>& gy, const Tensor<T>& xhat, const Tensor<T>& inv_std,
                            const Tensor<T>& gamma, Tensor<T>& dx, Tensor<T>& dgamma, Tensor<T>& dbeta) {
  const int n = gy.dim(0), ch = gy.dim(1), plane = gy.dim(2) * gy.dim(3);
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < ch; ++c) {
      const T* gp = gy.data() + (static_cast<size_t>(i) * ch + c) * plane;
      const T* hp = xhat.data() + (static_cast<size_t>(i) * ch + c) * plane;
      T* dp = dx.data() + (static_cast<size_t>(i) * ch + c) * plane;
      T sum_g = 0, sum_gh = 0;
      for (int k = 0; k < plane; ++k) {
        sum_g += gp[k];
        sum_gh += gp[k] * hp[k];
      }
      dgamma[c] += sum_gh;
      dbeta[c] += sum_g;
      const T mg = sum_g / plane, mgh = sum_gh / plane;
      const T scale = gamma[c] * inv_std.at(i, c);
      for (int k = 0; k < plane; ++k) dp[k] = scale * (gp[k] - mg - hp[k] * mgh);
    }
}

template <typename T>
void leaky_relu_forward(const Tensor<T>& x, T slope, Tensor<T>& y) {
  for (int64_t i = 0; i < x.numel(); ++i) y[i] = x[i] > T(0) ? x[i] : slope * x[i];
}

template <typename T>
void leaky_relu_backward(const Tensor<T>& gy, const Tensor<T>& x, T slope, Tensor<T>& dx) {
  for (int64_t i = 0; i < x.numel(); ++i) dx[i] = gy[i] * (x[i] > T(0) ? T(1) : slope);
}

template <typename T>
void tanh_forward(const Tensor<T>& x, Tensor<T>& y) {
  for (int64_t i = 0; i < x.numel(); ++i) y[i] = std::tanh(x[i]);
}

template <typename T>
void tanh_backward(const Tensor<T>& gy, const Tensor<T>& y, Tensor<T>& dx) {
  for (int64_t i = 0; i < y.numel(); ++i) dx[i] = gy[i] * (T(1) - y[i] * y[i]);
}

template <typename T>
void upsample2x_forward(const Tensor<T>& x, Tensor<T>& y) {
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < c; ++j)
      for (int r = 0; r < 2 * h; ++r)
        for (int cc = 0; cc < 2 * w; ++cc) y.at(i, j, r, cc) = x.at(i, j, r / 2, cc / 2);
}

template <typename T>
void upsample2x_backward(const Tensor<T>& gy, Tensor<T>& dx) {
  const int n = dx.dim(0), c = dx.dim(1), h = dx.dim(2), w = dx.dim(3);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < c; ++j)
      for (int r = 0; r < h; ++r)
        for (int cc = 0; cc < w; ++cc)
          dx.at(i, j, r, cc) = gy.at(i, j, 2 * r, 2 * cc) + gy.at(i, j, 2 * r, 2 * cc + 1) +
                               gy.at(i, j, 2 * r + 1, 2 * cc) + gy.at(i, j, 2 * r + 1, 2 * cc + 1);
}

template <typename T>
void global_avg_pool_forward(const Tensor<T>& x, Tensor<T>& y) {
  const int n = x.dim(0), c = x.dim(1), plane = x.dim(2) * x.dim(3);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < c; ++j) {
      const T* xp = x.data() + (static_cast<size_t>(i) * c + j) * plane;
      T acc = 0;
      for (int k = 0; k < plane; ++k) acc += xp[k];
      y.at(i, j) = acc / plane;
    }
}

template <typename T>
void global_avg_pool_backward(const Tensor<T>& gy, int h, int w, Tensor<T>& dx) {
  const int n = gy.dim(0), c = gy.dim(1), plane = h * w;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < c; ++j) {
      const T g = gy.at(i, j) / plane;
      T* dp = dx.data() + (static_cast<size_t>(i) * c + j) * plane;
      for (int k = 0; k < plane; ++k) dp[k] = g;
    }
}

#define AAMGAN_INSTANTIATE_REF(T)                                                                              \
  template void matmul<T>(const T*, const T*, T*, int, int, int, bool);                                        \
  template void conv2d_forward<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, const ConvSpec&,       \
                                  Tensor<T>&);                                                                 \
  template void conv2d_backward<T>(const Tensor<T>&, const Tensor<T>&, const ConvSpec&, const Tensor<T>&,      \
                                   Tensor<T>*, Tensor<T>*, Tensor<T>*);                                        \
  template void instance_norm_forward<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T, Tensor<T>&,  \
                                         Tensor<T>&, Tensor<T>&);                                              \
  template void instance_norm_backward<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,                \
                                          const Tensor<T>&, Tensor<T>&, Tensor<T>&, Tensor<T>&);               \
  template void leaky_relu_forward<T>(const Tensor<T>&, T, Tensor<T>&);                                        \
  template void leaky_relu_backward<T>(const Tensor<T>&, const Tensor<T>&, T, Tensor<T>&);                     \
  template void tanh_forward<T>(const Tensor<T>&, Tensor<T>&);                                                 \
  template void tanh_backward<T>(const Tensor<T>&, const Tensor<T>&, Tensor<T>&);                              \
  template void upsample2x_forward<T>(const Tensor<T>&, Tensor<T>&);                                           \
  template void upsample2x_backward<T>(const Tensor<T>&, Tensor<T>&);                                          \
  template void global_avg_pool_forward<T>(const Tensor<T>&, Tensor<T>&);                                      \
  template void global_avg_pool_backward<T>(const Tensor<T>&, int, int, Tensor<T>&);

AAMGAN_INSTANTIATE_REF(float)
AAMGAN_INSTANTIATE_REF(double)

}  // namespace aamgan::kernels::ref

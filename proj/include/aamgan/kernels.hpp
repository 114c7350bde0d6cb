#pragma once

#include <cstdint>

#include "aamgan/tensor.hpp"

namespace aamgan::kernels {

// Two implementations of every compute kernel:
//   ref::  naive loops, serial. Kept as the correctness oracle.
//   fast:: im2col + matmul with OpenMP. Every output element is written by
//          exactly one thread and accumulated in a fixed serial order, so
//          results are bit-identical to single-threaded execution for any
//          thread count.
// Free functions at kernels:: scope dispatch on the process-global backend.

enum class Backend { Reference, Fast };
Backend backend();
void set_backend(Backend b);

struct ConvSpec {
  int in_c = 0, out_c = 0;
  int kh = 0, kw = 0;
  int stride = 1, pad = 0;
};

inline int conv_out_dim(int in, int k, int stride, int pad) { return (in + 2 * pad - k) / stride + 1; }

#define AAMGAN_KERNEL_DECLS                                                                                      \
  /* y(MxN) = a(MxK) * b(KxN); accumulate adds into y instead of overwriting. */                                 \
  template <typename T>                                                                                          \
  void matmul(const T* a, const T* b, T* y, int M, int K, int N, bool accumulate);                               \
  /* x: NxCxHxW, w: OCxICxKHxKW, b: OC (may be empty), y: NxOCxOHxOW. */                                         \
  template <typename T>                                                                                          \
  void conv2d_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, const ConvSpec& s,             \
                      Tensor<T>& y);                                                                             \
  /* Accumulates dw/db; overwrites dx. Any of dx/dw/db may be null. */                                           \
  template <typename T>                                                                                          \
  void conv2d_backward(const Tensor<T>& x, const Tensor<T>& w, const ConvSpec& s, const Tensor<T>& gy,           \
                       Tensor<T>* dx, Tensor<T>* dw, Tensor<T>* db);                                             \
  /* Per (n, c) normalization over HxW. Saves xhat and inv_std for backward. */                                  \
  template <typename T>                                                                                          \
  void instance_norm_forward(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, T eps,           \
                             Tensor<T>& y, Tensor<T>& xhat, Tensor<T>& inv_std);                                 \
  template <typename T>                                                                                          \
  void instance_norm_backward(const Tensor<T>& gy, const Tensor<T>& xhat, const Tensor<T>& inv_std,              \
                              const Tensor<T>& gamma, Tensor<T>& dx, Tensor<T>& dgamma, Tensor<T>& dbeta);       \
  /* slope = 0 gives plain ReLU. */                                                                              \
  template <typename T>                                                                                          \
  void leaky_relu_forward(const Tensor<T>& x, T slope, Tensor<T>& y);                                            \
  template <typename T>                                                                                          \
  void leaky_relu_backward(const Tensor<T>& gy, const Tensor<T>& x, T slope, Tensor<T>& dx);                     \
  template <typename T>                                                                                          \
  void tanh_forward(const Tensor<T>& x, Tensor<T>& y);                                                           \
  template <typename T>                                                                                          \
  void tanh_backward(const Tensor<T>& gy, const Tensor<T>& y, Tensor<T>& dx);                                    \
  template <typename T>                                                                                          \
  void upsample2x_forward(const Tensor<T>& x, Tensor<T>& y);                                                     \
  template <typename T>                                                                                          \
  void upsample2x_backward(const Tensor<T>& gy, Tensor<T>& dx);                                                  \
  /* y: NxC means over the spatial plane. */                                                                     \
  template <typename T>                                                                                          \
  void global_avg_pool_forward(const Tensor<T>& x, Tensor<T>& y);                                                \
  template <typename T>                                                                                          \
  void global_avg_pool_backward(const Tensor<T>& gy, int h, int w, Tensor<T>& dx);

namespace ref {
AAMGAN_KERNEL_DECLS
}

namespace fast {
AAMGAN_KERNEL_DECLS

// y(MxN) = a^T * b with a stored (KxM), b (KxN).
template <typename T>
void matmul_atb(const T* a, const T* b, T* y, int M, int K, int N);

// y(MxN) += a(MxK) * b^T with b stored (NxK).
template <typename T>
void matmul_abt_acc(const T* a, const T* b, T* y, int M, int K, int N);

// col has (in_c*kh*kw) rows and (oh*ow) columns; x is one image (CxHxW).
template <typename T>
void im2col(const T* x, int h, int w, const ConvSpec& s, T* col);
template <typename T>
void col2im_acc(const T* col, int h, int w, const ConvSpec& s, T* x);
}  // namespace fast

#undef AAMGAN_KERNEL_DECLS

// ---- backend-dispatched wrappers ----

#define AAMGAN_DISPATCH(fn, ...) \
  (backend() == Backend::Fast ? fast::fn(__VA_ARGS__) : ref::fn(__VA_ARGS__))

template <typename T>
void conv2d_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, const ConvSpec& s, Tensor<T>& y) {
  AAMGAN_DISPATCH(conv2d_forward, x, w, b, s, y);
}
template <typename T>
void conv2d_backward(const Tensor<T>& x, const Tensor<T>& w, const ConvSpec& s, const Tensor<T>& gy, Tensor<T>* dx,
                     Tensor<T>* dw, Tensor<T>* db) {
  AAMGAN_DISPATCH(conv2d_backward, x, w, s, gy, dx, dw, db);
}
template <typename T>
void instance_norm_forward(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, T eps, Tensor<T>& y,
                           Tensor<T>& xhat, Tensor<T>& inv_std) {
  AAMGAN_DISPATCH(instance_norm_forward, x, gamma, beta, eps, y, xhat, inv_std);
}
template <typename T>
void instance_norm_backward(const Tensor<T>& gy, const Tensor<T>& xhat, const Tensor<T>& inv_std,
                            const Tensor<T>& gamma, Tensor<T>& dx, Tensor<T>& dgamma, Tensor<T>& dbeta) {
  AAMGAN_DISPATCH(instance_norm_backward, gy, xhat, inv_std, gamma, dx, dgamma, dbeta);
}
template <typename T>
void leaky_relu_forward(const Tensor<T>& x, T slope, Tensor<T>& y) {
  AAMGAN_DISPATCH(leaky_relu_forward, x, slope, y);
}
template <typename T>
void leaky_relu_backward(const Tensor<T>& gy, const Tensor<T>& x, T slope, Tensor<T>& dx) {
  AAMGAN_DISPATCH(leaky_relu_backward, gy, x, slope, dx);
}
template <typename T>
void tanh_forward(const Tensor<T>& x, Tensor<T>& y) {
  AAMGAN_DISPATCH(tanh_forward, x, y);
}
template <typename T>
void tanh_backward(const Tensor<T>& gy, const Tensor<T>& y, Tensor<T>& dx) {
  AAMGAN_DISPATCH(tanh_backward, gy, y, dx);
}
template <typename T>
void upsample2x_forward(const Tensor<T>& x, Tensor<T>& y) {
  AAMGAN_DISPATCH(upsample2x_forward, x, y);
}
template <typename T>
void upsample2x_backward(const Tensor<T>& gy, Tensor<T>& dx) {
  AAMGAN_DISPATCH(upsample2x_backward, gy, dx);
}
template <typename T>
void global_avg_pool_forward(const Tensor<T>& x, Tensor<T>& y) {
  AAMGAN_DISPATCH(global_avg_pool_forward, x, y);
}
template <typename T>
void global_avg_pool_backward(const Tensor<T>& gy, int h, int w, Tensor<T>& dx) {
  AAMGAN_DISPATCH(global_avg_pool_backward, gy, h, w, dx);
}

#undef AAMGAN_DISPATCH

// ---- optimizer steps and elementwise helpers (single implementation) ----

template <typename T>
void adam_step(Tensor<T>& p, const Tensor<T>& g, Tensor<T>& m, Tensor<T>& v, int64_t t, T lr, T beta1, T beta2,
               T eps);

template <typename T>
void sgd_step(Tensor<T>& p, const Tensor<T>& g, T lr);

// y += alpha * x
template <typename T>
void axpy(Tensor<T>& y, T alpha, const Tensor<T>& x);

}  // namespace aamgan::kernels

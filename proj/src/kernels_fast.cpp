#include <cmath>
#include <vector>

#include "aamgan/kernels.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

// Fast kernels: im2col + matmul for convolutions, OpenMP elsewhere.
// Parallel loops partition whole output elements; accumulation inside an
// element is always serial in a fixed order, so results do not depend on
// the thread count.

namespace aamgan::kernels {

namespace {
Backend g_backend = Backend::Fast;
}

Backend backend() { return g_backend; }
void set_backend(Backend b) { g_backend = b; }

namespace fast {

namespace {

// Register-tiled block over a packed column panel of b: IB rows of y by JT
// columns, accumulated across the full K extent. bp is laid out (K x JT)
// contiguous so the k loop streams. IB/JT are compile-time so accumulators
// stay in vector registers.
template <typename T, int IB, int JT>
inline void mm_tile_packed(const T* a, const T* bp, T* y, int K, int N, int i0, int jw, size_t ars, size_t acs,
                           bool accumulate) {
  T acc[IB][JT] = {};
  for (int k = 0; k < K; ++k) {
    const T* brow = bp + static_cast<size_t>(k) * JT;
    for (int r = 0; r < IB; ++r) {
      const T av = a[static_cast<size_t>(i0 + r) * ars + k * acs];
      for (int j = 0; j < JT; ++j) acc[r][j] += av * brow[j];
    }
  }
  for (int r = 0; r < IB; ++r) {
    T* yrow = y + static_cast<size_t>(i0 + r) * N;
    if (accumulate)
      for (int j = 0; j < jw; ++j) yrow[j] += acc[r][j];
    else
      for (int j = 0; j < jw; ++j) yrow[j] = acc[r][j];
  }
}

// Plain streaming form for small problems where packing does not pay off.
template <typename T>
void mm_rows_streaming(const T* a, const T* b, T* y, int M, int K, int N, size_t ars, size_t acs, bool accumulate) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < M; ++i) {
    T* yrow = y + static_cast<size_t>(i) * N;
    if (!accumulate)
      for (int j = 0; j < N; ++j) yrow[j] = T(0);
    for (int k = 0; k < K; ++k) {
      const T aik = a[static_cast<size_t>(i) * ars + k * acs];
      const T* brow = b + static_cast<size_t>(k) * N;
      for (int j = 0; j < N; ++j) yrow[j] += aik * brow[j];
    }
  }
}

template <typename T>
void mm_driver(const T* a, const T* b, T* y, int M, int K, int N, size_t ars, size_t acs, bool accumulate) {
  constexpr int JT = 32;
  // Packing b pays off once enough row blocks reuse the packed panel.
  if (M < 48 || N < JT) {
    mm_rows_streaming(a, b, y, M, K, N, ars, acs, accumulate);
    return;
  }
  const int ntiles = (N + JT - 1) / JT;
  std::vector<T> packed(static_cast<size_t>(ntiles) * K * JT);
#pragma omp parallel for schedule(static)
  for (int t = 0; t < ntiles; ++t) {
    const int j0 = t * JT;
    const int jw = std::min(JT, N - j0);
    T* dst = packed.data() + static_cast<size_t>(t) * K * JT;
    for (int k = 0; k < K; ++k) {
      const T* src = b + static_cast<size_t>(k) * N + j0;
      for (int j = 0; j < jw; ++j) dst[k * JT + j] = src[j];
      for (int j = jw; j < JT; ++j) dst[k * JT + j] = T(0);
    }
  }
  const int mblocks = (M + 3) / 4;
#pragma omp parallel for schedule(static) collapse(2)
  for (int blk = 0; blk < mblocks; ++blk)
    for (int t = 0; t < ntiles; ++t) {
      const int i0 = blk * 4;
      const int ib = std::min(4, M - i0);
      const int jw = std::min(JT, N - t * JT);
      const T* bp = packed.data() + static_cast<size_t>(t) * K * JT;
      T* yt = y + t * JT;
      switch (ib) {
        case 4: mm_tile_packed<T, 4, JT>(a, bp, yt, K, N, i0, jw, ars, acs, accumulate); break;
        case 3: mm_tile_packed<T, 3, JT>(a, bp, yt, K, N, i0, jw, ars, acs, accumulate); break;
        case 2: mm_tile_packed<T, 2, JT>(a, bp, yt, K, N, i0, jw, ars, acs, accumulate); break;
        default: mm_tile_packed<T, 1, JT>(a, bp, yt, K, N, i0, jw, ars, acs, accumulate); break;
      }
    }
}

}  // namespace

template <typename T>
void matmul(const T* a, const T* b, T* y, int M, int K, int N, bool accumulate) {
  mm_driver(a, b, y, M, K, N, static_cast<size_t>(K), size_t{1}, accumulate);
}

template <typename T>
void matmul_atb(const T* a, const T* b, T* y, int M, int K, int N) {
  mm_driver(a, b, y, M, K, N, size_t{1}, static_cast<size_t>(M), false);
}

template <typename T>
void matmul_abt_acc(const T* a, const T* b, T* y, int M, int K, int N) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < M; ++i) {
    const T* arow = a + static_cast<size_t>(i) * K;
    T* yrow = y + static_cast<size_t>(i) * N;
    if (K < 16) {
      for (int j = 0; j < N; ++j) {
        const T* brow = b + static_cast<size_t>(j) * K;
        T dot = 0;
        for (int k = 0; k < K; ++k) dot += arow[k] * brow[k];
        yrow[j] += dot;
      }
    } else {
      for (int j = 0; j < N; ++j) {
        const T* brow = b + static_cast<size_t>(j) * K;
        T dot = 0;
#pragma omp simd reduction(+ : dot)
        for (int k = 0; k < K; ++k) dot += arow[k] * brow[k];
        yrow[j] += dot;
      }
    }
  }
}

template <typename T>
void im2col(const T* x, int h, int w, const ConvSpec& s, T* col) {
  const int oh = conv_out_dim(h, s.kh, s.stride, s.pad);
  const int ow = conv_out_dim(w, s.kw, s.stride, s.pad);
  const int rows = s.in_c * s.kh * s.kw;
#pragma omp parallel for schedule(static)
  for (int r = 0; r < rows; ++r) {
    const int kc = r % s.kw;
    const int kr = (r / s.kw) % s.kh;
    const int ic = r / (s.kw * s.kh);
    const T* xp = x + static_cast<size_t>(ic) * h * w;
    T* cp = col + static_cast<size_t>(r) * oh * ow;
    for (int orow = 0; orow < oh; ++orow) {
      const int ih = orow * s.stride - s.pad + kr;
      if (ih < 0 || ih >= h) {
        for (int ocol = 0; ocol < ow; ++ocol) cp[orow * ow + ocol] = T(0);
        continue;
      }
      for (int ocol = 0; ocol < ow; ++ocol) {
        const int iw = ocol * s.stride - s.pad + kc;
        cp[orow * ow + ocol] = (iw >= 0 && iw < w) ? xp[ih * w + iw] : T(0);
      }
    }
  }
}

template <typename T>
void col2im_acc(const T* col, int h, int w, const ConvSpec& s, T* x) {
  const int oh = conv_out_dim(h, s.kh, s.stride, s.pad);
  const int ow = conv_out_dim(w, s.kw, s.stride, s.pad);
  const int rows = s.in_c * s.kh * s.kw;
  // Overlapping scatter: serial within one image.
  for (int r = 0; r < rows; ++r) {
    const int kc = r % s.kw;
    const int kr = (r / s.kw) % s.kh;
    const int ic = r / (s.kw * s.kh);
    T* xp = x + static_cast<size_t>(ic) * h * w;
    const T* cp = col + static_cast<size_t>(r) * oh * ow;
    for (int orow = 0; orow < oh; ++orow) {
      const int ih = orow * s.stride - s.pad + kr;
      if (ih < 0 || ih >= h) continue;
      for (int ocol = 0; ocol < ow; ++ocol) {
        const int iw = ocol * s.stride - s.pad + kc;
        if (iw >= 0 && iw < w) xp[ih * w + iw] += cp[orow * ow + ocol];
      }
    }
  }
}

template <typename T>
void conv2d_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, const ConvSpec& s, Tensor<T>& y) {
  const int n = x.dim(0), h = x.dim(2), wd = x.dim(3);
  const int oh = conv_out_dim(h, s.kh, s.stride, s.pad);
  const int ow = conv_out_dim(wd, s.kw, s.stride, s.pad);
  const size_t col_rows = static_cast<size_t>(s.in_c) * s.kh * s.kw;
  const size_t col_sz = col_rows * oh * ow;
  std::vector<T> cols(static_cast<size_t>(n) * col_sz);
  const size_t xplane = static_cast<size_t>(s.in_c) * h * wd;
  for (int i = 0; i < n; ++i) im2col(x.data() + i * xplane, h, wd, s, cols.data() + i * col_sz);
  const size_t yplane = static_cast<size_t>(s.out_c) * oh * ow;
  for (int i = 0; i < n; ++i)
    matmul(w.data(), cols.data() + i * col_sz, y.data() + i * yplane, s.out_c, static_cast<int>(col_rows), oh * ow,
           false);
  if (!b.empty()) {
    const int plane = oh * ow;
#pragma omp parallel for collapse(2) schedule(static)
    for (int i = 0; i < n; ++i)
      for (int oc = 0; oc < s.out_c; ++oc) {
        T* yp = y.data() + i * yplane + static_cast<size_t>(oc) * plane;
        const T bv = b[oc];
        for (int k = 0; k < plane; ++k) yp[k] += bv;
      }
  }
}

template <typename T>
void conv2d_backward(const Tensor<T>& x, const Tensor<T>& w, const ConvSpec& s, const Tensor<T>& gy, Tensor<T>* dx,
                     Tensor<T>* dw, Tensor<T>* db) {
  const int n = x.dim(0), h = x.dim(2), wd = x.dim(3);
  const int oh = gy.dim(2), ow = gy.dim(3);
  const int col_rows = s.in_c * s.kh * s.kw;
  const size_t col_sz = static_cast<size_t>(col_rows) * oh * ow;
  const size_t xplane = static_cast<size_t>(s.in_c) * h * wd;
  const size_t yplane = static_cast<size_t>(s.out_c) * oh * ow;

  if (dw) {
    std::vector<T> col(col_sz);
    for (int i = 0; i < n; ++i) {
      im2col(x.data() + i * xplane, h, wd, s, col.data());
      matmul_abt_acc(gy.data() + i * yplane, col.data(), dw->data(), s.out_c, oh * ow, col_rows);
    }
  }
  if (db) {
#pragma omp parallel for schedule(static)
    for (int oc = 0; oc < s.out_c; ++oc) {
      T acc = 0;
      for (int i = 0; i < n; ++i) {
        const T* gp = gy.data() + i * yplane + static_cast<size_t>(oc) * oh * ow;
        for (int k = 0; k < oh * ow; ++k) acc += gp[k];
      }
      (*db)[oc] += acc;
    }
  }
  if (dx) {
    std::vector<T> dcol(col_sz);
    dx->zero();
    for (int i = 0; i < n; ++i) {
      matmul_atb(w.data(), gy.data() + i * yplane, dcol.data(), col_rows, s.out_c, oh * ow);
      col2im_acc(dcol.data(), h, wd, s, dx->data() + i * xplane);
    }
  }
}

template <typename T>
void instance_norm_forward(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, T eps, Tensor<T>& y,
                           Tensor<T>& xhat, Tensor<T>& inv_std) {
  const int n = x.dim(0), ch = x.dim(1), plane = x.dim(2) * x.dim(3);
#pragma omp parallel for collapse(2) schedule(static)
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < ch; ++c) {
      const T* xp = x.data() + (static_cast<size_t>(i) * ch + c) * plane;
      T* yp = y.data() + (static_cast<size_t>(i) * ch + c) * plane;
      T* hp = xhat.data() + (static_cast<size_t>(i) * ch + c) * plane;
      T mean = 0;
#pragma omp simd reduction(+ : mean)
      for (int k = 0; k < plane; ++k) mean += xp[k];
      mean /= plane;
      T var = 0;
#pragma omp simd reduction(+ : var)
      for (int k = 0; k < plane; ++k) var += (xp[k] - mean) * (xp[k] - mean);
      var /= plane;
      const T istd = T(1) / std::sqrt(var + eps);
      inv_std.at(i, c) = istd;
      const T g = gamma[c], bt = beta[c];
      for (int k = 0; k < plane; ++k) {
        hp[k] = (xp[k] - mean) * istd;
        yp[k] = g * hp[k] + bt;
      }
    }
}

template <typename T>
void instance_norm_backward(const Tensor<T>& gy, const Tensor<T>& xhat, const Tensor<T>& inv_std,
                            const Tensor<T>& gamma, Tensor<T>& dx, Tensor<T>& dgamma, Tensor<T>& dbeta) {
  const int n = gy.dim(0), ch = gy.dim(1), plane = gy.dim(2) * gy.dim(3);
  // dgamma/dbeta reduce over the batch: parallel over channels only.
#pragma omp parallel for schedule(static)
  for (int c = 0; c < ch; ++c) {
    T sg = 0, sgh = 0;
    for (int i = 0; i < n; ++i) {
      const T* gp = gy.data() + (static_cast<size_t>(i) * ch + c) * plane;
      const T* hp = xhat.data() + (static_cast<size_t>(i) * ch + c) * plane;
      for (int k = 0; k < plane; ++k) {
        sg += gp[k];
        sgh += gp[k] * hp[k];
      }
    }
    dgamma[c] += sgh;
    dbeta[c] += sg;
  }
#pragma omp parallel for collapse(2) schedule(static)
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < ch; ++c) {
      const T* gp = gy.data() + (static_cast<size_t>(i) * ch + c) * plane;
      const T* hp = xhat.data() + (static_cast<size_t>(i) * ch + c) * plane;
      T* dp = dx.data() + (static_cast<size_t>(i) * ch + c) * plane;
      T sg = 0, sgh = 0;
#pragma omp simd reduction(+ : sg, sgh)
      for (int k = 0; k < plane; ++k) {
        sg += gp[k];
        sgh += gp[k] * hp[k];
      }
      const T mg = sg / plane, mgh = sgh / plane;
      const T scale = gamma[c] * inv_std.at(i, c);
      for (int k = 0; k < plane; ++k) dp[k] = scale * (gp[k] - mg - hp[k] * mgh);
    }
}

template <typename T>
void leaky_relu_forward(const Tensor<T>& x, T slope, Tensor<T>& y) {
  const int64_t n = x.numel();
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) y[i] = x[i] > T(0) ? x[i] : slope * x[i];
}

template <typename T>
void leaky_relu_backward(const Tensor<T>& gy, const Tensor<T>& x, T slope, Tensor<T>& dx) {
  const int64_t n = x.numel();
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) dx[i] = gy[i] * (x[i] > T(0) ? T(1) : slope);
}

template <typename T>
void tanh_forward(const Tensor<T>& x, Tensor<T>& y) {
  const int64_t n = x.numel();
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) y[i] = std::tanh(x[i]);
}

template <typename T>
void tanh_backward(const Tensor<T>& gy, const Tensor<T>& y, Tensor<T>& dx) {
  const int64_t n = y.numel();
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) dx[i] = gy[i] * (T(1) - y[i] * y[i]);
}

template <typename T>
void upsample2x_forward(const Tensor<T>& x, Tensor<T>& y) {
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
#pragma omp parallel for collapse(2) schedule(static)
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < c; ++j) {
      const T* xp = x.data() + (static_cast<size_t>(i) * c + j) * h * w;
      T* yp = y.data() + (static_cast<size_t>(i) * c + j) * 4 * h * w;
      for (int r = 0; r < 2 * h; ++r)
        for (int cc = 0; cc < 2 * w; ++cc) yp[r * 2 * w + cc] = xp[(r / 2) * w + cc / 2];
    }
}

template <typename T>
void upsample2x_backward(const Tensor<T>& gy, Tensor<T>& dx) {
  const int n = dx.dim(0), c = dx.dim(1), h = dx.dim(2), w = dx.dim(3);
#pragma omp parallel for collapse(2) schedule(static)
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < c; ++j) {
      const T* gp = gy.data() + (static_cast<size_t>(i) * c + j) * 4 * h * w;
      T* dp = dx.data() + (static_cast<size_t>(i) * c + j) * h * w;
      for (int r = 0; r < h; ++r)
        for (int cc = 0; cc < w; ++cc)
          dp[r * w + cc] = gp[2 * r * 2 * w + 2 * cc] + gp[2 * r * 2 * w + 2 * cc + 1] +
                           gp[(2 * r + 1) * 2 * w + 2 * cc] + gp[(2 * r + 1) * 2 * w + 2 * cc + 1];
    }
}

template <typename T>
void global_avg_pool_forward(const Tensor<T>& x, Tensor<T>& y) {
  const int n = x.dim(0), c = x.dim(1), plane = x.dim(2) * x.dim(3);
#pragma omp parallel for collapse(2) schedule(static)
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < c; ++j) {
      const T* xp = x.data() + (static_cast<size_t>(i) * c + j) * plane;
      T acc = 0;
#pragma omp simd reduction(+ : acc)
      for (int k = 0; k < plane; ++k) acc += xp[k];
      y.at(i, j) = acc / plane;
    }
}

template <typename T>
void global_avg_pool_backward(const Tensor<T>& gy, int h, int w, Tensor<T>& dx) {
  const int n = gy.dim(0), c = gy.dim(1), plane = h * w;
#pragma omp parallel for collapse(2) schedule(static)
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < c; ++j) {
      const T g = gy.at(i, j) / plane;
      T* dp = dx.data() + (static_cast<size_t>(i) * c + j) * plane;
      for (int k = 0; k < plane; ++k) dp[k] = g;
    }
}

#define AAMGAN_INSTANTIATE_FAST(T)                                                                             \
  template void matmul<T>(const T*, const T*, T*, int, int, int, bool);                                        \
  template void matmul_atb<T>(const T*, const T*, T*, int, int, int);                                          \
  template void matmul_abt_acc<T>(const T*, const T*, T*, int, int, int);                                      \
  template void im2col<T>(const T*, int, int, const ConvSpec&, T*);                                            \
  template void col2im_acc<T>(const T*, int, int, const ConvSpec&, T*);                                        \
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

AAMGAN_INSTANTIATE_FAST(float)
AAMGAN_INSTANTIATE_FAST(double)

}  // namespace fast

template <typename T>
void adam_step(Tensor<T>& p, const Tensor<T>& g, Tensor<T>& m, Tensor<T>& v, int64_t t, T lr, T beta1, T beta2,
               T eps) {
  const int64_t n = p.numel();
  const T bc1 = T(1) - static_cast<T>(std::pow(static_cast<double>(beta1), static_cast<double>(t)));
  const T bc2 = T(1) - static_cast<T>(std::pow(static_cast<double>(beta2), static_cast<double>(t)));
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) {
    m[i] = beta1 * m[i] + (T(1) - beta1) * g[i];
    v[i] = beta2 * v[i] + (T(1) - beta2) * g[i] * g[i];
    const T mhat = m[i] / bc1;
    const T vhat = v[i] / bc2;
    p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

template <typename T>
void sgd_step(Tensor<T>& p, const Tensor<T>& g, T lr) {
  const int64_t n = p.numel();
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) p[i] -= lr * g[i];
}

template <typename T>
void axpy(Tensor<T>& y, T alpha, const Tensor<T>& x) {
  const int64_t n = y.numel();
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

#define AAMGAN_INSTANTIATE_OPT(T)                                                                            \
  template void adam_step<T>(Tensor<T>&, const Tensor<T>&, Tensor<T>&, Tensor<T>&, int64_t, T, T, T, T);     \
  template void sgd_step<T>(Tensor<T>&, const Tensor<T>&, T);                                                \
  template void axpy<T>(Tensor<T>&, T, const Tensor<T>&);

AAMGAN_INSTANTIATE_OPT(float)
AAMGAN_INSTANTIATE_OPT(double)

}  // namespace aamgan::kernels

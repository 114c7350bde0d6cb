#include "aamgan/nets.hpp"

#include <cmath>

#include "aamgan/error.hpp"

namespace aamgan::nets {

namespace K = aamgan::kernels;

void NetConfig::validate() const {
  require(resolution == 32 || resolution == 64 || resolution == 128, ErrorKind::ShapeMismatch,
          "resolution must be 32, 64 or 128");
  require(num_classes >= 2, ErrorKind::ShapeMismatch, "need at least two classes");
  require(base_channels_g > 0 && base_channels_d > 0 && res_blocks >= 0 && embedding_dim > 0,
          ErrorKind::ShapeMismatch, "network sizes must be positive");
}

template <typename T>
Tensor<T> spatial_broadcast_concat(const Tensor<T>& x, const Tensor<T>& code) {
  require(x.rank() == 4 && x.dim(1) == 3, ErrorKind::ShapeMismatch, "image must be Nx3xHxW");
  require(code.rank() == 2 && code.dim(0) == x.dim(0), ErrorKind::ShapeMismatch, "code must be NxC");
  const int n = x.dim(0), h = x.dim(2), w = x.dim(3), c = code.dim(1);
  Tensor<T> out({n, 3 + c, h, w});
  const size_t plane = static_cast<size_t>(h) * w;
  for (int i = 0; i < n; ++i) {
    T* dst = out.data() + out.idx4(i, 0, 0, 0);
    const T* src = x.data() + x.idx4(i, 0, 0, 0);
    std::copy(src, src + 3 * plane, dst);
    for (int j = 0; j < c; ++j) {
      T* cp = out.data() + out.idx4(i, 3 + j, 0, 0);
      std::fill(cp, cp + plane, code.at(i, j));
    }
  }
  return out;
}

// ---- Generator ----

template <typename T>
Generator<T>::Generator(const NetConfig& c) : cfg(c) {
  cfg.validate();
  const int g = cfg.base_channels_g;
  net.add(std::make_unique<Conv2d<T>>(3 + cfg.num_classes, g, 7, 1, 3, false));
  net.add(std::make_unique<InstanceNorm2d<T>>(g));
  net.add(std::make_unique<LeakyReLU<T>>(T(0)));
  net.add(std::make_unique<Conv2d<T>>(g, 2 * g, 4, 2, 1, false));
  net.add(std::make_unique<InstanceNorm2d<T>>(2 * g));
  net.add(std::make_unique<LeakyReLU<T>>(T(0)));
  net.add(std::make_unique<Conv2d<T>>(2 * g, 4 * g, 4, 2, 1, false));
  net.add(std::make_unique<InstanceNorm2d<T>>(4 * g));
  net.add(std::make_unique<LeakyReLU<T>>(T(0)));
  for (int i = 0; i < cfg.res_blocks; ++i) net.add(std::make_unique<ResidualBlock<T>>(4 * g));
  net.add(std::make_unique<UpsampleNearest2x<T>>());
  net.add(std::make_unique<Conv2d<T>>(4 * g, 2 * g, 3, 1, 1, false));
  net.add(std::make_unique<InstanceNorm2d<T>>(2 * g));
  net.add(std::make_unique<LeakyReLU<T>>(T(0)));
  net.add(std::make_unique<UpsampleNearest2x<T>>());
  net.add(std::make_unique<Conv2d<T>>(2 * g, g, 3, 1, 1, false));
  net.add(std::make_unique<InstanceNorm2d<T>>(g));
  net.add(std::make_unique<LeakyReLU<T>>(T(0)));
  net.add(std::make_unique<Conv2d<T>>(g, 3, 7, 1, 3, true));
  net.add(std::make_unique<Tanh<T>>());
}

template <typename T>
void Generator<T>::init(Rng& rng) {
  net.init(rng);
}

template <typename T>
Tensor<T> Generator<T>::forward(const Tensor<T>& x, const Tensor<T>& code, Tape<T>& tape) const {
  require(x.dim(2) == cfg.resolution && x.dim(3) == cfg.resolution, ErrorKind::ShapeMismatch,
          "generator input resolution");
  require(code.dim(1) == cfg.num_classes, ErrorKind::ShapeMismatch, "target code width");
  Tensor<T> aug = spatial_broadcast_concat(x, code);
  return net.forward(aug, tape);
}

template <typename T>
Tensor<T> Generator<T>::backward(const Tensor<T>& gy, Tape<T>& tape, bool accum_params) {
  Tensor<T> g_aug = net.backward(gy, tape, accum_params);
  Tensor<T> gx({g_aug.dim(0), 3, g_aug.dim(2), g_aug.dim(3)});
  const size_t plane = static_cast<size_t>(g_aug.dim(2)) * g_aug.dim(3);
  for (int i = 0; i < g_aug.dim(0); ++i) {
    const T* src = g_aug.data() + g_aug.idx4(i, 0, 0, 0);
    std::copy(src, src + 3 * plane, gx.data() + gx.idx4(i, 0, 0, 0));
  }
  return gx;
}

template <typename T>
std::vector<ParamRef<T>> Generator<T>::params() {
  std::vector<ParamRef<T>> out;
  net.collect_params("g", out);
  return out;
}

// ---- Discriminator ----

template <typename T>
Discriminator<T>::Discriminator(const NetConfig& c)
    : cfg(c),
      trunk(),
      src_conv(8 * c.base_channels_d, 1, 3, 1, 1, true),
      cls_conv(8 * c.base_channels_d, c.embedding_dim, 3, 1, 1, true) {
  cfg.validate();
  const int d = cfg.base_channels_d;
  int ch = 3;
  for (int stage = 0; stage < 4; ++stage) {
    const int next = d * (1 << stage);
    trunk.add(std::make_unique<Conv2d<T>>(ch, next, 4, 2, 1, true));
    trunk.add(std::make_unique<LeakyReLU<T>>(T(0.01)));
    ch = next;
  }
  patch_side_ = cfg.resolution / 16;
  require(patch_side_ >= 1, ErrorKind::ShapeMismatch, "resolution too small for 4 strided stages");
}

template <typename T>
void Discriminator<T>::init(Rng& rng) {
  trunk.init(rng);
  src_conv.init(rng);
  cls_conv.init(rng);
}

template <typename T>
DiscOutput<T> Discriminator<T>::forward(const Tensor<T>& x, Tape<T>& tape) const {
  require(x.dim(2) == cfg.resolution && x.dim(3) == cfg.resolution, ErrorKind::ShapeMismatch,
          "discriminator input resolution");
  const int n = x.dim(0);
  Tensor<T> t = trunk.forward(x, tape);

  Tensor<T> patch = src_conv.forward(t, tape);
  const int plane = patch.dim(2) * patch.dim(3);
  Tensor<T> realness({n});
  for (int i = 0; i < n; ++i) {
    T mean = 0;
    const T* pp = patch.data() + patch.idx4(i, 0, 0, 0);
    for (int k = 0; k < plane; ++k) mean += pp[k];
    mean /= plane;
    realness[i] = T(1) / (T(1) + std::exp(-mean));
  }
  tape.save(realness);

  Tensor<T> feat = cls_conv.forward(t, tape);
  Tensor<T> emb({n, cfg.embedding_dim});
  K::global_avg_pool_forward(feat, emb);
  return {std::move(realness), std::move(emb)};
}

template <typename T>
Tensor<T> Discriminator<T>::backward(const Tensor<T>& d_realness, const Tensor<T>& d_embedding, Tape<T>& tape,
                                     bool accum_params) {
  const int n = d_realness.dim(0);
  const int side = patch_side_;
  const int plane = side * side;

  Tensor<T> d_feat({n, cfg.embedding_dim, side, side});
  K::global_avg_pool_backward(d_embedding, side, side, d_feat);
  Tensor<T> d_t = cls_conv.backward(d_feat, tape, accum_params);

  Tensor<T> realness = tape.take();
  Tensor<T> d_patch({n, 1, side, side});
  for (int i = 0; i < n; ++i) {
    const T p = realness[i];
    const T d_logit = d_realness[i] * p * (T(1) - p) / T(plane);
    T* dp = d_patch.data() + d_patch.idx4(i, 0, 0, 0);
    for (int k = 0; k < plane; ++k) dp[k] = d_logit;
  }
  Tensor<T> d_t2 = src_conv.backward(d_patch, tape, accum_params);
  K::axpy(d_t, T(1), d_t2);

  return trunk.backward(d_t, tape, accum_params);
}

template <typename T>
std::vector<ParamRef<T>> Discriminator<T>::params() {
  std::vector<ParamRef<T>> out;
  trunk.collect_params("d.trunk", out);
  src_conv.collect_params("d.src", out);
  cls_conv.collect_params("d.cls", out);
  return out;
}

#define AAMGAN_INSTANTIATE_NETS(T)                                                 \
  template Tensor<T> spatial_broadcast_concat<T>(const Tensor<T>&, const Tensor<T>&); \
  template class Generator<T>;                                                     \
  template class Discriminator<T>;

AAMGAN_INSTANTIATE_NETS(float)
AAMGAN_INSTANTIATE_NETS(double)

}  // namespace aamgan::nets

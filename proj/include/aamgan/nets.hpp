#pragma once

#include "aamgan/layers.hpp"

namespace aamgan::nets {

// StarGAN-pattern topology at configurable desk scale: the generator
// down-samples twice, runs a residual bottleneck, and up-samples back; the
// discriminator is a strided trunk with a realness branch (patch logits
// averaged to one probability) and an embedding branch feeding the auxiliary
// classifier head.
struct NetConfig {
  int resolution = 32;  // power of two in {32, 64, 128}
  int num_classes = 8;
  int base_channels_g = 32;
  int base_channels_d = 32;
  int res_blocks = 4;
  int embedding_dim = 128;  // d

  void validate() const;
};

// Replicates each one-hot code across the spatial grid and concatenates it
// channel-wise: N x 3 x H x W + N x C -> N x (3+C) x H x W.
template <typename T>
Tensor<T> spatial_broadcast_concat(const Tensor<T>& x, const Tensor<T>& code);

template <typename T>
class Generator {
 public:
  explicit Generator(const NetConfig& cfg);
  void init(Rng& rng);

  // x in [-1,1], code rows are one-hot. Output shape equals input shape.
  Tensor<T> forward(const Tensor<T>& x, const Tensor<T>& code, Tape<T>& tape) const;
  // Returns the gradient with respect to x (label channels are dropped).
  Tensor<T> backward(const Tensor<T>& gy, Tape<T>& tape, bool accum_params);
  std::vector<ParamRef<T>> params();

  NetConfig cfg;
  Sequential<T> net;
};

template <typename T>
struct DiscOutput {
  Tensor<T> realness;   // N, sigmoid probabilities in (0,1)
  Tensor<T> embedding;  // N x d
};

template <typename T>
class Discriminator {
 public:
  explicit Discriminator(const NetConfig& cfg);
  void init(Rng& rng);

  DiscOutput<T> forward(const Tensor<T>& x, Tape<T>& tape) const;
  // Takes loss gradients for both outputs; returns the input gradient.
  Tensor<T> backward(const Tensor<T>& d_realness, const Tensor<T>& d_embedding, Tape<T>& tape, bool accum_params);
  std::vector<ParamRef<T>> params();

  NetConfig cfg;
  Sequential<T> trunk;
  Conv2d<T> src_conv;
  Conv2d<T> cls_conv;

 private:
  int patch_side_ = 0;  // spatial side of the trunk output
};

}  // namespace aamgan::nets

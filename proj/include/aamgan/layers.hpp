#pragma once

#include <memory>
#include <string>
#include <vector>

#include "aamgan/kernels.hpp"
#include "aamgan/rng.hpp"
#include "aamgan/tensor.hpp"

namespace aamgan::nets {

// Activation tape. Layers push what they need during forward and pop it in
// exact reverse order during backward, so a single network can run several
// live forward passes at once (each with its own tape).
template <typename T>
struct Tape {
  std::vector<Tensor<T>> slots;
  void save(Tensor<T> t) { slots.push_back(std::move(t)); }
  Tensor<T> take() {
    Tensor<T> t = std::move(slots.back());
    slots.pop_back();
    return t;
  }
};

template <typename T>
struct ParamRef {
  std::string name;
  Tensor<T>* value;
  Tensor<T>* grad;
};

// Forward is const and reentrant; backward accumulates into the layer's grad
// buffers (exclusive access owned by the trainer).
template <typename T>
class Layer {
 public:
  virtual ~Layer() = default;
  virtual Tensor<T> forward(const Tensor<T>& x, Tape<T>& tape) const = 0;
  virtual Tensor<T> backward(const Tensor<T>& gy, Tape<T>& tape, bool accum_params) = 0;
  virtual void collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) {}
  virtual void init(Rng& rng) {}
};

template <typename T>
class Conv2d : public Layer<T> {
 public:
  Conv2d(int in_c, int out_c, int k, int stride, int pad, bool bias);
  Tensor<T> forward(const Tensor<T>& x, Tape<T>& tape) const override;
  Tensor<T> backward(const Tensor<T>& gy, Tape<T>& tape, bool accum_params) override;
  void collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) override;
  void init(Rng& rng) override;

  kernels::ConvSpec spec;
  Tensor<T> weight, bias;
  Tensor<T> grad_weight, grad_bias;
};

template <typename T>
class InstanceNorm2d : public Layer<T> {
 public:
  explicit InstanceNorm2d(int channels);
  Tensor<T> forward(const Tensor<T>& x, Tape<T>& tape) const override;
  Tensor<T> backward(const Tensor<T>& gy, Tape<T>& tape, bool accum_params) override;
  void collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) override;

  int channels;
  Tensor<T> gamma, beta;
  Tensor<T> grad_gamma, grad_beta;
};

template <typename T>
class LeakyReLU : public Layer<T> {
 public:
  explicit LeakyReLU(T slope) : slope(slope) {}
  Tensor<T> forward(const Tensor<T>& x, Tape<T>& tape) const override;
  Tensor<T> backward(const Tensor<T>& gy, Tape<T>& tape, bool accum_params) override;
  T slope;
};

template <typename T>
class Tanh : public Layer<T> {
 public:
  Tensor<T> forward(const Tensor<T>& x, Tape<T>& tape) const override;
  Tensor<T> backward(const Tensor<T>& gy, Tape<T>& tape, bool accum_params) override;
};

template <typename T>
class UpsampleNearest2x : public Layer<T> {
 public:
  Tensor<T> forward(const Tensor<T>& x, Tape<T>& tape) const override;
  Tensor<T> backward(const Tensor<T>& gy, Tape<T>& tape, bool accum_params) override;
};

// conv3x3 -> IN -> ReLU -> conv3x3 -> IN, plus identity skip.
template <typename T>
class ResidualBlock : public Layer<T> {
 public:
  explicit ResidualBlock(int channels);
  Tensor<T> forward(const Tensor<T>& x, Tape<T>& tape) const override;
  Tensor<T> backward(const Tensor<T>& gy, Tape<T>& tape, bool accum_params) override;
  void collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) override;
  void init(Rng& rng) override;

  Conv2d<T> conv1, conv2;
  InstanceNorm2d<T> norm1, norm2;
};

template <typename T>
class Sequential : public Layer<T> {
 public:
  Sequential() = default;
  void add(std::unique_ptr<Layer<T>> layer) { layers.push_back(std::move(layer)); }
  Tensor<T> forward(const Tensor<T>& x, Tape<T>& tape) const override;
  Tensor<T> backward(const Tensor<T>& gy, Tape<T>& tape, bool accum_params) override;
  void collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) override;
  void init(Rng& rng) override;

  std::vector<std::unique_ptr<Layer<T>>> layers;
};

template <typename T>
void zero_grads(std::vector<ParamRef<T>>& params);

template <typename T>
int64_t param_count(const std::vector<ParamRef<T>>& params);

}  // namespace aamgan::nets

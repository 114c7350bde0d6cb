#include "aamgan/layers.hpp"

#include <cmath>

#include "aamgan/error.hpp"

namespace aamgan::nets {

namespace K = aamgan::kernels;

// ---- Conv2d ----

template <typename T>
Conv2d<T>::Conv2d(int in_c, int out_c, int k, int stride, int pad, bool with_bias) {
  spec = K::ConvSpec{.in_c = in_c, .out_c = out_c, .kh = k, .kw = k, .stride = stride, .pad = pad};
  weight = Tensor<T>({out_c, in_c, k, k});
  grad_weight = Tensor<T>(weight.shape());
  if (with_bias) {
    bias = Tensor<T>({out_c});
    grad_bias = Tensor<T>({out_c});
  }
}

template <typename T>
void Conv2d<T>::init(Rng& rng) {
  // He initialization over fan-in.
  const double fan_in = double(spec.in_c) * spec.kh * spec.kw;
  rng.fill_normal(weight, std::sqrt(2.0 / fan_in));
  if (!bias.empty()) bias.zero();
}

template <typename T>
Tensor<T> Conv2d<T>::forward(const Tensor<T>& x, Tape<T>& tape) const {
  require(x.rank() == 4 && x.dim(1) == spec.in_c, ErrorKind::ShapeMismatch, "conv input channels");
  const int oh = K::conv_out_dim(x.dim(2), spec.kh, spec.stride, spec.pad);
  const int ow = K::conv_out_dim(x.dim(3), spec.kw, spec.stride, spec.pad);
  require(oh > 0 && ow > 0, ErrorKind::ShapeMismatch, "conv output collapsed to zero");
  Tensor<T> y({x.dim(0), spec.out_c, oh, ow});
  K::conv2d_forward(x, weight, bias, spec, y);
  tape.save(x);
  return y;
}

template <typename T>
Tensor<T> Conv2d<T>::backward(const Tensor<T>& gy, Tape<T>& tape, bool accum_params) {
  Tensor<T> x = tape.take();
  Tensor<T> dx(x.shape());
  K::conv2d_backward(x, weight, spec, gy, &dx, accum_params ? &grad_weight : nullptr,
                     (accum_params && !bias.empty()) ? &grad_bias : nullptr);
  return dx;
}

template <typename T>
void Conv2d<T>::collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) {
  out.push_back({prefix + ".weight", &weight, &grad_weight});
  if (!bias.empty()) out.push_back({prefix + ".bias", &bias, &grad_bias});
}

// ---- InstanceNorm2d ----

template <typename T>
InstanceNorm2d<T>::InstanceNorm2d(int ch) : channels(ch) {
  gamma = Tensor<T>({ch});
  beta = Tensor<T>({ch});
  gamma.fill(T(1));
  grad_gamma = Tensor<T>({ch});
  grad_beta = Tensor<T>({ch});
}

template <typename T>
Tensor<T> InstanceNorm2d<T>::forward(const Tensor<T>& x, Tape<T>& tape) const {
  require(x.dim(1) == channels, ErrorKind::ShapeMismatch, "instance norm channels");
  Tensor<T> y(x.shape()), xhat(x.shape()), inv_std({x.dim(0), channels});
  K::instance_norm_forward(x, gamma, beta, T(1e-5), y, xhat, inv_std);
  tape.save(std::move(xhat));
  tape.save(std::move(inv_std));
  return y;
}

template <typename T>
Tensor<T> InstanceNorm2d<T>::backward(const Tensor<T>& gy, Tape<T>& tape, bool accum_params) {
  Tensor<T> inv_std = tape.take();
  Tensor<T> xhat = tape.take();
  Tensor<T> dx(gy.shape());
  // dgamma/dbeta accumulation is cheap; when params are frozen the grads are
  // simply discarded by the caller, so always computing them keeps one path.
  Tensor<T> dg({channels}), db({channels});
  K::instance_norm_backward(gy, xhat, inv_std, gamma, dx, accum_params ? grad_gamma : dg,
                            accum_params ? grad_beta : db);
  return dx;
}

template <typename T>
void InstanceNorm2d<T>::collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) {
  out.push_back({prefix + ".gamma", &gamma, &grad_gamma});
  out.push_back({prefix + ".beta", &beta, &grad_beta});
}

// ---- activations ----

template <typename T>
Tensor<T> LeakyReLU<T>::forward(const Tensor<T>& x, Tape<T>& tape) const {
  Tensor<T> y(x.shape());
  K::leaky_relu_forward(x, slope, y);
  tape.save(x);
  return y;
}

template <typename T>
Tensor<T> LeakyReLU<T>::backward(const Tensor<T>& gy, Tape<T>& tape, bool) {
  Tensor<T> x = tape.take();
  Tensor<T> dx(x.shape());
  K::leaky_relu_backward(gy, x, slope, dx);
  return dx;
}

template <typename T>
Tensor<T> Tanh<T>::forward(const Tensor<T>& x, Tape<T>& tape) const {
  Tensor<T> y(x.shape());
  K::tanh_forward(x, y);
  tape.save(y);
  return y;
}

template <typename T>
Tensor<T> Tanh<T>::backward(const Tensor<T>& gy, Tape<T>& tape, bool) {
  Tensor<T> y = tape.take();
  Tensor<T> dx(y.shape());
  K::tanh_backward(gy, y, dx);
  return dx;
}

template <typename T>
Tensor<T> UpsampleNearest2x<T>::forward(const Tensor<T>& x, Tape<T>& tape) const {
  Tensor<T> y({x.dim(0), x.dim(1), 2 * x.dim(2), 2 * x.dim(3)});
  K::upsample2x_forward(x, y);
  return y;
}

template <typename T>
Tensor<T> UpsampleNearest2x<T>::backward(const Tensor<T>& gy, Tape<T>&, bool) {
  Tensor<T> dx({gy.dim(0), gy.dim(1), gy.dim(2) / 2, gy.dim(3) / 2});
  K::upsample2x_backward(gy, dx);
  return dx;
}

// ---- ResidualBlock ----

template <typename T>
ResidualBlock<T>::ResidualBlock(int ch)
    : conv1(ch, ch, 3, 1, 1, false), conv2(ch, ch, 3, 1, 1, false), norm1(ch), norm2(ch) {}

template <typename T>
Tensor<T> ResidualBlock<T>::forward(const Tensor<T>& x, Tape<T>& tape) const {
  Tensor<T> h = conv1.forward(x, tape);
  h = norm1.forward(h, tape);
  Tensor<T> pre = h;
  K::leaky_relu_forward(h, T(0), h);
  tape.save(std::move(pre));
  h = conv2.forward(h, tape);
  h = norm2.forward(h, tape);
  K::axpy(h, T(1), x);
  return h;
}

template <typename T>
Tensor<T> ResidualBlock<T>::backward(const Tensor<T>& gy, Tape<T>& tape, bool accum) {
  Tensor<T> g = norm2.backward(gy, tape, accum);
  g = conv2.backward(g, tape, accum);
  Tensor<T> pre = tape.take();
  Tensor<T> g2(pre.shape());
  K::leaky_relu_backward(g, pre, T(0), g2);
  g2 = norm1.backward(g2, tape, accum);
  g2 = conv1.backward(g2, tape, accum);
  K::axpy(g2, T(1), gy);  // skip connection
  return g2;
}

template <typename T>
void ResidualBlock<T>::collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) {
  conv1.collect_params(prefix + ".conv1", out);
  norm1.collect_params(prefix + ".norm1", out);
  conv2.collect_params(prefix + ".conv2", out);
  norm2.collect_params(prefix + ".norm2", out);
}

template <typename T>
void ResidualBlock<T>::init(Rng& rng) {
  conv1.init(rng);
  conv2.init(rng);
}

// ---- Sequential ----

template <typename T>
Tensor<T> Sequential<T>::forward(const Tensor<T>& x, Tape<T>& tape) const {
  Tensor<T> h = x;
  for (const auto& layer : layers) h = layer->forward(h, tape);
  return h;
}

template <typename T>
Tensor<T> Sequential<T>::backward(const Tensor<T>& gy, Tape<T>& tape, bool accum) {
  Tensor<T> g = gy;
  for (auto it = layers.rbegin(); it != layers.rend(); ++it) g = (*it)->backward(g, tape, accum);
  return g;
}

template <typename T>
void Sequential<T>::collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) {
  for (size_t i = 0; i < layers.size(); ++i) layers[i]->collect_params(prefix + "." + std::to_string(i), out);
}

template <typename T>
void Sequential<T>::init(Rng& rng) {
  for (auto& layer : layers) layer->init(rng);
}

template <typename T>
void zero_grads(std::vector<ParamRef<T>>& params) {
  for (auto& p : params) p.grad->zero();
}

template <typename T>
int64_t param_count(const std::vector<ParamRef<T>>& params) {
  int64_t n = 0;
  for (const auto& p : params) n += p.value->numel();
  return n;
}

#define AAMGAN_INSTANTIATE_LAYERS(T)         \
  template class Conv2d<T>;                  \
  template class InstanceNorm2d<T>;          \
  template class LeakyReLU<T>;               \
  template class Tanh<T>;                    \
  template class UpsampleNearest2x<T>;       \
  template class ResidualBlock<T>;           \
  template class Sequential<T>;              \
  template void zero_grads<T>(std::vector<ParamRef<T>>&); \
  template int64_t param_count<T>(const std::vector<ParamRef<T>>&);

AAMGAN_INSTANTIATE_LAYERS(float)
AAMGAN_INSTANTIATE_LAYERS(double)

}  // namespace aamgan::nets

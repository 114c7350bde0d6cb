#include "aamgan/losses.hpp"

#include <cmath>

#include "aamgan/error.hpp"

namespace aamgan::losses {

LossBreakdown total_losses(double adv, double adv_g, double cls_real, double cls_fake, double rec,
                           const LossWeights& w) {
  require(std::isfinite(adv) && std::isfinite(adv_g) && std::isfinite(cls_real) && std::isfinite(cls_fake) &&
              std::isfinite(rec),
          ErrorKind::NonFiniteLoss, "non-finite loss component");
  require(w.lambda_cls >= 0 && w.lambda_rec >= 0 && std::isfinite(w.lambda_cls) && std::isfinite(w.lambda_rec),
          ErrorKind::DomainError, "loss weights must be finite and non-negative");
  LossBreakdown b;
  b.adv = adv;
  b.adv_g = adv_g;
  b.cls_real = cls_real;
  b.cls_fake = cls_fake;
  b.rec = rec;
  b.total_d = -adv + w.lambda_cls * cls_real;
  b.total_g = adv_g + w.lambda_cls * cls_fake + w.lambda_rec * rec;
  return b;
}

namespace {

template <typename T>
T clamp_prob(T p) {
  const T lo = T(kProbClamp), hi = T(1) - T(kProbClamp);
  return std::min(hi, std::max(lo, p));
}

template <typename T>
void check_prob(T p, const char* what) {
  require(std::isfinite(double(p)) && p >= T(0) && p <= T(1), ErrorKind::DomainError,
          std::string(what) + " is not a probability");
}

}  // namespace

template <typename T>
AdvTerms<T> adversarial_terms(T d_real, T d_fake, bool saturating_g) {
  check_prob(d_real, "d_real");
  check_prob(d_fake, "d_fake");
  const T p = clamp_prob(d_real);
  const T q = clamp_prob(d_fake);
  AdvTerms<T> out;
  out.d_term = -(std::log(p) + std::log(T(1) - q));
  out.g_term = saturating_g ? std::log(T(1) - q) : -std::log(q);
  return out;
}

template <typename T>
T d_neg_log(T p) {
  if (p <= T(kProbClamp) || p >= T(1) - T(kProbClamp)) return p <= T(kProbClamp) ? T(0) : -T(1) / clamp_prob(p);
  return -T(1) / p;
}

template <typename T>
T d_neg_log1m(T q) {
  if (q >= T(1) - T(kProbClamp)) return T(0);
  return T(1) / (T(1) - clamp_prob(q));
}

template <typename T>
T d_log1m(T q) {
  return -d_neg_log1m(q);
}

template <typename T>
T reconstruction_loss(const Tensor<T>& x, const Tensor<T>& x_rec) {
  check_same_shape(x, x_rec, "reconstruction operands");
  double acc = 0;
  for (int64_t i = 0; i < x.numel(); ++i) acc += std::abs(double(x[i]) - double(x_rec[i]));
  return T(acc / double(x.numel()));
}

template <typename T>
Tensor<T> reconstruction_loss_grad(const Tensor<T>& x, const Tensor<T>& x_rec) {
  check_same_shape(x, x_rec, "reconstruction operands");
  Tensor<T> g(x.shape());
  const T inv = T(1) / T(x.numel());
  for (int64_t i = 0; i < x.numel(); ++i) {
    const T d = x_rec[i] - x[i];
    g[i] = d > T(0) ? inv : (d < T(0) ? -inv : T(0));
  }
  return g;
}

template <typename T>
T classification_loss_real(const Tensor<T>& images, std::span<const int> labels,
                           const nets::Discriminator<T>& d, const heads::HeadParams<T>& head) {
  nets::Tape<T> tape;
  auto out = d.forward(images, tape);
  return heads::head_loss(out.embedding, labels, head).value;
}

template <typename T>
std::vector<int> codes_to_labels(const Tensor<T>& codes) {
  require(codes.rank() == 2, ErrorKind::ShapeMismatch, "codes must be NxC");
  std::vector<int> labels(static_cast<size_t>(codes.dim(0)));
  for (int i = 0; i < codes.dim(0); ++i) {
    int best = 0;
    for (int j = 1; j < codes.dim(1); ++j)
      if (codes.at(i, j) > codes.at(i, best)) best = j;
    labels[static_cast<size_t>(i)] = best;
  }
  return labels;
}

template <typename T>
T classification_loss_fake(const Tensor<T>& images, const Tensor<T>& codes, const GeneratorFn<T>& g,
                           const nets::Discriminator<T>& d, const heads::HeadParams<T>& head,
                           std::optional<std::type_identity_t<T>> margin_override) {
  Tensor<T> fake = g(images, codes);
  nets::Tape<T> tape;
  auto out = d.forward(fake, tape);
  auto labels = codes_to_labels(codes);
  return heads::head_loss(out.embedding, labels, head, margin_override).value;
}

template <typename T>
T classification_loss_fake(const Tensor<T>& images, const Tensor<T>& codes, const nets::Generator<T>& g,
                           const nets::Discriminator<T>& d, const heads::HeadParams<T>& head,
                           std::optional<std::type_identity_t<T>> margin_override) {
  GeneratorFn<T> fn = [&g](const Tensor<T>& x, const Tensor<T>& c) {
    nets::Tape<T> tape;
    return g.forward(x, c, tape);
  };
  return classification_loss_fake(images, codes, fn, d, head, margin_override);
}

#define AAMGAN_INSTANTIATE_LOSSES(T)                                                                          \
  template struct AdvTerms<T>;                                                                                \
  template AdvTerms<T> adversarial_terms<T>(T, T, bool);                                                      \
  template T d_neg_log<T>(T);                                                                                 \
  template T d_neg_log1m<T>(T);                                                                               \
  template T d_log1m<T>(T);                                                                                   \
  template T reconstruction_loss<T>(const Tensor<T>&, const Tensor<T>&);                                      \
  template Tensor<T> reconstruction_loss_grad<T>(const Tensor<T>&, const Tensor<T>&);                         \
  template T classification_loss_real<T>(const Tensor<T>&, std::span<const int>, const nets::Discriminator<T>&, \
                                         const heads::HeadParams<T>&);                                        \
  template std::vector<int> codes_to_labels<T>(const Tensor<T>&);                                             \
  template T classification_loss_fake<T>(const Tensor<T>&, const Tensor<T>&, const GeneratorFn<T>&,           \
                                         const nets::Discriminator<T>&, const heads::HeadParams<T>&,          \
                                         std::optional<std::type_identity_t<T>>);                             \
  template T classification_loss_fake<T>(const Tensor<T>&, const Tensor<T>&, const nets::Generator<T>&,       \
                                         const nets::Discriminator<T>&, const heads::HeadParams<T>&,          \
                                         std::optional<std::type_identity_t<T>>);

AAMGAN_INSTANTIATE_LOSSES(float)
AAMGAN_INSTANTIATE_LOSSES(double)

}  // namespace aamgan::losses

#pragma once

#include <functional>
#include <optional>
#include <span>

#include "aamgan/heads.hpp"
#include "aamgan/nets.hpp"

namespace aamgan::losses {

inline constexpr double kProbClamp = 1e-7;  // log terms clamp probabilities to [e, 1-e]

struct LossWeights {
  double lambda_cls = 1.0;
  double lambda_rec = 10.0;
};

// adv is the paper-form adversarial value E[log D(x)] + E[log(1 - D(G(x,c)))];
// adv_g is the generator-side term actually minimized (non-saturating by
// default). total_d = -adv + lambda_cls * cls_real;
// total_g = adv_g + lambda_cls * cls_fake + lambda_rec * rec.
struct LossBreakdown {
  double adv = 0;
  double adv_g = 0;
  double cls_real = 0;
  double cls_fake = 0;
  double rec = 0;
  double total_d = 0;
  double total_g = 0;
};

LossBreakdown total_losses(double adv, double adv_g, double cls_real, double cls_fake, double rec,
                           const LossWeights& w);

template <typename T>
struct AdvTerms {
  T d_term;  // -[log d_real + log(1 - d_fake)], minimized by D
  T g_term;  // -log d_fake (non-saturating) or log(1 - d_fake) (saturating)
};

// Scalar per-sample adversarial terms. Inputs must be probabilities in [0,1];
// anything else raises DomainError. Values are clamped away from {0,1} by
// kProbClamp before the logs.
template <typename T>
AdvTerms<T> adversarial_terms(T d_real, T d_fake, bool saturating_g = false);

// Derivatives of the clamped log terms (zero where the clamp saturates).
template <typename T>
T d_neg_log(T p);  // d/dp of -log(clamp(p))
template <typename T>
T d_neg_log1m(T q);  // d/dq of -log(1 - clamp(q))
template <typename T>
T d_log1m(T q);  // d/dq of log(1 - clamp(q))

// Mean absolute difference normalized by element count.
template <typename T>
T reconstruction_loss(const Tensor<T>& x, const Tensor<T>& x_rec);
// Gradient with respect to x_rec.
template <typename T>
Tensor<T> reconstruction_loss_grad(const Tensor<T>& x, const Tensor<T>& x_rec);

// Head loss on the discriminator embeddings of real images with true labels.
template <typename T>
T classification_loss_real(const Tensor<T>& images, std::span<const int> labels,
                           const nets::Discriminator<T>& d, const heads::HeadParams<T>& head);

// Head loss on embeddings of generated images against their target codes.
// The generator is passed as a callable so tests can substitute stubs.
template <typename T>
using GeneratorFn = std::function<Tensor<T>(const Tensor<T>& x, const Tensor<T>& code)>;

template <typename T>
T classification_loss_fake(const Tensor<T>& images, const Tensor<T>& codes, const GeneratorFn<T>& g,
                           const nets::Discriminator<T>& d, const heads::HeadParams<T>& head,
                           std::optional<std::type_identity_t<T>> margin_override = std::nullopt);

template <typename T>
T classification_loss_fake(const Tensor<T>& images, const Tensor<T>& codes, const nets::Generator<T>& g,
                           const nets::Discriminator<T>& d, const heads::HeadParams<T>& head,
                           std::optional<std::type_identity_t<T>> margin_override = std::nullopt);

// Labels encoded by each one-hot row's argmax.
template <typename T>
std::vector<int> codes_to_labels(const Tensor<T>& codes);

}  // namespace aamgan::losses

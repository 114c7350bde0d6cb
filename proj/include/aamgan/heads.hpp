#pragma once

#include <optional>
#include <span>
#include <vector>

#include "aamgan/rng.hpp"
#include "aamgan/tensor.hpp"

namespace aamgan::heads {

// Auxiliary classifier heads for the discriminator's embedding branch:
// a plain soft-max cross-entropy head and an additive-angular-margin head
// operating on unit-hypersphere features (weights projected to unit columns,
// features normalized and scaled by s, margin m added to the target angle).

enum class HeadKind { Softmax, Aam };

inline constexpr double kNormEps = 1e-12;  // ||v|| below this is degenerate
inline constexpr double kCosClamp = 1e-7;  // cosines clamped to [-1+e, 1-e]

template <typename T>
struct HeadParams {
  HeadKind kind = HeadKind::Softmax;
  int dim = 0;          // embedding dimension d
  int num_classes = 0;  // C
  T scale = T(30);      // s, hypersphere radius (AAM only)
  T margin = T(0.35);   // m in radians, [0, pi); must be 0 for softmax
  Tensor<T> weight;     // d x C, column j is the class-j weight vector
  Tensor<T> bias;       // C; identically zero for AAM

  static HeadParams make_softmax(int d, int c);
  static HeadParams make_aam(int d, int c, T scale, T margin);

  void init_random(Rng& rng, double stddev = 0.05);
  // Renormalizes every weight column to unit length (AAM invariant).
  void project_weight_columns();
  // Throws on any type-invariant violation.
  void validate() const;
};

// v / ||v||; throws NearZeroVector when ||v|| <= kNormEps.
template <typename T>
std::vector<T> normalize_to_unit(std::span<const T> v);

// theta_j = arccos(clamped cosine between the normalized embedding and W_j).
template <typename T>
std::vector<T> cosine_angles(std::span<const T> embedding, const HeadParams<T>& p);

template <typename T>
struct HeadLoss {
  T value = T(0);
  Tensor<T> grad_embeddings;  // B x d
  Tensor<T> grad_weight;      // d x C
  Tensor<T> grad_bias;        // C (zero for AAM)
};

// Mean additive-angular-margin loss over the batch with exact analytic
// gradients. margin_override replaces p.margin for this call (ablation hook).
template <typename T>
HeadLoss<T> aam_loss(const Tensor<T>& embeddings, std::span<const int> labels, const HeadParams<T>& p,
                     std::optional<std::type_identity_t<T>> margin_override = std::nullopt);

// Mean cross-entropy of the affine soft-max head, log-sum-exp stabilized.
template <typename T>
HeadLoss<T> softmax_loss(const Tensor<T>& embeddings, std::span<const int> labels, const HeadParams<T>& p);

// Dispatch on p.kind.
template <typename T>
HeadLoss<T> head_loss(const Tensor<T>& embeddings, std::span<const int> labels, const HeadParams<T>& p,
                      std::optional<std::type_identity_t<T>> margin_override = std::nullopt);

template <typename T>
struct Prediction {
  int label = 0;
  std::vector<T> probs;
};

// Inference path: margin-free logits for AAM (s * cos theta_j), affine
// logits for softmax.
template <typename T>
Prediction<T> predict(std::span<const T> embedding, const HeadParams<T>& p);

}  // namespace aamgan::heads

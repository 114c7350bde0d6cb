#include "aamgan/heads.hpp"

#include <algorithm>
#include <cmath>

#include "aamgan/error.hpp"

namespace aamgan::heads {

namespace {

template <typename T>
void check_labels(std::span<const int> labels, int c, size_t batch) {
  require(labels.size() == batch, ErrorKind::InvalidLabel, "label count does not match batch size");
  for (int y : labels)
    require(y >= 0 && y < c, ErrorKind::InvalidLabel, "label " + std::to_string(y) + " outside [0, C)");
}

// Stable softmax of z in place; returns log-sum-exp.
template <typename T>
T softmax_inplace(std::vector<T>& z) {
  T zmax = *std::max_element(z.begin(), z.end());
  T sum = 0;
  for (T& v : z) {
    v = std::exp(v - zmax);
    sum += v;
  }
  for (T& v : z) v /= sum;
  return zmax + std::log(sum);
}

}  // namespace

template <typename T>
HeadParams<T> HeadParams<T>::make_softmax(int d, int c) {
  HeadParams<T> p;
  p.kind = HeadKind::Softmax;
  p.dim = d;
  p.num_classes = c;
  p.scale = T(1);
  p.margin = T(0);
  p.weight = Tensor<T>({d, c});
  p.bias = Tensor<T>({c});
  return p;
}

template <typename T>
HeadParams<T> HeadParams<T>::make_aam(int d, int c, T scale, T margin) {
  HeadParams<T> p;
  p.kind = HeadKind::Aam;
  p.dim = d;
  p.num_classes = c;
  p.scale = scale;
  p.margin = margin;
  p.weight = Tensor<T>({d, c});
  p.bias = Tensor<T>({c});
  return p;
}

template <typename T>
void HeadParams<T>::init_random(Rng& rng, double stddev) {
  rng.fill_normal(weight, stddev);
  bias.zero();
  if (kind == HeadKind::Aam) project_weight_columns();
}

template <typename T>
void HeadParams<T>::project_weight_columns() {
  for (int j = 0; j < num_classes; ++j) {
    double norm2 = 0;
    for (int r = 0; r < dim; ++r) norm2 += double(weight.at(r, j)) * double(weight.at(r, j));
    double norm = std::sqrt(norm2);
    require(norm > kNormEps, ErrorKind::NearZeroVector, "weight column " + std::to_string(j) + " is near zero");
    for (int r = 0; r < dim; ++r) weight.at(r, j) = T(double(weight.at(r, j)) / norm);
  }
}

template <typename T>
void HeadParams<T>::validate() const {
  require(dim > 0 && num_classes > 0, ErrorKind::ShapeMismatch, "head dimensions must be positive");
  require(weight.shape() == std::vector<int>{dim, num_classes}, ErrorKind::ShapeMismatch, "weight shape");
  require(bias.shape() == std::vector<int>{num_classes}, ErrorKind::ShapeMismatch, "bias shape");
  require(weight.all_finite(), ErrorKind::DomainError, "weight has non-finite entries");
  require(margin >= T(0) && double(margin) < 3.14159265358979323846, ErrorKind::DomainError,
          "margin outside [0, pi)");
  if (kind == HeadKind::Softmax) {
    require(margin == T(0), ErrorKind::DomainError, "softmax head requires margin = 0");
  } else {
    require(scale > T(0), ErrorKind::DomainError, "scale must be positive");
    for (int j = 0; j < num_classes; ++j) {
      double norm2 = 0;
      for (int r = 0; r < dim; ++r) norm2 += double(weight.at(r, j)) * double(weight.at(r, j));
      require(std::abs(std::sqrt(norm2) - 1.0) < 1e-6, ErrorKind::DomainError,
              "AAM weight column " + std::to_string(j) + " is not unit norm");
    }
    for (int j = 0; j < num_classes; ++j)
      require(bias[j] == T(0), ErrorKind::DomainError, "AAM head requires zero bias");
  }
}

template <typename T>
std::vector<T> normalize_to_unit(std::span<const T> v) {
  double norm2 = 0;
  for (T x : v) {
    require(std::isfinite(double(x)), ErrorKind::DomainError, "non-finite entry in vector");
    norm2 += double(x) * double(x);
  }
  double norm = std::sqrt(norm2);
  require(norm > kNormEps, ErrorKind::NearZeroVector, "cannot normalize near-zero vector");
  std::vector<T> out(v.size());
  for (size_t i = 0; i < v.size(); ++i) out[i] = T(double(v[i]) / norm);
  return out;
}

template <typename T>
std::vector<T> cosine_angles(std::span<const T> embedding, const HeadParams<T>& p) {
  require(p.kind == HeadKind::Aam, ErrorKind::DomainError, "cosine_angles requires an AAM head");
  require(static_cast<int>(embedding.size()) == p.dim, ErrorKind::ShapeMismatch, "embedding dimension");
  std::vector<T> unit = normalize_to_unit(embedding);
  std::vector<T> theta(static_cast<size_t>(p.num_classes));
  const T lo = T(-1 + kCosClamp), hi = T(1 - kCosClamp);
  for (int j = 0; j < p.num_classes; ++j) {
    T dot = 0;
    for (int r = 0; r < p.dim; ++r) dot += unit[static_cast<size_t>(r)] * p.weight.at(r, j);
    theta[static_cast<size_t>(j)] = std::acos(std::clamp(dot, lo, hi));
  }
  return theta;
}

template <typename T>
HeadLoss<T> aam_loss(const Tensor<T>& embeddings, std::span<const int> labels, const HeadParams<T>& p,
                     std::optional<std::type_identity_t<T>> margin_override) {
  require(p.kind == HeadKind::Aam, ErrorKind::DomainError, "aam_loss requires an AAM head");
  require(embeddings.rank() == 2 && embeddings.dim(1) == p.dim, ErrorKind::ShapeMismatch,
          "embeddings must be B x d");
  const int batch = embeddings.dim(0);
  require(batch > 0, ErrorKind::EmptySet, "empty batch");
  check_labels<T>(labels, p.num_classes, static_cast<size_t>(batch));

  const int c = p.num_classes, d = p.dim;
  const T m = margin_override.value_or(p.margin);
  const T cos_m = std::cos(m), sin_m = std::sin(m);
  const T s = p.scale;
  const T lo = T(-1 + kCosClamp), hi = T(1 - kCosClamp);

  HeadLoss<T> out;
  out.grad_embeddings = Tensor<T>({batch, d});
  out.grad_weight = Tensor<T>({d, c});
  out.grad_bias = Tensor<T>({c});
  T total = 0;

  std::vector<T> unit(static_cast<size_t>(d));
  std::vector<T> cosines(static_cast<size_t>(c));
  std::vector<T> active(static_cast<size_t>(c));
  std::vector<T> z(static_cast<size_t>(c));

  for (int i = 0; i < batch; ++i) {
    const T* e = embeddings.data() + static_cast<size_t>(i) * d;
    double norm2 = 0;
    for (int r = 0; r < d; ++r) {
      require(std::isfinite(double(e[r])), ErrorKind::DomainError, "non-finite embedding entry");
      norm2 += double(e[r]) * double(e[r]);
    }
    const double norm = std::sqrt(norm2);
    require(norm > kNormEps, ErrorKind::NearZeroVector, "degenerate embedding in batch");
    for (int r = 0; r < d; ++r) unit[static_cast<size_t>(r)] = T(double(e[r]) / norm);

    const int y = labels[static_cast<size_t>(i)];
    for (int j = 0; j < c; ++j) {
      T dot = 0;
      for (int r = 0; r < d; ++r) dot += unit[static_cast<size_t>(r)] * p.weight.at(r, j);
      const bool clamped = dot <= lo || dot >= hi;
      active[static_cast<size_t>(j)] = clamped ? T(0) : T(1);
      cosines[static_cast<size_t>(j)] = std::clamp(dot, lo, hi);
    }

    // Target logit uses cos(theta + m) expanded analytically.
    const T cos_y = cosines[static_cast<size_t>(y)];
    const T sin_y = std::sqrt(T(1) - cos_y * cos_y);
    for (int j = 0; j < c; ++j) z[static_cast<size_t>(j)] = s * cosines[static_cast<size_t>(j)];
    z[static_cast<size_t>(y)] = s * (cos_y * cos_m - sin_y * sin_m);

    std::vector<T> probs = z;
    const T lse = softmax_inplace(probs);
    total += lse - z[static_cast<size_t>(y)];

    // g_j = dloss/d(raw cosine_j), before the normalization Jacobian.
    // dz_y/dcos_y = s*(cos m + (cos/sin) * sin m) from d(sin)/d(cos) = -cos/sin.
    const T inv_b = T(1) / T(batch);
    std::vector<T> g(static_cast<size_t>(c));
    for (int j = 0; j < c; ++j) {
      const T dldz = probs[static_cast<size_t>(j)] - (j == y ? T(1) : T(0));
      T dzdc = s;
      if (j == y) dzdc = s * (cos_m + cos_y / sin_y * sin_m);
      g[static_cast<size_t>(j)] = dldz * dzdc * active[static_cast<size_t>(j)] * inv_b;
    }

    // dL/dunit = sum_j g_j W_j; dL/de = (I - unit unit^T)/norm * dL/dunit.
    std::vector<T> du(static_cast<size_t>(d), T(0));
    for (int j = 0; j < c; ++j) {
      const T gj = g[static_cast<size_t>(j)];
      if (gj == T(0)) continue;
      for (int r = 0; r < d; ++r) {
        du[static_cast<size_t>(r)] += gj * p.weight.at(r, j);
        out.grad_weight.at(r, j) += gj * unit[static_cast<size_t>(r)];
      }
    }
    T proj = 0;
    for (int r = 0; r < d; ++r) proj += du[static_cast<size_t>(r)] * unit[static_cast<size_t>(r)];
    for (int r = 0; r < d; ++r)
      out.grad_embeddings.at(i, r) = T((du[static_cast<size_t>(r)] - proj * unit[static_cast<size_t>(r)]) / norm);
  }

  out.value = total / T(batch);
  require(std::isfinite(double(out.value)), ErrorKind::NonFiniteLoss, "aam loss is not finite");
  return out;
}

template <typename T>
HeadLoss<T> softmax_loss(const Tensor<T>& embeddings, std::span<const int> labels, const HeadParams<T>& p) {
  require(p.kind == HeadKind::Softmax, ErrorKind::DomainError, "softmax_loss requires a softmax head");
  require(embeddings.rank() == 2 && embeddings.dim(1) == p.dim, ErrorKind::ShapeMismatch,
          "embeddings must be B x d");
  const int batch = embeddings.dim(0);
  require(batch > 0, ErrorKind::EmptySet, "empty batch");
  check_labels<T>(labels, p.num_classes, static_cast<size_t>(batch));

  const int c = p.num_classes, d = p.dim;
  HeadLoss<T> out;
  out.grad_embeddings = Tensor<T>({batch, d});
  out.grad_weight = Tensor<T>({d, c});
  out.grad_bias = Tensor<T>({c});
  T total = 0;
  const T inv_b = T(1) / T(batch);

  std::vector<T> z(static_cast<size_t>(c));
  for (int i = 0; i < batch; ++i) {
    const T* e = embeddings.data() + static_cast<size_t>(i) * d;
    const int y = labels[static_cast<size_t>(i)];
    for (int j = 0; j < c; ++j) {
      T acc = p.bias[j];
      for (int r = 0; r < d; ++r) acc += e[r] * p.weight.at(r, j);
      z[static_cast<size_t>(j)] = acc;
    }
    std::vector<T> probs = z;
    const T lse = softmax_inplace(probs);
    total += lse - z[static_cast<size_t>(y)];

    for (int j = 0; j < c; ++j) {
      const T g = (probs[static_cast<size_t>(j)] - (j == y ? T(1) : T(0))) * inv_b;
      out.grad_bias[j] += g;
      for (int r = 0; r < d; ++r) {
        out.grad_weight.at(r, j) += g * e[r];
        out.grad_embeddings.at(i, r) += g * p.weight.at(r, j);
      }
    }
  }

  out.value = total / T(batch);
  require(std::isfinite(double(out.value)), ErrorKind::NonFiniteLoss, "softmax loss is not finite");
  return out;
}

template <typename T>
HeadLoss<T> head_loss(const Tensor<T>& embeddings, std::span<const int> labels, const HeadParams<T>& p,
                      std::optional<std::type_identity_t<T>> margin_override) {
  return p.kind == HeadKind::Aam ? aam_loss(embeddings, labels, p, margin_override)
                                 : softmax_loss(embeddings, labels, p);
}

template <typename T>
Prediction<T> predict(std::span<const T> embedding, const HeadParams<T>& p) {
  require(static_cast<int>(embedding.size()) == p.dim, ErrorKind::ShapeMismatch, "embedding dimension");
  std::vector<T> z(static_cast<size_t>(p.num_classes));
  if (p.kind == HeadKind::Aam) {
    std::vector<T> unit = normalize_to_unit(embedding);
    const T lo = T(-1 + kCosClamp), hi = T(1 - kCosClamp);
    for (int j = 0; j < p.num_classes; ++j) {
      T dot = 0;
      for (int r = 0; r < p.dim; ++r) dot += unit[static_cast<size_t>(r)] * p.weight.at(r, j);
      z[static_cast<size_t>(j)] = p.scale * std::clamp(dot, lo, hi);
    }
  } else {
    for (int j = 0; j < p.num_classes; ++j) {
      T acc = p.bias[j];
      for (int r = 0; r < p.dim; ++r) acc += embedding[static_cast<size_t>(r)] * p.weight.at(r, j);
      z[static_cast<size_t>(j)] = acc;
    }
  }
  softmax_inplace(z);
  Prediction<T> out;
  out.probs = std::move(z);
  out.label = static_cast<int>(std::max_element(out.probs.begin(), out.probs.end()) - out.probs.begin());
  return out;
}

#define AAMGAN_INSTANTIATE_HEADS(T)                                                                           \
  template struct HeadParams<T>;                                                                              \
  template std::vector<T> normalize_to_unit<T>(std::span<const T>);                                           \
  template std::vector<T> cosine_angles<T>(std::span<const T>, const HeadParams<T>&);                         \
  template HeadLoss<T> aam_loss<T>(const Tensor<T>&, std::span<const int>, const HeadParams<T>&,              \
                                   std::optional<std::type_identity_t<T>>);                                                         \
  template HeadLoss<T> softmax_loss<T>(const Tensor<T>&, std::span<const int>, const HeadParams<T>&);         \
  template HeadLoss<T> head_loss<T>(const Tensor<T>&, std::span<const int>, const HeadParams<T>&,             \
                                    std::optional<std::type_identity_t<T>>);                                                        \
  template Prediction<T> predict<T>(std::span<const T>, const HeadParams<T>&);

AAMGAN_INSTANTIATE_HEADS(float)
AAMGAN_INSTANTIATE_HEADS(double)

}  // namespace aamgan::heads

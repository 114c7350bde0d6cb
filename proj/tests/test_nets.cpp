#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "aamgan/nets.hpp"
#include "oracles.hpp"

using namespace aamgan;
using namespace aamgan::nets;

namespace {

NetConfig tiny_config() {
  NetConfig c;
  c.resolution = 32;
  c.num_classes = 4;
  c.base_channels_g = 2;
  c.base_channels_d = 2;
  c.res_blocks = 1;
  c.embedding_dim = 6;
  return c;
}

template <typename T>
Tensor<T> random_images(Rng& rng, int n, int res) {
  Tensor<T> x({n, 3, res, res});
  for (int64_t i = 0; i < x.numel(); ++i) x[i] = T(std::tanh(rng.normal()));
  return x;
}

template <typename T>
Tensor<T> onehot_codes(const std::vector<int>& labels, int c) {
  Tensor<T> code({static_cast<int>(labels.size()), c});
  for (size_t i = 0; i < labels.size(); ++i) code.at(static_cast<int>(i), labels[i]) = T(1);
  return code;
}

}  // namespace

TEST_CASE("spatial_broadcast_concat shapes and exhaustive channel scan") {
  Rng rng(31);
  auto x = random_images<float>(rng, 2, 32);
  auto code = onehot_codes<float>({1, 3}, 8);
  auto out = spatial_broadcast_concat(x, code);
  CHECK(out.shape() == std::vector<int>{2, 11, 32, 32});
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 8; ++j)
      for (int h = 0; h < 32; ++h)
        for (int w = 0; w < 32; ++w) REQUIRE(out.at(i, 3 + j, h, w) == code.at(i, j));
  for (int i = 0; i < 2; ++i)
    for (int ch = 0; ch < 3; ++ch)
      for (int h = 0; h < 32; ++h)
        for (int w = 0; w < 32; ++w) REQUIRE(out.at(i, ch, h, w) == x.at(i, ch, h, w));
}

TEST_CASE("generator output shape, range, and determinism") {
  Rng rng(32);
  auto cfg = tiny_config();
  Generator<float> g(cfg);
  g.init(rng);
  auto x = random_images<float>(rng, 2, cfg.resolution);
  auto code = onehot_codes<float>({0, 2}, cfg.num_classes);

  Tape<float> t1, t2;
  auto y1 = g.forward(x, code, t1);
  auto y2 = g.forward(x, code, t2);
  CHECK(y1.shape() == x.shape());
  for (int64_t i = 0; i < y1.numel(); ++i) {
    REQUIRE(y1[i] == y2[i]);  // bitwise deterministic
    REQUIRE(y1[i] >= -1.0f);
    REQUIRE(y1[i] <= 1.0f);
  }
}

TEST_CASE("generator is sensitive to parameter perturbation") {
  Rng rng(33);
  auto cfg = tiny_config();
  Generator<double> g(cfg);
  g.init(rng);
  auto x = random_images<double>(rng, 1, cfg.resolution);
  auto code = onehot_codes<double>({1}, cfg.num_classes);

  auto out_norm = [&] {
    Tape<double> t;
    auto y = g.forward(x, code, t);
    double n = 0;
    for (int64_t i = 0; i < y.numel(); ++i) n += y[i] * y[i];
    return n;
  };
  auto params = g.params();
  int sensitive = 0;
  for (auto& p : params) {
    double d = oracles::central_diff(out_norm, p.value->data(), 1e-4);
    if (std::abs(d) > 1e-12) ++sensitive;
  }
  // Every parameter tensor's first coordinate influences the output.
  CHECK(sensitive == static_cast<int>(params.size()));
}

TEST_CASE("discriminator outputs and probe gradient vs finite differences") {
  Rng rng(34);
  auto cfg = tiny_config();
  Discriminator<double> d(cfg);
  d.init(rng);
  auto x = random_images<double>(rng, 2, cfg.resolution);

  Tape<double> tape;
  auto out = d.forward(x, tape);
  CHECK(out.realness.shape() == std::vector<int>{2});
  CHECK(out.embedding.shape() == std::vector<int>{2, cfg.embedding_dim});
  for (int i = 0; i < 2; ++i) {
    CHECK(out.realness[i] > 0.0);
    CHECK(out.realness[i] < 1.0);
  }
  CHECK(out.embedding.all_finite());

  // Input gradient of the first sample's realness, checked on a 4x4 probe
  // patch of coordinates.
  Tensor<double> d_r({2});
  d_r[0] = 1.0;
  Tensor<double> d_e({2, cfg.embedding_dim});
  auto dx = d.backward(d_r, d_e, tape, false);

  auto realness0 = [&] {
    Tape<double> t;
    return d.forward(x, t).realness[0];
  };
  double worst = 0;
  for (int h = 8; h < 12; ++h)
    for (int w = 8; w < 12; ++w) {
      double* coord = x.data() + x.idx4(0, 1, h, w);
      double num = oracles::central_diff(realness0, coord, 1e-5);
      double rel = std::abs(num - dx.at(0, 1, h, w)) / std::max({1e-3, std::abs(num), std::abs(dx.at(0, 1, h, w))});
      worst = std::max(worst, rel);
    }
  CHECK(worst <= 1e-3);
}

TEST_CASE("generator backward matches finite differences through the whole stack") {
  Rng rng(35);
  auto cfg = tiny_config();
  Generator<double> g(cfg);
  g.init(rng);
  auto x = random_images<double>(rng, 1, cfg.resolution);
  auto code = onehot_codes<double>({2}, cfg.num_classes);
  Tensor<double> probe({1, 3, cfg.resolution, cfg.resolution});
  rng.fill_normal(probe, 1.0);

  // Scalar objective: <G(x, c), probe>.
  auto objective = [&] {
    Tape<double> t;
    auto y = g.forward(x, code, t);
    double acc = 0;
    for (int64_t i = 0; i < y.numel(); ++i) acc += y[i] * probe[i];
    return acc;
  };

  auto params = g.params();
  nets::zero_grads(params);
  Tape<double> tape;
  auto y = g.forward(x, code, tape);
  auto gx = g.backward(probe, tape, true);

  // Sample a handful of coordinates from every parameter tensor.
  double worst = 0;
  for (auto& p : params) {
    const int64_t n = p.value->numel();
    for (int k = 0; k < 5; ++k) {
      int64_t idx = rng.uniform_int(static_cast<int>(n));
      double num = oracles::central_diff(objective, p.value->data() + idx, 1e-5);
      worst = std::max(worst, oracles::grad_rel_error((*p.grad)[idx], num));
    }
  }
  // And the input gradient.
  for (int k = 0; k < 20; ++k) {
    int64_t idx = rng.uniform_int(static_cast<int>(gx.numel()));
    double num = oracles::central_diff(objective, x.data() + idx, 1e-5);
    worst = std::max(worst, oracles::grad_rel_error(gx[idx], num));
  }
  CHECK(worst <= 1e-6);
}

TEST_CASE("discriminator backward matches finite differences for both branches") {
  Rng rng(36);
  auto cfg = tiny_config();
  Discriminator<double> d(cfg);
  d.init(rng);
  auto x = random_images<double>(rng, 2, cfg.resolution);
  Tensor<double> wr({2});
  Tensor<double> we({2, cfg.embedding_dim});
  rng.fill_normal(wr, 1.0);
  rng.fill_normal(we, 1.0);

  // Scalar objective mixing both heads: <realness, wr> + <embedding, we>.
  auto objective = [&] {
    Tape<double> t;
    auto out = d.forward(x, t);
    double acc = 0;
    for (int i = 0; i < 2; ++i) acc += out.realness[i] * wr[i];
    for (int64_t i = 0; i < out.embedding.numel(); ++i) acc += out.embedding[i] * we[i];
    return acc;
  };

  auto params = d.params();
  nets::zero_grads(params);
  Tape<double> tape;
  auto out = d.forward(x, tape);
  auto dx = d.backward(wr, we, tape, true);

  double worst = 0;
  for (auto& p : params) {
    const int64_t n = p.value->numel();
    for (int k = 0; k < 5; ++k) {
      int64_t idx = rng.uniform_int(static_cast<int>(n));
      double num = oracles::central_diff(objective, p.value->data() + idx, 1e-5);
      worst = std::max(worst, oracles::grad_rel_error((*p.grad)[idx], num));
    }
  }
  for (int k = 0; k < 20; ++k) {
    int64_t idx = rng.uniform_int(static_cast<int>(dx.numel()));
    double num = oracles::central_diff(objective, x.data() + idx, 1e-5);
    worst = std::max(worst, oracles::grad_rel_error(dx[idx], num));
  }
  CHECK(worst <= 1e-6);
}

TEST_CASE("default desk-scale configuration stays under 5M parameters") {
  NetConfig cfg;  // defaults: 32x32, base 32, 4 res blocks, d=128
  Generator<float> g(cfg);
  Discriminator<float> d(cfg);
  int64_t total = nets::param_count(g.params()) + nets::param_count(d.params());
  CHECK(total < 5'000'000);
  CHECK(total > 100'000);
}

TEST_CASE("shape errors are rejected") {
  auto cfg = tiny_config();
  Generator<float> g(cfg);
  Rng rng(37);
  g.init(rng);
  auto x = random_images<float>(rng, 1, 16);  // wrong resolution
  auto code = onehot_codes<float>({0}, cfg.num_classes);
  Tape<float> t;
  CHECK_THROWS_AS((void)g.forward(x, code, t), Error);

  NetConfig bad;
  bad.resolution = 48;
  CHECK_THROWS_AS(Generator<float>{bad}, Error);
}

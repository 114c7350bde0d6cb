#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "aamgan/losses.hpp"
#include "oracles.hpp"

using namespace aamgan;
using namespace aamgan::losses;

namespace {

nets::NetConfig tiny_config() {
  nets::NetConfig c;
  c.resolution = 32;
  c.num_classes = 8;
  c.base_channels_g = 2;
  c.base_channels_d = 2;
  c.res_blocks = 1;
  c.embedding_dim = 6;
  return c;
}

}  // namespace

TEST_CASE("adversarial terms: indifferent, perfect, and random oracle") {
  auto t = adversarial_terms(0.5, 0.5);
  CHECK(t.d_term == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-12));

  auto perfect = adversarial_terms(1.0, 0.0);
  CHECK(perfect.d_term < 1e-5);
  CHECK(perfect.d_term >= 0.0);

  Rng rng(41);
  for (int i = 0; i < 200; ++i) {
    double p = rng.uniform(0.01, 0.99), q = rng.uniform(0.01, 0.99);
    auto terms = adversarial_terms(p, q);
    CHECK(std::abs(terms.d_term - (-(std::log(p) + std::log(1 - q)))) < 1e-12);
    CHECK(std::abs(terms.g_term - (-std::log(q))) < 1e-12);
    auto sat = adversarial_terms(p, q, true);
    CHECK(std::abs(sat.g_term - std::log(1 - q)) < 1e-12);
  }

  CHECK_THROWS_AS((void)adversarial_terms(-0.1, 0.5), Error);
  CHECK_THROWS_AS((void)adversarial_terms(0.5, 1.2), Error);
  CHECK_THROWS_AS((void)adversarial_terms(std::nan(""), 0.5), Error);
}

TEST_CASE("adversarial term derivatives match finite differences") {
  Rng rng(42);
  for (int i = 0; i < 100; ++i) {
    double p = rng.uniform(0.01, 0.99);
    double fd_p = p;
    auto f1 = [&] { return -std::log(fd_p); };
    CHECK(oracles::grad_rel_error(d_neg_log(p), oracles::central_diff(f1, &fd_p, 1e-7)) < 1e-5);
    double q = rng.uniform(0.01, 0.99);
    double fd_q = q;
    auto f2 = [&] { return -std::log(1 - fd_q); };
    CHECK(oracles::grad_rel_error(d_neg_log1m(q), oracles::central_diff(f2, &fd_q, 1e-7)) < 1e-5);
  }
}

TEST_CASE("reconstruction loss identities and oracle") {
  Rng rng(43);
  Tensor<double> x({2, 3, 8, 8});
  rng.fill_normal(x, 0.5);
  CHECK(reconstruction_loss(x, x) == 0.0);

  Tensor<double> shifted = x;
  for (int64_t i = 0; i < shifted.numel(); ++i) shifted[i] += 0.1;
  CHECK(reconstruction_loss(x, shifted) == doctest::Approx(0.1).epsilon(1e-9));

  Tensor<double> y(x.shape());
  rng.fill_normal(y, 0.5);
  double expected = 0;
  for (int64_t i = 0; i < x.numel(); ++i) expected += std::abs(x[i] - y[i]);
  expected /= double(x.numel());
  CHECK(std::abs(reconstruction_loss(x, y) - expected) < 1e-12);

  Tensor<double> wrong({2, 3, 4, 4});
  CHECK_THROWS_AS((void)reconstruction_loss(x, wrong), Error);
}

TEST_CASE("reconstruction loss is a pseudometric") {
  Rng rng(44);
  Tensor<double> a({1, 3, 8, 8}), b(a.shape()), c(a.shape());
  rng.fill_normal(a, 1.0);
  rng.fill_normal(b, 1.0);
  rng.fill_normal(c, 1.0);
  CHECK(reconstruction_loss(a, b) == reconstruction_loss(b, a));
  CHECK(reconstruction_loss(a, a) == 0.0);
  CHECK(reconstruction_loss(a, b) > 0.0);
  CHECK(reconstruction_loss(a, c) <= reconstruction_loss(a, b) + reconstruction_loss(b, c) + 1e-12);
}

TEST_CASE("reconstruction gradient matches finite differences") {
  Rng rng(45);
  Tensor<double> x({1, 3, 4, 4}), y(x.shape());
  rng.fill_normal(x, 1.0);
  rng.fill_normal(y, 1.0);
  auto g = reconstruction_loss_grad(x, y);
  auto f = [&] { return double(reconstruction_loss(x, y)); };
  double worst = 0;
  for (int64_t i = 0; i < y.numel(); ++i) {
    double num = oracles::central_diff(f, y.data() + i, 1e-6);
    worst = std::max(worst, std::abs(num - g[i]));
  }
  CHECK(worst < 1e-8);
}

TEST_CASE("classification_loss_real identities") {
  Rng rng(46);
  auto cfg = tiny_config();
  nets::Discriminator<double> d(cfg);
  d.init(rng);
  Tensor<double> images({3, 3, 32, 32});
  rng.fill_normal(images, 0.4);
  std::vector<int> labels{0, 5, 7};

  // Zeroed softmax head predicts uniformly: loss is ln C regardless of D.
  auto soft = heads::HeadParams<double>::make_softmax(cfg.embedding_dim, cfg.num_classes);
  CHECK(classification_loss_real(images, labels, d, soft) == doctest::Approx(std::log(8.0)).epsilon(1e-9));

  // AAM head with m = 0 equals the cosine softmax value computed directly.
  auto aam = heads::HeadParams<double>::make_aam(cfg.embedding_dim, cfg.num_classes, 4.0, 0.0);
  aam.init_random(rng, 1.0);
  nets::Tape<double> tape;
  auto out = d.forward(images, tape);
  auto direct = heads::aam_loss(out.embedding, labels, aam);
  CHECK(classification_loss_real(images, labels, d, aam) == doctest::Approx(direct.value).epsilon(1e-12));
}

TEST_CASE("classification_loss_fake with identity stub equals real loss") {
  Rng rng(47);
  auto cfg = tiny_config();
  nets::Discriminator<double> d(cfg);
  d.init(rng);
  auto head = heads::HeadParams<double>::make_aam(cfg.embedding_dim, cfg.num_classes, 8.0, 0.3);
  head.init_random(rng, 1.0);

  Tensor<double> images({2, 3, 32, 32});
  rng.fill_normal(images, 0.4);
  std::vector<int> labels{1, 6};
  Tensor<double> codes({2, cfg.num_classes});
  codes.at(0, 1) = 1.0;
  codes.at(1, 6) = 1.0;

  GeneratorFn<double> identity = [](const Tensor<double>& x, const Tensor<double>&) { return x; };
  double fake = classification_loss_fake(images, codes, identity, d, head);
  double real = classification_loss_real(images, labels, d, head);
  CHECK(fake == doctest::Approx(real).epsilon(1e-12));

  // Zeroed softmax head: ln C per sample.
  auto soft = heads::HeadParams<double>::make_softmax(cfg.embedding_dim, cfg.num_classes);
  CHECK(classification_loss_fake(images, codes, identity, d, soft) ==
        doctest::Approx(std::log(8.0)).epsilon(1e-9));

  // Composition oracle through a real generator.
  nets::Generator<double> g(cfg);
  g.init(rng);
  nets::Tape<double> t;
  auto gen = g.forward(images, codes, t);
  nets::Tape<double> t2;
  auto demb = d.forward(gen, t2);
  auto expect = heads::aam_loss(demb.embedding, labels, head);
  CHECK(classification_loss_fake(images, codes, g, d, head) == doctest::Approx(expect.value).epsilon(1e-12));
}

TEST_CASE("total_losses combination and linearity") {
  LossWeights w;  // defaults: lambda_cls = 1, lambda_rec = 10
  auto b = total_losses(1.0, 0.0, 1.0, 0.0, 0.0, w);
  CHECK(b.total_d == 0.0);  // -1 + 1

  LossWeights zero{.lambda_cls = 0.0, .lambda_rec = 0.0};
  auto pure = total_losses(0.7, 1.3, 9.0, 9.0, 9.0, zero);
  CHECK(pure.total_d == doctest::Approx(-0.7));
  CHECK(pure.total_g == doctest::Approx(1.3));

  Rng rng(48);
  for (int i = 0; i < 200; ++i) {
    double adv = rng.normal(), adv_g = rng.normal(), cr = rng.normal(), cf = rng.normal(), rec = std::abs(rng.normal());
    LossWeights lw{.lambda_cls = rng.uniform(0, 5), .lambda_rec = rng.uniform(0, 20)};
    auto out = total_losses(adv, adv_g, cr, cf, rec, lw);
    CHECK(std::abs(out.total_d - (-adv + lw.lambda_cls * cr)) < 1e-12);
    CHECK(std::abs(out.total_g - (adv_g + lw.lambda_cls * cf + lw.lambda_rec * rec)) < 1e-12);
  }

  CHECK_THROWS_AS((void)total_losses(std::nan(""), 0, 0, 0, 0, w), Error);
  LossWeights negw{.lambda_cls = -1.0, .lambda_rec = 0.0};
  CHECK_THROWS_AS((void)total_losses(0, 0, 0, 0, 0, negw), Error);
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "aamgan/datasets.hpp"
#include "aamgan/rng.hpp"

using namespace aamgan;
using namespace aamgan::data;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const char* tag) {
  fs::path dir = fs::temp_directory_path() / (std::string("aamgan_ds_") + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<uint8_t> file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("one_hot basis vectors and exhaustive round trip") {
  auto v = one_hot(0, 3);
  CHECK(v == std::vector<float>{1, 0, 0});
  CHECK(one_hot(2, 3) == std::vector<float>{0, 0, 1});
  for (int c = 2; c <= 64; ++c)
    for (int k = 0; k < c; ++k) {
      auto h = one_hot(k, c);
      float sum = 0;
      int argmax = 0;
      for (int j = 0; j < c; ++j) {
        sum += h[static_cast<size_t>(j)];
        if (h[static_cast<size_t>(j)] > h[static_cast<size_t>(argmax)]) argmax = j;
      }
      REQUIRE(sum == 1.0f);
      REQUIRE(argmax == k);
    }
  CHECK_THROWS_AS((void)one_hot(3, 3), Error);
  CHECK_THROWS_AS((void)one_hot(-1, 3), Error);
}

TEST_CASE("manifest round trip and pixel scaling") {
  auto dir = fresh_dir("manifest");

  // Two 4x4 images with known byte values.
  img::Rgb8 a;
  a.width = a.height = 4;
  a.pixels.assign(48, 0);
  a.at(0, 0, 0) = 255;
  a.at(0, 1, 0) = 128;
  img::write_png((dir / "a.png").string(), a);
  img::Rgb8 b = a;
  for (auto& px : b.pixels) px = 200;
  img::write_png((dir / "b.png").string(), b);

  Manifest m;
  m.resolution = 4;
  m.class_names = {"zero", "one"};
  m.entries = {{"a.png", 0}, {"b.png", 1}, {"a.png", 1}, {"b.png", 0}};
  write_manifest((dir / "manifest.txt").string(), m);

  Manifest back = read_manifest((dir / "manifest.txt").string());
  CHECK(back.class_names == m.class_names);
  CHECK(back.resolution == 4);
  CHECK(back.entries.size() == 4);

  Dataset d = load_dataset((dir / "manifest.txt").string());
  CHECK(d.size() == 4);
  CHECK(d.num_classes() == 2);
  CHECK(d.items[0].onehot.size() == 2);
  // byte 255 -> 1.0, byte 0 -> -1.0, byte 128 -> 128/127.5 - 1
  CHECK(d.items[0].image[0] == doctest::Approx(1.0f));
  CHECK(d.items[0].image[1] == doctest::Approx(128.0f / 127.5f - 1.0f));
  CHECK(d.items[0].image[2] == doctest::Approx(-1.0f));

  // Load determinism: identical manifest gives identical bytes.
  Dataset d2 = load_dataset((dir / "manifest.txt").string());
  for (size_t i = 0; i < d.size(); ++i) {
    REQUIRE(d.items[i].label == d2.items[i].label);
    for (int64_t k = 0; k < d.items[i].image.numel(); ++k)
      REQUIRE(d.items[i].image[k] == d2.items[i].image[k]);
  }

  // Missing file and bad label paths.
  Manifest bad = m;
  bad.entries = {{"missing.png", 0}};
  write_manifest((dir / "bad.txt").string(), bad);
  CHECK_THROWS_AS((void)load_dataset((dir / "bad.txt").string()), Error);
}

TEST_CASE("split_half produces disjoint stratified halves") {
  Dataset d;
  d.class_names = {"a", "b"};
  d.resolution = 4;
  for (int i = 0; i < 100; ++i) {
    LabeledImage item;
    item.image = Tensor<float>({3, 4, 4});
    item.image.fill(float(i));
    item.label = i % 2;
    item.onehot = one_hot(item.label, 2);
    item.source = "img" + std::to_string(i);
    d.items.push_back(std::move(item));
  }
  auto [a, b] = split_half(d);
  CHECK(a.size() == 50);
  CHECK(b.size() == 50);
  std::vector<std::string> seen;
  for (const auto& it : a.items) seen.push_back(it.source);
  for (const auto& it : b.items) seen.push_back(it.source);
  std::sort(seen.begin(), seen.end());
  CHECK(std::unique(seen.begin(), seen.end()) == seen.end());  // disjoint
  int a0 = 0;
  for (const auto& it : a.items) a0 += it.label == 0;
  CHECK(a0 == 25);  // stratified
}

TEST_CASE("label noise: boundary cases and exact count") {
  Dataset d;
  d.class_names = {"a", "b", "c", "d"};
  d.resolution = 4;
  Rng rng(51);
  for (int i = 0; i < 1000; ++i) {
    LabeledImage item;
    item.image = Tensor<float>({3, 4, 4});
    rng.fill_normal(item.image, 1.0);
    item.label = rng.uniform_int(4);
    item.onehot = one_hot(item.label, 4);
    d.items.push_back(std::move(item));
  }

  // p = 0 returns an identical dataset.
  auto clean = inject_label_noise(d, 0.0, 7);
  for (size_t i = 0; i < d.size(); ++i) {
    REQUIRE(clean.items[i].label == d.items[i].label);
    for (int64_t k = 0; k < 8; ++k) REQUIRE(clean.items[i].image[k] == d.items[i].image[k]);
  }

  // p = 1 with two classes flips every label.
  Dataset two;
  two.class_names = {"a", "b"};
  two.resolution = 4;
  for (int i = 0; i < 40; ++i) {
    LabeledImage item;
    item.image = Tensor<float>({3, 4, 4});
    item.label = i % 2;
    item.onehot = one_hot(item.label, 2);
    two.items.push_back(std::move(item));
  }
  auto flipped = inject_label_noise(two, 1.0, 9);
  for (size_t i = 0; i < two.size(); ++i) REQUIRE(flipped.items[i].label == 1 - two.items[i].label);

  // p = 0.3, N = 1000: exactly 300 changes, each to a different class,
  // images byte-identical.
  NoiseRecord rec;
  auto noisy = inject_label_noise(d, 0.3, 11, &rec);
  CHECK(rec.changes.size() == 300);
  int changed = 0;
  for (size_t i = 0; i < d.size(); ++i) {
    if (noisy.items[i].label != d.items[i].label) ++changed;
    for (int64_t k = 0; k < noisy.items[i].image.numel(); ++k)
      REQUIRE(noisy.items[i].image[k] == d.items[i].image[k]);
  }
  CHECK(changed == 300);
  for (const auto& ch : rec.changes) {
    CHECK(ch.from != ch.to);
    CHECK(noisy.items[static_cast<size_t>(ch.index)].label == ch.to);
  }

  CHECK_THROWS_AS((void)inject_label_noise(d, 1.5, 0), Error);
}

TEST_CASE("label noise replacement classes are uniform (chi-square over 50 seeds)") {
  Dataset d;
  d.class_names = {"a", "b", "c", "d"};
  d.resolution = 4;
  Rng rng(52);
  for (int i = 0; i < 1000; ++i) {
    LabeledImage item;
    item.image = Tensor<float>({3, 4, 4});
    item.label = rng.uniform_int(4);
    item.onehot = one_hot(item.label, 4);
    d.items.push_back(std::move(item));
  }

  // Pooled counts of replacement class per original class.
  int64_t counts[4][4] = {};
  for (uint64_t seed = 0; seed < 50; ++seed) {
    NoiseRecord rec;
    (void)inject_label_noise(d, 0.3, 1000 + seed, &rec);
    for (const auto& ch : rec.changes) counts[ch.from][ch.to]++;
  }
  double chi2 = 0;
  for (int o = 0; o < 4; ++o) {
    int64_t row = 0;
    for (int j = 0; j < 4; ++j) row += counts[o][j];
    const double expected = double(row) / 3.0;
    for (int j = 0; j < 4; ++j) {
      if (j == o) {
        REQUIRE(counts[o][j] == 0);
        continue;
      }
      const double diff = counts[o][j] - expected;
      chi2 += diff * diff / expected;
    }
  }
  // df = 4 classes x (3-1); chi-square critical value at alpha = 0.01.
  CHECK(chi2 < 20.09);
}

TEST_CASE("toy dataset generation, determinism, and rule classifier") {
  auto dir = fresh_dir("toy");
  ToySpec spec;
  spec.num_classes = 8;
  spec.per_class = 12;
  spec.resolution = 32;
  spec.seed = 77;
  Manifest m = generate_toy_dataset(spec, (dir / "run1").string());
  CHECK(m.entries.size() == 96);
  CHECK(m.class_names.size() == 8);

  // Balanced classes.
  std::vector<int> per_class(8, 0);
  for (const auto& e : m.entries) per_class[static_cast<size_t>(e.label)]++;
  for (int k = 0; k < 8; ++k) CHECK(per_class[static_cast<size_t>(k)] == 12);

  // The rule classifier is perfect on clean renders.
  Dataset d = load_dataset((dir / "run1" / "manifest.txt").string());
  int correct = 0;
  for (const auto& item : d.items) correct += toy_rule_classify(item.image) == item.label;
  CHECK(correct == static_cast<int>(d.size()));

  // Same seed, second generation: identical image bytes.
  (void)generate_toy_dataset(spec, (dir / "run2").string());
  for (const auto& e : m.entries) {
    auto b1 = file_bytes(dir / "run1" / e.path);
    auto b2 = file_bytes(dir / "run2" / e.path);
    REQUIRE(!b1.empty());
    REQUIRE(b1 == b2);
  }

  ToySpec bad = spec;
  bad.num_classes = 40;
  CHECK_THROWS_AS((void)generate_toy_dataset(bad, (dir / "run3").string()), Error);
}

TEST_CASE("png round trip preserves bytes") {
  auto dir = fresh_dir("png");
  Rng rng(53);
  img::Rgb8 image;
  image.width = 17;
  image.height = 9;
  image.pixels.resize(17 * 9 * 3);
  for (auto& p : image.pixels) p = static_cast<uint8_t>(rng.uniform_int(256));
  img::write_png((dir / "x.png").string(), image);
  auto back = img::read_png((dir / "x.png").string());
  CHECK(back.width == 17);
  CHECK(back.height == 9);
  CHECK(back.pixels == image.pixels);

  CHECK_THROWS_AS((void)img::read_png((dir / "nope.png").string()), Error);
}

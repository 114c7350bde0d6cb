#pragma once

#include <string>
#include <utility>
#include <vector>

#include "aamgan/image_io.hpp"
#include "aamgan/tensor.hpp"

namespace aamgan::data {

// Manifest file: '#'-prefixed header lines naming the classes and the
// resolution, then one `relative/path.png,label_index` record per line.
struct Manifest {
  struct Entry {
    std::string path;  // relative to the manifest's directory
    int label = 0;
  };
  std::vector<Entry> entries;
  std::vector<std::string> class_names;
  int resolution = 0;

  int num_classes() const { return static_cast<int>(class_names.size()); }
};

Manifest read_manifest(const std::string& path);
void write_manifest(const std::string& path, const Manifest& m);

struct LabeledImage {
  Tensor<float> image;  // 3xHxW in [-1, 1]
  int label = 0;
  std::vector<float> onehot;
  std::string source;  // original relative path
};

struct Dataset {
  std::vector<LabeledImage> items;
  std::vector<std::string> class_names;
  int resolution = 0;

  int num_classes() const { return static_cast<int>(class_names.size()); }
  size_t size() const { return items.size(); }

  // Gathers items[indices] into a batch tensor plus labels.
  Tensor<float> gather_images(const std::vector<int>& indices) const;
  std::vector<int> gather_labels(const std::vector<int>& indices) const;
};

// Decodes every manifest entry, resizing to the declared resolution and
// scaling bytes to [-1, 1]. Ordering follows the manifest.
Dataset load_dataset(const std::string& manifest_path);

// Deterministic stratified split into two disjoint halves (per-class
// alternation in manifest order).
std::pair<Dataset, Dataset> split_half(const Dataset& d);

std::vector<float> one_hot(int label, int num_classes);

struct NoiseRecord {
  struct Change {
    int index;
    int from;
    int to;
  };
  std::vector<Change> changes;
};

// Replaces the labels of exactly round(p*N) uniformly chosen samples with a
// uniformly random different class. Images are untouched.
Dataset inject_label_noise(const Dataset& d, double p, uint64_t seed, NoiseRecord* record = nullptr);

// Synthetic stand-in dataset: each class renders a distinct shape/color
// combination with position and brightness jitter the class rule ignores.
struct ToySpec {
  int num_classes = 8;  // <= 16 (four shapes x four colors)
  int per_class = 500;
  int resolution = 32;
  uint64_t seed = 0;
};

// Writes images/ and manifest.txt under out_dir; returns the manifest.
Manifest generate_toy_dataset(const ToySpec& spec, const std::string& out_dir);

// Fixed rule classifier for toy renders (shape from fill ratio, color from
// channel pattern). Returns -1 when no shape is found.
int toy_rule_classify(const img::Rgb8& image);
int toy_rule_classify(const Tensor<float>& image);

}  // namespace aamgan::data

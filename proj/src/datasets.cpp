#include "aamgan/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "aamgan/error.hpp"
#include "aamgan/rng.hpp"

namespace fs = std::filesystem;

namespace aamgan::data {

Manifest read_manifest(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::MissingFile, "cannot open manifest " + path);
  Manifest m;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::string body = line.substr(1);
      auto colon = body.find(':');
      if (colon == std::string::npos) continue;  // free-form comment
      std::string key = body.substr(0, colon);
      key.erase(std::remove_if(key.begin(), key.end(), ::isspace), key.end());
      std::string value = body.substr(colon + 1);
      while (!value.empty() && value.front() == ' ') value.erase(value.begin());
      if (key == "classes") {
        std::stringstream ss(value);
        std::string name;
        while (std::getline(ss, name, ',')) m.class_names.push_back(name);
      } else if (key == "resolution") {
        m.resolution = std::stoi(value);
      }
      continue;
    }
    auto comma = line.rfind(',');
    require(comma != std::string::npos, ErrorKind::BadLabel,
            "manifest line " + std::to_string(lineno) + " has no label field");
    Manifest::Entry e;
    e.path = line.substr(0, comma);
    try {
      e.label = std::stoi(line.substr(comma + 1));
    } catch (const std::exception&) {
      fail(ErrorKind::BadLabel, "manifest line " + std::to_string(lineno) + ": bad label");
    }
    m.entries.push_back(std::move(e));
  }
  require(m.num_classes() >= 2, ErrorKind::BadLabel, "manifest must declare at least two classes");
  require(m.resolution > 0, ErrorKind::BadLabel, "manifest must declare a resolution");
  for (const auto& e : m.entries)
    require(e.label >= 0 && e.label < m.num_classes(), ErrorKind::BadLabel,
            "label " + std::to_string(e.label) + " outside class range for " + e.path);
  return m;
}

void write_manifest(const std::string& path, const Manifest& m) {
  std::ofstream out(path, std::ios::trunc);
  require(out.good(), ErrorKind::IOFailure, "cannot write manifest " + path);
  out << "# aamgan-manifest v1\n# classes: ";
  for (size_t i = 0; i < m.class_names.size(); ++i) out << (i ? "," : "") << m.class_names[i];
  out << "\n# resolution: " << m.resolution << "\n";
  for (const auto& e : m.entries) out << e.path << "," << e.label << "\n";
  require(out.good(), ErrorKind::IOFailure, "failed writing manifest " + path);
}

Tensor<float> Dataset::gather_images(const std::vector<int>& indices) const {
  require(!indices.empty(), ErrorKind::EmptySet, "empty batch");
  const auto& first = items[static_cast<size_t>(indices[0])].image;
  Tensor<float> out({static_cast<int>(indices.size()), 3, first.dim(1), first.dim(2)});
  const size_t plane = static_cast<size_t>(first.numel());
  for (size_t i = 0; i < indices.size(); ++i) {
    const auto& img = items[static_cast<size_t>(indices[i])].image;
    std::copy(img.data(), img.data() + plane, out.data() + i * plane);
  }
  return out;
}

std::vector<int> Dataset::gather_labels(const std::vector<int>& indices) const {
  std::vector<int> out(indices.size());
  for (size_t i = 0; i < indices.size(); ++i) out[i] = items[static_cast<size_t>(indices[i])].label;
  return out;
}

Dataset load_dataset(const std::string& manifest_path) {
  Manifest m = read_manifest(manifest_path);
  const fs::path base = fs::path(manifest_path).parent_path();
  Dataset d;
  d.class_names = m.class_names;
  d.resolution = m.resolution;
  d.items.reserve(m.entries.size());
  for (const auto& e : m.entries) {
    LabeledImage item;
    img::Rgb8 raw = img::read_png((base / e.path).string());
    item.image = img::to_tensor(img::resize(raw, m.resolution, m.resolution));
    item.label = e.label;
    item.onehot = one_hot(e.label, m.num_classes());
    item.source = e.path;
    d.items.push_back(std::move(item));
  }
  return d;
}

std::pair<Dataset, Dataset> split_half(const Dataset& d) {
  Dataset a, b;
  a.class_names = b.class_names = d.class_names;
  a.resolution = b.resolution = d.resolution;
  std::vector<int> seen(static_cast<size_t>(d.num_classes()), 0);
  for (const auto& item : d.items) {
    int k = seen[static_cast<size_t>(item.label)]++;
    (k % 2 == 0 ? a : b).items.push_back(item);
  }
  return {std::move(a), std::move(b)};
}

std::vector<float> one_hot(int label, int num_classes) {
  require(num_classes >= 2, ErrorKind::InvalidLabel, "need at least two classes");
  require(label >= 0 && label < num_classes, ErrorKind::InvalidLabel,
          "label " + std::to_string(label) + " outside [0, " + std::to_string(num_classes) + ")");
  std::vector<float> v(static_cast<size_t>(num_classes), 0.0f);
  v[static_cast<size_t>(label)] = 1.0f;
  return v;
}

Dataset inject_label_noise(const Dataset& d, double p, uint64_t seed, NoiseRecord* record) {
  require(p >= 0.0 && p <= 1.0, ErrorKind::DomainError, "noise fraction outside [0, 1]");
  require(d.num_classes() >= 2, ErrorKind::ClassMismatch, "need at least two classes to distort labels");
  Dataset out = d;
  const int n = static_cast<int>(d.size());
  const int k = static_cast<int>(std::llround(p * n));

  // Uniform sample without replacement: partial Fisher-Yates over indices.
  Rng rng(seed);
  std::vector<int> indices(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) indices[static_cast<size_t>(i)] = i;
  for (int i = 0; i < k; ++i) {
    int j = i + rng.uniform_int(n - i);
    std::swap(indices[static_cast<size_t>(i)], indices[static_cast<size_t>(j)]);
  }

  const int c = d.num_classes();
  for (int i = 0; i < k; ++i) {
    const int idx = indices[static_cast<size_t>(i)];
    auto& item = out.items[static_cast<size_t>(idx)];
    const int old = item.label;
    int repl = rng.uniform_int(c - 1);
    if (repl >= old) ++repl;  // uniform over the C-1 wrong classes
    item.label = repl;
    item.onehot = one_hot(repl, c);
    if (record) record->changes.push_back({idx, old, repl});
  }
  return out;
}

// ---- toy dataset ----

namespace {

enum ToyShape { kSquare = 0, kCircle = 1, kDiamond = 2, kBar = 3 };

constexpr uint8_t kToyColors[4][3] = {
    {200, 40, 40},   // red
    {40, 200, 40},   // green
    {40, 40, 200},   // blue
    {200, 200, 40},  // yellow
};

const char* kShapeNames[4] = {"square", "circle", "diamond", "bar"};
const char* kColorNames[4] = {"red", "green", "blue", "yellow"};

bool inside_shape(int shape, int x, int y, int cx, int cy, int r) {
  const int dx = std::abs(x - cx), dy = std::abs(y - cy);
  switch (shape) {
    case kSquare: return dx <= r && dy <= r;
    case kCircle: return dx * dx + dy * dy <= r * r;
    case kDiamond: return dx + dy <= r;
    default: return dx <= r && 4 * dy <= r;  // horizontal bar
  }
}

img::Rgb8 render_toy(int cls, int resolution, Rng& rng) {
  const int shape = cls / 4;
  const int color = cls % 4;
  img::Rgb8 out;
  out.width = out.height = resolution;
  out.pixels.assign(static_cast<size_t>(resolution) * resolution * 3, 0);

  const int bg = 25 + rng.uniform_int(30);  // gray background
  const double brightness = rng.uniform(0.75, 1.05);
  const int r = resolution / 4 + rng.uniform_int(3) - 1;
  const int jitter = resolution / 8;
  const int cx = resolution / 2 + rng.uniform_int(2 * jitter + 1) - jitter;
  const int cy = resolution / 2 + rng.uniform_int(2 * jitter + 1) - jitter;

  for (int y = 0; y < resolution; ++y)
    for (int x = 0; x < resolution; ++x)
      for (int c = 0; c < 3; ++c) {
        double v = inside_shape(shape, x, y, cx, cy, r) ? kToyColors[color][c] * brightness : bg;
        v += rng.normal() * 2.5;  // sensor-style noise
        out.at(y, x, c) = static_cast<uint8_t>(std::clamp(v, 0.0, 255.0));
      }
  return out;
}

}  // namespace

Manifest generate_toy_dataset(const ToySpec& spec, const std::string& out_dir) {
  require(spec.num_classes >= 2 && spec.num_classes <= 16, ErrorKind::DomainError,
          "toy dataset supports 2..16 classes");
  require(spec.per_class > 0 && spec.resolution >= 16, ErrorKind::DomainError, "bad toy spec");
  std::error_code ec;
  fs::create_directories(fs::path(out_dir) / "images", ec);
  require(!ec, ErrorKind::IOFailure, "cannot create " + out_dir);

  Manifest m;
  m.resolution = spec.resolution;
  for (int k = 0; k < spec.num_classes; ++k)
    m.class_names.push_back(std::string(kShapeNames[k / 4]) + "-" + kColorNames[k % 4]);

  char name[64];
  for (int k = 0; k < spec.num_classes; ++k)
    for (int i = 0; i < spec.per_class; ++i) {
      Rng rng(derive_seed(spec.seed, static_cast<uint64_t>(k), static_cast<uint64_t>(i)));
      img::Rgb8 image = render_toy(k, spec.resolution, rng);
      std::snprintf(name, sizeof name, "images/cls%02d_%05d.png", k, i);
      img::write_png((fs::path(out_dir) / name).string(), image);
      m.entries.push_back({name, k});
    }
  write_manifest((fs::path(out_dir) / "manifest.txt").string(), m);
  return m;
}

int toy_rule_classify(const img::Rgb8& image) {
  // Shape pixels are saturated colors; background is gray.
  int minx = image.width, maxx = -1, miny = image.height, maxy = -1;
  int64_t count = 0;
  double sum[3] = {0, 0, 0};
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x) {
      const int r = image.at(y, x, 0), g = image.at(y, x, 1), b = image.at(y, x, 2);
      const int spread = std::max({std::abs(r - g), std::abs(r - b), std::abs(g - b)});
      if (spread > 40) {
        ++count;
        minx = std::min(minx, x);
        maxx = std::max(maxx, x);
        miny = std::min(miny, y);
        maxy = std::max(maxy, y);
        sum[0] += r;
        sum[1] += g;
        sum[2] += b;
      }
    }
  if (count < 8) return -1;

  const int side = std::max(maxx - minx + 1, maxy - miny + 1);
  const double fill = double(count) / (double(side) * side);
  int shape;
  if (fill > 0.85)
    shape = kSquare;
  else if (fill > 0.60)
    shape = kCircle;
  else if (fill > 0.40)
    shape = kDiamond;
  else
    shape = kBar;

  const double peak = std::max({sum[0], sum[1], sum[2]});
  const bool hi[3] = {sum[0] > 0.7 * peak, sum[1] > 0.7 * peak, sum[2] > 0.7 * peak};
  int color;
  if (hi[0] && hi[1] && !hi[2])
    color = 3;  // yellow
  else if (hi[0])
    color = 0;
  else if (hi[1])
    color = 1;
  else
    color = 2;
  return shape * 4 + color;
}

int toy_rule_classify(const Tensor<float>& image) {
  return toy_rule_classify(img::to_image(image));
}

}  // namespace aamgan::data

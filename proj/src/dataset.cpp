// Copyright 2026 The ARMKit Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>

#include "armkit/aatd.hpp"
#include "armkit/errors.hpp"
#include "armkit/experiments.hpp"
#include "armkit/rng.hpp"

namespace armkit {

Tensor Dataset::images(bool train, const std::vector<std::size_t>& indices) const {
  const std::vector<double>& src = train ? train_x : test_x;
  const std::size_t len = image_numel();
  std::vector<double> v;
  v.reserve(indices.size() * len);
  for (std::size_t i : indices) v.insert(v.end(), src.begin() + static_cast<long>(i * len), src.begin() + static_cast<long>((i + 1) * len));
  const std::size_t c = static_cast<std::size_t>(channels), s = static_cast<std::size_t>(size);
  return Tensor::from({indices.size(), c, s, s}, std::move(v));
}

std::vector<int> Dataset::labels(bool train, const std::vector<std::size_t>& indices) const {
  const std::vector<int>& src = train ? train_y : test_y;
  std::vector<int> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(src[i]);
  return out;
}

Dataset make_texture_dataset(std::uint64_t seed, int classes, int count, int size, double test_fraction,
                             double noise) {
  if (classes < 2) throw ConfigError("texture dataset: needs at least 2 classes");
  if (size < 16) throw ConfigError("texture dataset: size must be >= 16, got " + std::to_string(size));
  if (count < 2 * classes) throw ConfigError("texture dataset: count too small for the class count");
  const std::size_t n_test = static_cast<std::size_t>(std::llround(count * test_fraction));
  if (n_test == 0 || n_test >= static_cast<std::size_t>(count)) {
    throw ConfigError("texture dataset: test_fraction leaves an empty split");
  }
  Dataset d;
  d.size = size;
  d.classes = classes;
  const double jitter = 15.0 * std::numbers::pi / 180.0;
  const std::size_t n_train = static_cast<std::size_t>(count) - n_test;
  for (int i = 0; i < count; ++i) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    const int label = i % classes;
    const double theta = label * std::numbers::pi / classes + rng.uniform(-jitter, jitter);
    const double freq = rng.uniform(0.28, 0.42);
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double contrast = rng.uniform(0.6, 1.0);
    const double cx = std::cos(theta), sy = std::sin(theta);
    const bool train = static_cast<std::size_t>(i) < n_train;
    std::vector<double>& xs = train ? d.train_x : d.test_x;
    for (int r = 0; r < size; ++r) {
      for (int c = 0; c < size; ++c) {
        const double g = std::sin(2.0 * std::numbers::pi * freq * (c * cx + r * sy) + phase);
        xs.push_back(contrast * g + noise * rng.normal());
      }
    }
    (train ? d.train_y : d.test_y).push_back(label);
  }
  return d;
}

namespace {

struct Pgm {
  int width = 0, height = 0;
  std::vector<double> pixels;  // [-1, 1]
};

Pgm read_pgm(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  std::size_t pos = 0;
  auto token = [&]() {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
    const std::size_t start = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    if (start == pos) throw ParseError(path.string() + ": truncated PGM header");
    return bytes.substr(start, pos - start);
  };
  const std::string magic = token();
  if (magic != "P2" && magic != "P5") throw ParseError(path.string() + ": not a PGM file (magic '" + magic + "')");
  Pgm img;
  int maxval = 0;
  try {
    img.width = std::stoi(token());
    img.height = std::stoi(token());
    maxval = std::stoi(token());
  } catch (const std::logic_error&) {
    throw ParseError(path.string() + ": malformed PGM header");
  }
  if (img.width < 1 || img.height < 1 || maxval < 1 || maxval > 65535) throw ParseError(path.string() + ": bad PGM header");
  const std::size_t n = static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height);
  img.pixels.reserve(n);
  auto push = [&](int v) { img.pixels.push_back(2.0 * v / maxval - 1.0); };
  if (magic == "P2") {
    for (std::size_t i = 0; i < n; ++i) {
      try {
        push(std::stoi(token()));
      } catch (const std::logic_error&) {
        throw ParseError(path.string() + ": malformed PGM pixel data");
      }
    }
  } else {
    ++pos;  // single whitespace after maxval
    const std::size_t bpp = maxval < 256 ? 1 : 2;
    if (bytes.size() < pos + n * bpp) throw ParseError(path.string() + ": truncated PGM pixel data");
    for (std::size_t i = 0; i < n; ++i) {
      const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + pos + i * bpp);
      push(bpp == 1 ? p[0] : (p[0] << 8) | p[1]);
    }
  }
  return img;
}

}  // namespace

Dataset load_folder_dataset(const std::filesystem::path& root, double test_fraction, std::uint64_t seed) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root)) throw ConfigError("dataset.path: '" + root.string() + "' is not a directory");
  std::vector<fs::path> class_dirs;
  for (const auto& e : fs::directory_iterator(root)) {
    if (e.is_directory()) class_dirs.push_back(e.path());
  }
  std::sort(class_dirs.begin(), class_dirs.end());
  if (class_dirs.size() < 2) throw ConfigError("dataset.path: needs at least two class sub-directories");

  struct Item {
    std::vector<double> pixels;
    int label;
  };
  std::vector<Item> items;
  int size = 0;
  for (std::size_t c = 0; c < class_dirs.size(); ++c) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(class_dirs[c])) {
      if (e.is_regular_file() && e.path().extension() == ".pgm") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const fs::path& f : files) {
      Pgm img = read_pgm(f);
      if (img.width != img.height) throw ConfigError("dataset.path: " + f.string() + " is not square");
      if (size == 0) size = img.width;
      if (img.width != size) throw ConfigError("dataset.path: " + f.string() + " differs in size from earlier images");
      items.push_back({std::move(img.pixels), static_cast<int>(c)});
    }
  }
  Rng rng(derive_seed(seed, "folder-shuffle"));
  for (std::size_t i = items.size(); i > 1; --i) std::swap(items[i - 1], items[rng.below(i)]);
  const std::size_t n_test = static_cast<std::size_t>(std::llround(static_cast<double>(items.size()) * test_fraction));
  if (n_test == 0 || n_test >= items.size()) throw ConfigError("dataset.path: too few images for a train/test split");

  Dataset d;
  d.size = size;
  d.classes = static_cast<int>(class_dirs.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    const bool train = i < items.size() - n_test;
    auto& xs = train ? d.train_x : d.test_x;
    xs.insert(xs.end(), items[i].pixels.begin(), items[i].pixels.end());
    (train ? d.train_y : d.test_y).push_back(items[i].label);
  }
  return d;
}

Dataset make_dataset(const DatasetSpec& spec) {
  if (spec.kind == "folder") return load_folder_dataset(spec.path, spec.test_fraction, spec.seed);
  return make_texture_dataset(spec.seed, 2, spec.count, spec.size, spec.test_fraction, spec.noise);
}

}  // namespace armkit

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
#include <cmath>
#include <cstdio>

#include "armkit/errors.hpp"
#include "armkit/experiments.hpp"
#include "armkit/rng.hpp"

namespace armkit {

const std::vector<double> kBlurLevels{0.0, 0.5, 1.0, 1.5, 2.0};

std::vector<double> gaussian_blur(const std::vector<double>& image, int size, double sigma) {
  if (sigma < 0.0) throw ConfigError("blur sigma must be >= 0");
  if (image.size() != static_cast<std::size_t>(size * size)) throw DimensionError("gaussian_blur: image is not size x size");
  if (sigma == 0.0) return image;
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> w;
  double total = 0.0;
  for (int d = -radius; d <= radius; ++d) {
    w.push_back(std::exp(-0.5 * d * d / (sigma * sigma)));
    total += w.back();
  }
  for (double& v : w) v /= total;
  // Reflect without repeating the edge: -1 -> 1, size -> size - 2.
  auto reflect = [size](int i) {
    const int period = 2 * (size - 1);
    i = ((i % period) + period) % period;
    return i < size ? i : period - i;
  };
  std::vector<double> tmp(image.size()), out(image.size());
  for (int r = 0; r < size; ++r) {
    for (int c = 0; c < size; ++c) {
      double acc = 0.0;
      for (int d = -radius; d <= radius; ++d) acc += w[static_cast<std::size_t>(d + radius)] * image[static_cast<std::size_t>(r * size + reflect(c + d))];
      tmp[static_cast<std::size_t>(r * size + c)] = acc;
    }
  }
  for (int r = 0; r < size; ++r) {
    for (int c = 0; c < size; ++c) {
      double acc = 0.0;
      for (int d = -radius; d <= radius; ++d) acc += w[static_cast<std::size_t>(d + radius)] * tmp[static_cast<std::size_t>(reflect(r + d) * size + c)];
      out[static_cast<std::size_t>(r * size + c)] = acc;
    }
  }
  return out;
}

namespace {

constexpr double kTiny = 1e-12;

// (mean, log std, log mean |neighbour difference|) of one H x W plane.
void plane_features(std::span<const double> p, std::size_t h, std::size_t w, std::vector<double>& out) {
  double mean = 0.0;
  for (double v : p) mean += v;
  mean /= static_cast<double>(p.size());
  double var = 0.0;
  for (double v : p) var += (v - mean) * (v - mean);
  var /= static_cast<double>(p.size());
  double diff = 0.0;
  std::size_t pairs = 0;
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      if (c + 1 < w) diff += std::abs(p[r * w + c + 1] - p[r * w + c]), ++pairs;
      if (r + 1 < h) diff += std::abs(p[(r + 1) * w + c] - p[r * w + c]), ++pairs;
    }
  }
  out.push_back(mean);
  out.push_back(0.5 * std::log(var + kTiny));
  out.push_back(std::log(diff / static_cast<double>(std::max<std::size_t>(1, pairs)) + kTiny));
}

// [B x C x H x W] -> B rows of 3C features.
std::vector<std::vector<double>> map_features(const Tensor& maps) {
  const std::size_t B = maps.dim(0), C = maps.dim(1), H = maps.dim(2), W = maps.dim(3);
  const auto v = maps.data();
  std::vector<std::vector<double>> rows(B);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t c = 0; c < C; ++c) plane_features(v.subspan((b * C + c) * H * W, H * W), H, W, rows[b]);
  }
  return rows;
}

// Multinomial logistic regression, standardized inputs, full-batch gradient
// descent with a small L2 penalty. Returns held-out accuracy.
double fit_probe(const std::vector<std::vector<double>>& xtr, const std::vector<int>& ytr,
                 const std::vector<std::vector<double>>& xte, const std::vector<int>& yte, int classes) {
  const std::size_t d = xtr.front().size(), n = xtr.size();
  std::vector<double> mu(d, 0.0), sd(d, 0.0);
  for (const auto& x : xtr) {
    for (std::size_t j = 0; j < d; ++j) mu[j] += x[j] / static_cast<double>(n);
  }
  for (const auto& x : xtr) {
    for (std::size_t j = 0; j < d; ++j) sd[j] += (x[j] - mu[j]) * (x[j] - mu[j]) / static_cast<double>(n);
  }
  for (double& s : sd) s = std::sqrt(s) + 1e-8;
  auto standardize = [&](const std::vector<double>& x) {
    std::vector<double> z(d);
    for (std::size_t j = 0; j < d; ++j) z[j] = (x[j] - mu[j]) / sd[j];
    return z;
  };
  std::vector<std::vector<double>> ztr;
  for (const auto& x : xtr) ztr.push_back(standardize(x));

  const std::size_t K = static_cast<std::size_t>(classes);
  std::vector<double> W(K * d, 0.0), b(K, 0.0), gW(K * d), gb(K), logits(K);
  auto scores = [&](const std::vector<double>& z) {
    for (std::size_t k = 0; k < K; ++k) {
      double s = b[k];
      for (std::size_t j = 0; j < d; ++j) s += W[k * d + j] * z[j];
      logits[k] = s;
    }
  };
  const double lr = 0.5, l2 = 1e-3;
  for (int it = 0; it < 800; ++it) {
    std::fill(gW.begin(), gW.end(), 0.0);
    std::fill(gb.begin(), gb.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      scores(ztr[i]);
      const double m = *std::max_element(logits.begin(), logits.end());
      double s = 0.0;
      for (double& l : logits) s += (l = std::exp(l - m));
      for (std::size_t k = 0; k < K; ++k) {
        const double g = logits[k] / s - (static_cast<int>(k) == ytr[i] ? 1.0 : 0.0);
        gb[k] += g;
        for (std::size_t j = 0; j < d; ++j) gW[k * d + j] += g * ztr[i][j];
      }
    }
    for (std::size_t k = 0; k < K; ++k) {
      b[k] -= lr * gb[k] / static_cast<double>(n);
      for (std::size_t j = 0; j < d; ++j) W[k * d + j] -= lr * (gW[k * d + j] / static_cast<double>(n) + l2 * W[k * d + j]);
    }
  }
  std::size_t correct = 0;
  for (std::size_t i = 0; i < xte.size(); ++i) {
    scores(standardize(xte[i]));
    if (std::max_element(logits.begin(), logits.end()) - logits.begin() == yte[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(xte.size());
}

}  // namespace

ProbeReport blur_probe(Model& model, const Dataset& data, const ProbeSpec& spec, std::uint64_t seed, bool trained) {
  const int S = model.config.stages();
  std::vector<int> stages = spec.tap_stages;
  if (stages.empty()) {
    for (int s = 0; s < S; ++s) stages.push_back(s);
  }
  for (int s : stages) {
    if (s < 0 || s >= S) {
      throw ConfigError("probe.tap_stages: stage " + std::to_string(s) + " does not exist (model has " +
                        std::to_string(S) + ")");
    }
  }
  if (data.size != model.config.image_size || data.channels != model.config.in_channels) {
    throw ConfigError("dataset: image size does not match the model");
  }
  const std::size_t sources = std::min<std::size_t>(static_cast<std::size_t>(spec.sources), data.test_count());
  const std::size_t n_train = static_cast<std::size_t>(std::llround(static_cast<double>(sources) * spec.train_fraction));
  if (sources < 4 || n_train == 0 || n_train >= sources) {
    throw ConfigError("probe.sources: need at least 4 test images with a non-empty probe split");
  }
  std::vector<std::size_t> order(sources);
  for (std::size_t i = 0; i < sources; ++i) order[i] = i;
  Rng rng(derive_seed(seed, "probe"));
  for (std::size_t i = sources; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

  ProbeReport rep;
  rep.seed = seed;
  rep.trained = trained;
  rep.levels = kBlurLevels;
  rep.stages = stages;

  const std::size_t L = kBlurLevels.size(), px = static_cast<std::size_t>(data.size * data.size);
  const std::size_t C = static_cast<std::size_t>(data.channels);
  // features[tap][source][level]; tap 0 is the input.
  std::vector<std::vector<std::vector<std::vector<double>>>> feats(
      stages.size() + 1, std::vector<std::vector<std::vector<double>>>(sources, std::vector<std::vector<double>>(L)));
  std::vector<int> last_block(static_cast<std::size_t>(S));
  for (int s = 0; s < S; ++s) last_block[static_cast<std::size_t>(s)] = model.config.blocks_per_stage[static_cast<std::size_t>(s)] - 1;

  NoGradGuard no_grad;
  for (std::size_t l = 0; l < L; ++l) {
    std::vector<double> x(sources * C * px);
    for (std::size_t i = 0; i < sources; ++i) {
      for (std::size_t c = 0; c < C; ++c) {
        const auto begin = data.test_x.begin() + static_cast<long>((i * C + c) * px);
        const std::vector<double> blurred = gaussian_blur(std::vector<double>(begin, begin + static_cast<long>(px)), data.size, kBlurLevels[l]);
        std::copy(blurred.begin(), blurred.end(), x.begin() + static_cast<long>((i * C + c) * px));
      }
    }
    const std::size_t sz = static_cast<std::size_t>(data.size);
    const Tensor images = Tensor::from({sources, C, sz, sz}, std::move(x));
    const auto in_rows = map_features(images);
    for (std::size_t i = 0; i < sources; ++i) feats[0][i][l] = in_rows[i];
    model_forward(images, model, false, [&](const TapEvent& e) {
      if (e.name != "attention_map" || e.block != last_block[static_cast<std::size_t>(e.stage)]) return;
      for (std::size_t t = 0; t < stages.size(); ++t) {
        if (stages[t] != e.stage) continue;
        const auto rows = map_features(e.value);
        for (std::size_t i = 0; i < sources; ++i) feats[t + 1][i][l] = rows[i];
      }
    });
  }

  for (std::size_t t = 0; t <= stages.size(); ++t) {
    std::vector<std::vector<double>> xtr, xte;
    std::vector<int> ytr, yte;
    for (std::size_t k = 0; k < sources; ++k) {
      const bool train = k < n_train;
      for (std::size_t l = 0; l < L; ++l) {
        (train ? xtr : xte).push_back(feats[t][order[k]][l]);
        (train ? ytr : yte).push_back(static_cast<int>(l));
      }
    }
    const double acc = fit_probe(xtr, ytr, xte, yte, static_cast<int>(L));
    if (t == 0) {
      rep.input_accuracy = acc;
    } else {
      rep.stage_accuracy.push_back(acc);
    }
  }
  return rep;
}

std::string probe_csv(const std::vector<ProbeReport>& reports) {
  std::string out = "seed,trained,tap,accuracy\n";
  char buf[40];
  for (const ProbeReport& r : reports) {
    const std::string head = std::to_string(r.seed) + "," + (r.trained ? "true" : "false") + ",";
    std::snprintf(buf, sizeof buf, "%.9g", r.input_accuracy);
    out += head + "input," + buf + "\n";
    for (std::size_t i = 0; i < r.stages.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.9g", r.stage_accuracy[i]);
      out += head + "stage" + std::to_string(r.stages[i]) + "," + buf + "\n";
    }
  }
  return out;
}

}  // namespace armkit

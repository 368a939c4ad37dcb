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

#pragma once

// Desk-scale experiments: a 1-D aliasing demonstration, a synthetic texture
// dataset, seeded toy training with CSV metrics and checkpoints, sweeps over
// ARM placement / filter variant / bank size, and a blur-level probe.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "armkit/config.hpp"
#include "armkit/vit.hpp"

namespace armkit {

// ---- aliasing demo ----------------------------------------------------------

struct SpectrumBin {
  double hz;
  double magnitude;  // single-sided amplitude
};

struct AliasReport {
  double signal_hz = 0.0;
  double sample_rate_hz = 0.0;
  double nyquist_hz = 0.0;
  // Where the tone must land after sampling: |f - m * fs| folded into
  // [0, fs / 2].
  double expected_hz = 0.0;
  double dominant_hz = 0.0;
  // Amplitude at expected_hz, and its share of the original tone's energy.
  double peak_magnitude = 0.0;
  double aliased_energy_ratio = 0.0;
  bool aliased = false;
  std::vector<SpectrumBin> spectrum;
};

double alias_frequency(double signal_hz, double sample_rate_hz);

// A unit sine at signal_hz is synthesized on a fine grid (an integer multiple
// of the sample rate, at least 8x the larger frequency), optionally smoothed
// by a circular Gaussian of std prefilter_sigma_s seconds, then decimated to
// sample_rate_hz. The report describes the DFT of the decimated signal.
AliasReport alias_demo_1d(double signal_hz, double sample_rate_hz, std::optional<double> prefilter_sigma_s = {},
                          double duration_s = 4.0);

// 20 log10 of the alias-bin amplitude ratio.
double attenuation_db(const AliasReport& unfiltered, const AliasReport& filtered);

std::string spectrum_csv(const AliasReport& report);

// ---- datasets ---------------------------------------------------------------

struct Dataset {
  int channels = 1;
  int size = 0;
  int classes = 2;
  std::vector<double> train_x, test_x;  // row-major [count x channels x size x size]
  std::vector<int> train_y, test_y;

  std::size_t train_count() const { return train_y.size(); }
  std::size_t test_count() const { return test_y.size(); }
  std::size_t image_numel() const { return static_cast<std::size_t>(channels * size * size); }
  Tensor images(bool train, const std::vector<std::size_t>& indices) const;
  std::vector<int> labels(bool train, const std::vector<std::size_t>& indices) const;
};

// Sinusoidal gratings near the Nyquist frequency (0.28 - 0.42 cycles/pixel)
// with random phase, contrast and additive noise. The class is the grating
// orientation: class c sits at c * 180 / classes degrees, jittered by up to
// +-15 degrees. Labels alternate so classes stay balanced; the last
// round(count * test_fraction) images form the test split.
Dataset make_texture_dataset(std::uint64_t seed, int classes, int count, int size, double test_fraction = 0.25,
                             double noise = 1.0);

// <root>/<class>/*.pgm (P2 or P5), classes in name order, pixels mapped to
// [-1, 1]. Images are shuffled with `seed` before the split.
Dataset load_folder_dataset(const std::filesystem::path& root, double test_fraction, std::uint64_t seed);

Dataset make_dataset(const DatasetSpec& spec);

// ---- training ---------------------------------------------------------------

struct EpochMetrics {
  int epoch = 0;
  double train_loss = 0.0, train_accuracy = 0.0;
  double test_loss = 0.0, test_accuracy = 0.0;
  double wall_ms = 0.0;
};

struct MetricsRecord {
  std::uint64_t seed = 0;
  std::string config_hash;
  std::vector<EpochMetrics> epochs;
  double final_test_accuracy = 0.0;
  double final_test_loss = 0.0;
  double wall_ms = 0.0;
  bool diverged = false;
  std::string diagnostic;
};

struct TrainedRun {
  MetricsRecord metrics;
  Model model;
};

// One seed. Throws nothing on divergence: the record is marked and training
// stops at the offending step.
TrainedRun train_one(const ExperimentConfig& cfg, const Dataset& data, std::uint64_t seed);

struct RunOptions {
  // Empty: nothing is written.
  std::filesystem::path out_dir;
  bool export_attention = false;
  // Seeds (or sweep rows) trained concurrently; results keep config order.
  int threads = 1;
};

// Every seed of cfg. Writes <out>/metrics.csv, <out>/config.json and
// <out>/checkpoints/seed_<s>/ (plus <out>/attention/seed_<s>/ on request).
std::vector<MetricsRecord> train_toy(const ExperimentConfig& cfg, const RunOptions& options = {});

// Columns config_hash, seed, epoch, split, loss, accuracy, wall_ms.
std::string metrics_csv(const std::vector<MetricsRecord>& records);

double mean_test_accuracy(const std::vector<MetricsRecord>& records);

// ---- checkpoints and attention export ---------------------------------------

// AATD file per parameter and buffer plus manifest.json; bank ARMs also
// store their filter bank (arm_bank.aatd + arm_bank.json).
void save_checkpoint(const std::filesystem::path& dir, Model& model, const nlohmann::json& extra = {});
Model load_checkpoint(const std::filesystem::path& dir);

// stage<s>_block<b>.aatd holding the folded attention map [B x C x H x W]
// after ARM (identical to the raw map when the block has none).
std::vector<std::filesystem::path> export_attention(Model& model, const Tensor& images,
                                                    const std::filesystem::path& dir);

// ---- sweeps -----------------------------------------------------------------

struct SweepRow {
  std::vector<std::string> keys;  // values of the swept axes
  std::string config_hash;
  std::vector<MetricsRecord> runs;
  double mean_test_accuracy = 0.0;
  double std_test_accuracy = 0.0;
  double mean_final_train_loss = 0.0;
  bool all_finite = true;
  std::vector<std::string> extra;  // sweep-specific trailing columns
};

struct SweepTable {
  std::vector<std::string> axes;
  std::vector<std::string> extra_columns;
  std::vector<SweepRow> rows;

  std::string csv() const;
};

// Trains every distinct config once (keyed by config hash); rows that share
// a config share its results.
class SweepRunner {
 public:
  explicit SweepRunner(RunOptions options) : options_(std::move(options)) {}
  const std::vector<MetricsRecord>& run(const ExperimentConfig& cfg);
  std::size_t distinct_runs() const { return cache_.size(); }

 private:
  RunOptions options_;
  std::vector<std::pair<std::string, std::vector<MetricsRecord>>> cache_;
};

// The five placements (ARM in stage 0, or after the stage-0 merge), then the
// stage subsets {}, {0}, {0,1}, {2,3}, {0,1,2,3} with ARM after attention.
// Needs a hierarchical base model with four stages.
SweepTable placement_sweep(const ExperimentConfig& base, SweepRunner& runner);

// No ARM, then gaussian / learnable / bank ARM after attention in stage 0.
// Reports each variant's delta to the no-ARM mean (in accuracy points) and
// whether it is within 0.5 points of it, next to the reference full-scale
// deltas.
SweepTable filter_sweep(const ExperimentConfig& base, SweepRunner& runner);

// Bank ARM after attention in stage 0 with n atoms for each n in sizes; all
// rows use the same seeds.
SweepTable bank_size_sweep(const ExperimentConfig& base, const std::vector<int>& sizes, SweepRunner& runner);

// ---- blur probe -------------------------------------------------------------

// Separable Gaussian blur with reflect padding, radius ceil(3 sigma);
// sigma == 0 copies.
std::vector<double> gaussian_blur(const std::vector<double>& image, int size, double sigma);

struct ProbeReport {
  std::uint64_t seed = 0;
  bool trained = false;
  std::vector<double> levels;
  // Held-out probe accuracy on the blurred input images themselves.
  double input_accuracy = 0.0;
  std::vector<int> stages;
  std::vector<double> stage_accuracy;
};

// Blurs `spec.sources` test images at every level, taps the ARM-smoothed
// attention map of the last block of each tapped stage, summarizes every
// channel by (mean, log std, log mean absolute neighbour difference) and
// fits a multinomial logistic regression per stage to predict the level.
// Sources, not blurred copies, are split between probe train and test.
ProbeReport blur_probe(Model& model, const Dataset& data, const ProbeSpec& spec, std::uint64_t seed, bool trained);

std::string probe_csv(const std::vector<ProbeReport>& reports);

extern const std::vector<double> kBlurLevels;

}  // namespace armkit

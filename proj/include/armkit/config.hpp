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

// Experiment configuration and its JSON form. Parsing fills defaults,
// rejects unknown keys and enforces every model/ARM invariant, so a config
// that parses is a config that runs. Errors name the offending field by its
// dotted path.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "armkit/arm.hpp"
#include "armkit/optim.hpp"
#include "armkit/vit.hpp"

namespace armkit {

struct BankSpec {
  int n = 8;
  int k = 3;
  std::optional<int> dog_count;  // default: n / 4
  // Default: derived from the run seed.
  std::optional<std::uint64_t> seed;

  int resolved_dog_count() const;
};

struct ArmSpec {
  ArmVariant variant = ArmVariant::kBank;
  int k = 3;  // gaussian / learnable
  double gaussian_sigma = 1.0;
  bool external_modulation = true;
  BankSpec bank;

  ArmConfig resolve(std::uint64_t run_seed) const;
};

struct DatasetSpec {
  std::string kind = "texture";  // texture | folder
  int count = 512;
  int size = 16;
  double test_fraction = 0.25;
  double noise = 1.0;
  std::uint64_t seed = 0;
  std::string path;  // folder datasets: one sub-directory of PGM files per class
};

struct ProbeSpec {
  std::vector<int> tap_stages;  // empty: every stage
  int sources = 120;            // test images blurred at every level
  double train_fraction = 0.7;
};

struct ExperimentConfig {
  DatasetSpec dataset;
  std::vector<std::uint64_t> seeds{0};
  int epochs = 1;
  int batch_size = 32;
  OptimizerSpec optimizer;
  ModelConfig model;
  // Present exactly when model.arm_placement is not none; filled with
  // defaults when the placement asks for an ARM and the section is absent.
  std::optional<ArmSpec> arm;
  ProbeSpec probe;
  bool record_wall_time = false;

  void validate() const;
};

nlohmann::json to_json(const ModelConfig& m);
nlohmann::json to_json(const ArmSpec& a);
nlohmann::json to_json(const ExperimentConfig& c);

ModelConfig model_config_from_json(const nlohmann::json& j, const std::string& path = "model");
ArmSpec arm_spec_from_json(const nlohmann::json& j, const std::string& path = "arm");
ExperimentConfig experiment_config_from_json(const nlohmann::json& j);

// Text is either a config object or a run manifest carrying one under
// "config". Malformed JSON raises ParseError with line and column.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

std::string canonical_json(const ExperimentConfig& c);
// FNV-1a 64 of canonical_json, as 16 hex digits.
std::string config_hash(const ExperimentConfig& c);

}  // namespace armkit

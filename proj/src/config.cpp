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

#include "armkit/config.hpp"

#include <cstdio>
#include <set>

#include "armkit/aatd.hpp"
#include "armkit/errors.hpp"
#include "armkit/filter_bank.hpp"
#include "armkit/rng.hpp"

namespace armkit {

using nlohmann::json;

int BankSpec::resolved_dog_count() const { return dog_count ? *dog_count : default_dog_count(n); }

ArmConfig ArmSpec::resolve(std::uint64_t run_seed) const {
  ArmConfig cfg;
  cfg.variant = variant;
  cfg.kernel_size = k;
  cfg.gaussian_sigma = gaussian_sigma;
  cfg.use_external_modulation = external_modulation;
  if (variant == ArmVariant::kBank) {
    const std::uint64_t seed = bank.seed ? *bank.seed : derive_seed(run_seed, "bank");
    cfg.bank = sample_bank(seed, bank.n, bank.k, bank.resolved_dog_count());
  }
  cfg.validate();
  return cfg;
}

void ExperimentConfig::validate() const {
  if (seeds.empty()) throw ConfigError("seeds: needs at least one seed");
  if (epochs < 1) throw ConfigError("epochs: must be >= 1, got " + std::to_string(epochs));
  if (batch_size < 1) throw ConfigError("batch_size: must be >= 1, got " + std::to_string(batch_size));
  optimizer.validate();
  model.validate();

  if (dataset.kind != "texture" && dataset.kind != "folder") {
    throw ConfigError("dataset.kind: expected texture | folder, got '" + dataset.kind + "'");
  }
  if (dataset.kind == "texture") {
    if (dataset.size < 16) throw ConfigError("dataset.size: must be >= 16, got " + std::to_string(dataset.size));
    if (dataset.count < 8) throw ConfigError("dataset.count: must be >= 8, got " + std::to_string(dataset.count));
    if (dataset.size != model.image_size) {
      throw ConfigError("dataset.size (" + std::to_string(dataset.size) + ") must equal model.image_size (" +
                        std::to_string(model.image_size) + ")");
    }
    if (model.in_channels != 1) throw ConfigError("model.in_channels: texture images have 1 channel");
  } else if (dataset.path.empty()) {
    throw ConfigError("dataset.path: required for folder datasets");
  }
  if (!(dataset.test_fraction > 0.0 && dataset.test_fraction < 1.0)) {
    throw ConfigError("dataset.test_fraction: must be in (0, 1)");
  }
  if (dataset.noise < 0.0) throw ConfigError("dataset.noise: must be >= 0");

  if (arm && model.arm_placement == Placement::kNone) {
    throw ConfigError("arm: an ARM section is given but model.arm_placement is 'none'");
  }
  if (!arm && model.arm_placement != Placement::kNone) {
    throw ConfigError("arm: model.arm_placement '" + to_string(model.arm_placement) + "' needs an arm section");
  }
  if (arm) {
    if (arm->variant == ArmVariant::kBank) {
      if (arm->bank.n < 2) throw ConfigError("arm.bank.n: must be >= 2, got " + std::to_string(arm->bank.n));
      const int dogs = arm->bank.resolved_dog_count();
      if (dogs < 0 || dogs >= arm->bank.n) {
        throw ConfigError("arm.bank.dog_count: must be in [0, arm.bank.n), got " + std::to_string(dogs));
      }
      if (arm->bank.k < 3 || arm->bank.k % 2 == 0) {
        throw ConfigError("arm.bank.k: must be odd and >= 3, got " + std::to_string(arm->bank.k));
      }
    } else if (arm->k < 3 || arm->k % 2 == 0) {
      throw ConfigError("arm.k: must be odd and >= 3, got " + std::to_string(arm->k));
    }
    if (!(arm->gaussian_sigma > 0.0)) throw ConfigError("arm.gaussian_sigma: must be positive");
  }

  for (int s : probe.tap_stages) {
    if (s < 0 || s >= model.stages()) {
      throw ConfigError("probe.tap_stages: stage " + std::to_string(s) + " does not exist (model has " +
                        std::to_string(model.stages()) + ")");
    }
  }
  if (probe.sources < 10) throw ConfigError("probe.sources: must be >= 10");
  if (!(probe.train_fraction > 0.0 && probe.train_fraction < 1.0)) {
    throw ConfigError("probe.train_fraction: must be in (0, 1)");
  }
}

json to_json(const ModelConfig& m) {
  return json{{"image_size", m.image_size},
              {"patch_size", m.patch_size},
              {"in_channels", m.in_channels},
              {"embed_dim", m.embed_dim},
              {"heads", m.heads},
              {"mlp_ratio", m.mlp_ratio},
              {"num_classes", m.num_classes},
              {"blocks_per_stage", m.blocks_per_stage},
              {"hierarchical", m.hierarchical},
              {"window_size", m.window_size},
              {"shift_windows", m.shift_windows},
              {"arm_placement", to_string(m.arm_placement)},
              {"arm_stages", std::vector<int>(m.arm_stages.begin(), m.arm_stages.end())}};
}

json to_json(const ArmSpec& a) {
  json j{{"variant", to_string(a.variant)},
         {"k", a.k},
         {"gaussian_sigma", a.gaussian_sigma},
         {"external_modulation", a.external_modulation}};
  if (a.variant == ArmVariant::kBank) {
    j["bank"] = json{{"n", a.bank.n},
                     {"k", a.bank.k},
                     {"dog_count", a.bank.resolved_dog_count()},
                     {"seed", a.bank.seed ? json(*a.bank.seed) : json(nullptr)}};
  }
  return j;
}

json to_json(const ExperimentConfig& c) {
  json j{{"dataset",
          {{"kind", c.dataset.kind},
           {"count", c.dataset.count},
           {"size", c.dataset.size},
           {"test_fraction", c.dataset.test_fraction},
           {"noise", c.dataset.noise},
           {"seed", c.dataset.seed},
           {"path", c.dataset.path}}},
         {"seeds", c.seeds},
         {"epochs", c.epochs},
         {"batch_size", c.batch_size},
         {"optimizer",
          {{"name", c.optimizer.name},
           {"lr", c.optimizer.lr},
           {"weight_decay", c.optimizer.weight_decay},
           {"momentum", c.optimizer.momentum},
           {"beta1", c.optimizer.beta1},
           {"beta2", c.optimizer.beta2},
           {"epsilon", c.optimizer.epsilon}}},
         {"model", to_json(c.model)},
         {"arm", c.arm ? to_json(*c.arm) : json(nullptr)},
         {"probe",
          {{"tap_stages", c.probe.tap_stages},
           {"sources", c.probe.sources},
           {"train_fraction", c.probe.train_fraction}}},
         {"record_wall_time", c.record_wall_time}};
  return j;
}

namespace {

// Reads one JSON object, tracking which keys were consumed.
class Fields {
 public:
  Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + ": expected an object");
  }

  bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }

  const json* take(const std::string& key) {
    seen_.insert(key);
    return has(key) ? &j_.at(key) : nullptr;
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void read(const std::string& key, int& out) {
    if (const json* v = take(key)) {
      if (!v->is_number_integer()) throw ConfigError(field(key) + ": expected an integer, got " + v->dump());
      const auto x = v->get<long long>();
      if (x < -(1LL << 31) || x > (1LL << 31) - 1) throw ConfigError(field(key) + ": out of range");
      out = static_cast<int>(x);
    }
  }
  void read(const std::string& key, std::uint64_t& out) {
    if (const json* v = take(key)) out = as_u64(*v, field(key));
  }
  void read(const std::string& key, double& out) {
    if (const json* v = take(key)) {
      if (!v->is_number()) throw ConfigError(field(key) + ": expected a number, got " + v->dump());
      out = v->get<double>();
    }
  }
  void read(const std::string& key, bool& out) {
    if (const json* v = take(key)) {
      if (!v->is_boolean()) throw ConfigError(field(key) + ": expected true or false, got " + v->dump());
      out = v->get<bool>();
    }
  }
  void read(const std::string& key, std::string& out) {
    if (const json* v = take(key)) {
      if (!v->is_string()) throw ConfigError(field(key) + ": expected a string, got " + v->dump());
      out = v->get<std::string>();
    }
  }
  void read(const std::string& key, std::vector<int>& out) {
    if (const json* v = take(key)) {
      if (!v->is_array()) throw ConfigError(field(key) + ": expected an array of integers");
      out.clear();
      for (const json& e : *v) {
        if (!e.is_number_integer()) throw ConfigError(field(key) + ": expected an array of integers, got " + e.dump());
        out.push_back(e.get<int>());
      }
    }
  }

  static std::uint64_t as_u64(const json& v, const std::string& where) {
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
      throw ConfigError(where + ": expected a non-negative integer, got " + v.dump());
    }
    return v.get<std::uint64_t>();
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError(field(it.key()) + ": unknown key");
    }
  }

 private:
  std::string where() const { return path_.empty() ? "config" : path_; }
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace

ModelConfig model_config_from_json(const json& j, const std::string& path) {
  ModelConfig m;
  Fields f(j, path);
  f.read("image_size", m.image_size);
  f.read("patch_size", m.patch_size);
  f.read("in_channels", m.in_channels);
  f.read("embed_dim", m.embed_dim);
  f.read("heads", m.heads);
  f.read("mlp_ratio", m.mlp_ratio);
  f.read("num_classes", m.num_classes);
  f.read("blocks_per_stage", m.blocks_per_stage);
  f.read("hierarchical", m.hierarchical);
  f.read("window_size", m.window_size);
  f.read("shift_windows", m.shift_windows);
  std::string placement = to_string(m.arm_placement);
  f.read("arm_placement", placement);
  m.arm_placement = parse_placement(placement);
  std::vector<int> stages(m.arm_stages.begin(), m.arm_stages.end());
  f.read("arm_stages", stages);
  m.arm_stages = std::set<int>(stages.begin(), stages.end());
  if (m.arm_stages.size() != stages.size()) throw ConfigError(f.field("arm_stages") + ": duplicate stage");
  f.finish();
  m.validate();
  return m;
}

ArmSpec arm_spec_from_json(const json& j, const std::string& path) {
  ArmSpec a;
  Fields f(j, path);
  std::string variant = to_string(a.variant);
  f.read("variant", variant);
  a.variant = parse_arm_variant(variant);
  f.read("k", a.k);
  f.read("gaussian_sigma", a.gaussian_sigma);
  f.read("external_modulation", a.external_modulation);
  if (const json* b = f.take("bank")) {
    if (a.variant != ArmVariant::kBank) {
      throw ConfigError(f.field("bank") + ": only allowed when " + f.field("variant") + " is 'bank' (got '" +
                        variant + "')");
    }
    Fields bf(*b, f.field("bank"));
    bf.read("n", a.bank.n);
    bf.read("k", a.bank.k);
    if (const json* d = bf.take("dog_count")) {
      if (!d->is_number_integer()) throw ConfigError(bf.field("dog_count") + ": expected an integer");
      a.bank.dog_count = d->get<int>();
    }
    if (const json* s = bf.take("seed")) a.bank.seed = Fields::as_u64(*s, bf.field("seed"));
    bf.finish();
  }
  f.finish();
  return a;
}

ExperimentConfig experiment_config_from_json(const json& j) {
  ExperimentConfig c;
  Fields f(j, "");
  if (const json* d = f.take("dataset")) {
    Fields df(*d, "dataset");
    df.read("kind", c.dataset.kind);
    df.read("count", c.dataset.count);
    df.read("size", c.dataset.size);
    df.read("test_fraction", c.dataset.test_fraction);
    df.read("noise", c.dataset.noise);
    df.read("seed", c.dataset.seed);
    df.read("path", c.dataset.path);
    df.finish();
  }
  if (const json* s = f.take("seeds")) {
    if (!s->is_array()) throw ConfigError("seeds: expected an array of non-negative integers");
    c.seeds.clear();
    for (const json& e : *s) c.seeds.push_back(Fields::as_u64(e, "seeds[]"));
  }
  f.read("epochs", c.epochs);
  f.read("batch_size", c.batch_size);
  if (const json* o = f.take("optimizer")) {
    Fields of(*o, "optimizer");
    of.read("name", c.optimizer.name);
    of.read("lr", c.optimizer.lr);
    of.read("weight_decay", c.optimizer.weight_decay);
    of.read("momentum", c.optimizer.momentum);
    of.read("beta1", c.optimizer.beta1);
    of.read("beta2", c.optimizer.beta2);
    of.read("epsilon", c.optimizer.epsilon);
    of.finish();
  }
  if (const json* m = f.take("model")) c.model = model_config_from_json(*m, "model");
  if (const json* a = f.take("arm")) c.arm = arm_spec_from_json(*a, "arm");
  if (!c.arm && c.model.arm_placement != Placement::kNone) c.arm = ArmSpec{};
  if (const json* p = f.take("probe")) {
    Fields pf(*p, "probe");
    pf.read("tap_stages", c.probe.tap_stages);
    pf.read("sources", c.probe.sources);
    pf.read("train_fraction", c.probe.train_fraction);
    pf.finish();
  }
  f.read("record_wall_time", c.record_wall_time);
  f.finish();
  c.validate();
  return c;
}

ExperimentConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ParseError("config: invalid JSON at line " + std::to_string(line) + ", column " + std::to_string(col));
  }
  if (j.is_object() && j.contains("command") && j.contains("config")) return experiment_config_from_json(j.at("config"));
  return experiment_config_from_json(j);
}

ExperimentConfig load_config(const std::string& path) { return parse_config(read_file(path)); }

std::string canonical_json(const ExperimentConfig& c) { return to_json(c).dump(); }

std::string config_hash(const ExperimentConfig& c) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(canonical_json(c))));
  return buf;
}

}  // namespace armkit

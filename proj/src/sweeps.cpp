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

#include <cmath>
#include <cstdio>

#include "armkit/errors.hpp"
#include "armkit/experiments.hpp"

namespace armkit {

namespace {

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string stage_key(const std::set<int>& stages) {
  if (stages.empty()) return "-";
  std::string s;
  for (int st : stages) s += (s.empty() ? "" : ";") + std::to_string(st);
  return s;
}

SweepRow summarize(std::vector<std::string> keys, const ExperimentConfig& cfg, const std::vector<MetricsRecord>& runs) {
  SweepRow row;
  row.keys = std::move(keys);
  row.config_hash = config_hash(cfg);
  row.runs = runs;
  const double n = static_cast<double>(runs.size());
  double loss = 0.0;
  for (const MetricsRecord& r : runs) {
    row.mean_test_accuracy += r.final_test_accuracy / n;
    loss += r.epochs.back().train_loss / n;
    if (r.diverged || !std::isfinite(r.final_test_loss)) row.all_finite = false;
    for (const EpochMetrics& e : r.epochs) {
      if (!std::isfinite(e.train_loss) || !std::isfinite(e.test_loss)) row.all_finite = false;
    }
  }
  row.mean_final_train_loss = loss;
  if (runs.size() > 1) {
    double ss = 0.0;
    for (const MetricsRecord& r : runs) ss += std::pow(r.final_test_accuracy - row.mean_test_accuracy, 2);
    row.std_test_accuracy = std::sqrt(ss / (n - 1.0));
  }
  return row;
}

ExperimentConfig with_arm(const ExperimentConfig& base, Placement p, std::set<int> stages) {
  ExperimentConfig c = base;
  c.model.arm_placement = p;
  c.model.arm_stages = std::move(stages);
  if (p == Placement::kNone) {
    c.arm.reset();
  } else if (!c.arm) {
    c.arm = ArmSpec{};
  }
  return c;
}

}  // namespace

std::string SweepTable::csv() const {
  std::string out;
  for (const std::string& a : axes) out += a + ",";
  out += "config_hash,seeds,mean_test_accuracy,std_test_accuracy,mean_final_train_loss,all_finite";
  for (const std::string& e : extra_columns) out += "," + e;
  out += "\n";
  for (const SweepRow& r : rows) {
    for (const std::string& k : r.keys) out += k + ",";
    out += r.config_hash + "," + std::to_string(r.runs.size()) + "," + num(r.mean_test_accuracy) + "," +
           num(r.std_test_accuracy) + "," + num(r.mean_final_train_loss) + "," + (r.all_finite ? "true" : "false");
    for (const std::string& e : r.extra) out += "," + e;
    out += "\n";
  }
  return out;
}

const std::vector<MetricsRecord>& SweepRunner::run(const ExperimentConfig& cfg) {
  const std::string hash = config_hash(cfg);
  for (const auto& [h, records] : cache_) {
    if (h == hash) return records;
  }
  RunOptions opts = options_;
  if (!opts.out_dir.empty()) opts.out_dir /= "runs/" + hash;
  cache_.emplace_back(hash, train_toy(cfg, opts));
  return cache_.back().second;
}

SweepTable placement_sweep(const ExperimentConfig& base, SweepRunner& runner) {
  if (!base.model.hierarchical || base.model.stages() != 4) {
    throw ConfigError("model.hierarchical: the placement sweep needs a hierarchical model with 4 stages");
  }
  SweepTable t;
  t.axes = {"group", "placement", "stages"};
  const Placement placements[] = {Placement::kNone, Placement::kAfterPatchEmbed, Placement::kAfterAttention,
                                  Placement::kAfterShortcut, Placement::kAfterPatchMerging};
  // The no-ARM config keeps the default stage set so it shares a hash with
  // the plain baseline.
  for (Placement p : placements) {
    const ExperimentConfig c = with_arm(base, p, {0});
    const std::string stages = p == Placement::kNone ? "-" : p == Placement::kAfterPatchEmbed ? "embed" : "0";
    t.rows.push_back(summarize({"placement", to_string(p), stages}, c, runner.run(c)));
  }
  const std::set<int> subsets[] = {{}, {0}, {0, 1}, {2, 3}, {0, 1, 2, 3}};
  for (const std::set<int>& s : subsets) {
    const ExperimentConfig c =
        s.empty() ? with_arm(base, Placement::kNone, {0}) : with_arm(base, Placement::kAfterAttention, s);
    t.rows.push_back(summarize({"stages", s.empty() ? "none" : "after_attention", stage_key(s)}, c, runner.run(c)));
  }
  return t;
}

SweepTable filter_sweep(const ExperimentConfig& base, SweepRunner& runner) {
  SweepTable t;
  t.axes = {"filter"};
  t.extra_columns = {"delta_points", "reference_delta_points", "non_inferior"};
  const ExperimentConfig none = with_arm(base, Placement::kNone, {0});
  t.rows.push_back(summarize({"none"}, none, runner.run(none)));
  t.rows.back().extra = {"0", "0", "true"};
  const double baseline = t.rows.front().mean_test_accuracy;

  const struct {
    ArmVariant variant;
    const char* reference;
  } variants[] = {{ArmVariant::kGaussian, "0.3"}, {ArmVariant::kLearnable, "0.4"}, {ArmVariant::kBank, "0.8"}};
  for (const auto& v : variants) {
    ExperimentConfig c = with_arm(base, Placement::kAfterAttention, {0});
    c.arm->variant = v.variant;
    SweepRow row = summarize({to_string(v.variant)}, c, runner.run(c));
    const double delta = 100.0 * (row.mean_test_accuracy - baseline);
    row.extra = {num(delta), v.reference, delta >= -0.5 ? "true" : "false"};
    t.rows.push_back(std::move(row));
  }
  return t;
}

SweepTable bank_size_sweep(const ExperimentConfig& base, const std::vector<int>& sizes, SweepRunner& runner) {
  if (sizes.empty()) throw ConfigError("sizes: at least one bank size is required");
  SweepTable t;
  t.axes = {"n"};
  t.extra_columns = {"arm_parameters"};
  for (int n : sizes) {
    ExperimentConfig c = with_arm(base, Placement::kAfterAttention, {0});
    c.arm->variant = ArmVariant::kBank;
    c.arm->bank.n = n;
    c.arm->bank.dog_count.reset();
    c.validate();
    SweepRow row = summarize({std::to_string(n)}, c, runner.run(c));
    const Model m = build_model(c.model, c.arm->resolve(0), 0);
    row.extra = {std::to_string(m.arm_parameter_count())};
    t.rows.push_back(std::move(row));
  }
  return t;
}

}  // namespace armkit

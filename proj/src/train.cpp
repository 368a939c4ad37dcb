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
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <map>
#include <thread>

#include "armkit/aatd.hpp"
#include "armkit/errors.hpp"
#include "armkit/experiments.hpp"
#include "armkit/ops.hpp"
#include "armkit/optim.hpp"
#include "armkit/rng.hpp"

namespace armkit {

namespace {

using json = nlohmann::json;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::size_t count_correct(const Tensor& logits, const std::vector<int>& labels) {
  const auto v = logits.data();
  const std::size_t k = logits.dim(1);
  std::size_t correct = 0;
  for (std::size_t b = 0; b < labels.size(); ++b) {
    const auto row = v.subspan(b * k, k);
    const auto best = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
    if (best == labels[b]) ++correct;
  }
  return correct;
}

struct EvalResult {
  double loss = 0.0, accuracy = 0.0;
};

EvalResult evaluate(Model& model, const Dataset& data, int batch_size) {
  NoGradGuard no_grad;
  const std::size_t n = data.test_count();
  double loss = 0.0;
  std::size_t correct = 0;
  for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(batch_size)) {
    std::vector<std::size_t> idx;
    for (std::size_t i = start; i < std::min(n, start + static_cast<std::size_t>(batch_size)); ++i) idx.push_back(i);
    const std::vector<int> y = data.labels(false, idx);
    const Tensor logits = model_forward(data.images(false, idx), model, false);
    loss += cross_entropy(logits, y).item() * static_cast<double>(idx.size());
    correct += count_correct(logits, y);
  }
  return {loss / static_cast<double>(n), static_cast<double>(correct) / static_cast<double>(n)};
}

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

TrainedRun train_one(const ExperimentConfig& cfg, const Dataset& data, std::uint64_t seed) {
  cfg.validate();
  if (data.size != cfg.model.image_size || data.channels != cfg.model.in_channels) {
    throw ConfigError("dataset: images are " + std::to_string(data.channels) + "x" + std::to_string(data.size) +
                      " but model expects " + std::to_string(cfg.model.in_channels) + "x" +
                      std::to_string(cfg.model.image_size));
  }
  if (data.classes > cfg.model.num_classes) {
    throw ConfigError("model.num_classes: dataset has " + std::to_string(data.classes) + " classes");
  }
  std::optional<ArmConfig> arm;
  if (cfg.arm) arm = cfg.arm->resolve(seed);
  TrainedRun run{MetricsRecord{}, build_model(cfg.model, arm, seed)};
  MetricsRecord& rec = run.metrics;
  rec.seed = seed;
  rec.config_hash = config_hash(cfg);

  Optimizer opt(cfg.optimizer, run.model.trainable());
  Rng shuffle(derive_seed(seed, "shuffle"));
  const std::size_t n = data.train_count();
  std::vector<std::size_t> order(n);
  const auto t_start = std::chrono::steady_clock::now();

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t_epoch = std::chrono::steady_clock::now();
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);

    double loss_sum = 0.0;
    std::size_t correct = 0, seen = 0;
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::vector<std::size_t> idx(order.begin() + static_cast<long>(start),
                                         order.begin() + static_cast<long>(std::min(n, start + static_cast<std::size_t>(cfg.batch_size))));
      const std::vector<int> y = data.labels(true, idx);
      const Tensor logits = model_forward(data.images(true, idx), run.model, true);
      const Tensor loss = cross_entropy(logits, y);
      const double lv = loss.item();
      if (!std::isfinite(lv)) {
        rec.diverged = true;
        rec.diagnostic = "non-finite training loss at epoch " + std::to_string(epoch) + ", sample offset " +
                         std::to_string(start);
        break;
      }
      opt.step(backward(loss));
      loss_sum += lv * static_cast<double>(idx.size());
      correct += count_correct(logits, y);
      seen += idx.size();
    }

    EpochMetrics m;
    m.epoch = epoch;
    if (rec.diverged) {
      m.train_loss = kNaN;
      m.train_accuracy = seen ? static_cast<double>(correct) / static_cast<double>(seen) : 0.0;
      m.test_loss = kNaN;
      m.test_accuracy = 0.0;
    } else {
      m.train_loss = loss_sum / static_cast<double>(n);
      m.train_accuracy = static_cast<double>(correct) / static_cast<double>(n);
      const EvalResult ev = evaluate(run.model, data, cfg.batch_size);
      m.test_loss = ev.loss;
      m.test_accuracy = ev.accuracy;
    }
    if (cfg.record_wall_time) {
      m.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t_epoch).count();
    }
    rec.epochs.push_back(m);
    if (rec.diverged) break;
  }
  rec.final_test_accuracy = rec.epochs.back().test_accuracy;
  rec.final_test_loss = rec.epochs.back().test_loss;
  if (cfg.record_wall_time) {
    rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t_start).count();
  }
  return run;
}

namespace {

// Runs job(i) for i in [0, count) on up to `threads` workers; the first
// exception (lowest index) is rethrown after all workers finish.
template <typename Job>
void parallel_for(std::size_t count, int threads, Job job) {
  const std::size_t workers = std::min<std::size_t>(count, static_cast<std::size_t>(std::max(1, threads)));
  std::vector<std::exception_ptr> errors(count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          job(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

std::vector<MetricsRecord> train_toy(const ExperimentConfig& cfg, const RunOptions& options) {
  cfg.validate();
  const Dataset data = make_dataset(cfg.dataset);
  std::vector<std::optional<TrainedRun>> runs(cfg.seeds.size());
  parallel_for(cfg.seeds.size(), options.threads,
               [&](std::size_t i) { runs[i] = train_one(cfg, data, cfg.seeds[i]); });

  std::vector<MetricsRecord> records;
  for (auto& r : runs) records.push_back(r->metrics);
  if (options.out_dir.empty()) return records;

  namespace fs = std::filesystem;
  fs::create_directories(options.out_dir);
  write_file_atomic(options.out_dir / "config.json", to_json(cfg).dump(2) + "\n");
  write_file_atomic(options.out_dir / "metrics.csv", metrics_csv(records));
  std::vector<std::size_t> first;
  for (std::size_t i = 0; i < std::min<std::size_t>(8, data.test_count()); ++i) first.push_back(i);
  for (auto& r : runs) {
    const std::string tag = "seed_" + std::to_string(r->metrics.seed);
    save_checkpoint(options.out_dir / "checkpoints" / tag, r->model,
                    json{{"seed", r->metrics.seed}, {"trained", true}, {"config_hash", r->metrics.config_hash}});
    if (options.export_attention) export_attention(r->model, data.images(false, first), options.out_dir / "attention" / tag);
  }
  return records;
}

std::string metrics_csv(const std::vector<MetricsRecord>& records) {
  std::string out = "config_hash,seed,epoch,split,loss,accuracy,wall_ms\n";
  for (const MetricsRecord& r : records) {
    for (const EpochMetrics& e : r.epochs) {
      const std::string head = r.config_hash + "," + std::to_string(r.seed) + "," + std::to_string(e.epoch) + ",";
      out += head + "train," + fmt(e.train_loss) + "," + fmt(e.train_accuracy) + "," + fmt(e.wall_ms) + "\n";
      out += head + "test," + fmt(e.test_loss) + "," + fmt(e.test_accuracy) + "," + fmt(e.wall_ms) + "\n";
    }
  }
  return out;
}

double mean_test_accuracy(const std::vector<MetricsRecord>& records) {
  if (records.empty()) return 0.0;
  double s = 0.0;
  for (const MetricsRecord& r : records) s += r.final_test_accuracy;
  return s / static_cast<double>(records.size());
}

// ---- checkpoints ----

namespace {

std::string file_name(const std::string& name) { return name + ".aatd"; }

}  // namespace

void save_checkpoint(const std::filesystem::path& dir, Model& model, const nlohmann::json& extra) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  json params = json::array(), buffers = json::array();
  for (const NamedTensor& p : model.named_parameters()) {
    write_aatd(dir / file_name(p.name), p.tensor);
    params.push_back(p.name);
  }
  for (const NamedBuffer& b : model.named_buffers()) {
    write_aatd(dir / file_name(b.name), Shape{b.values->size()}, *b.values);
    buffers.push_back(b.name);
  }
  json manifest = extra.is_object() ? extra : json::object();
  manifest["model"] = to_json(model.config);
  if (model.arm) {
    const ArmConfig& a = *model.arm;
    json arm{{"variant", to_string(a.variant)},
             {"k", a.effective_kernel_size()},
             {"gaussian_sigma", a.gaussian_sigma},
             {"external_modulation", a.use_external_modulation}};
    if (a.bank) {
      export_bank(*a.bank, dir / "arm_bank.aatd");
      arm["n"] = a.bank->n();
      arm["seed"] = a.bank->seed;
    }
    manifest["arm"] = arm;
  }
  manifest["parameters"] = params;
  manifest["buffers"] = buffers;
  write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
}

Model load_checkpoint(const std::filesystem::path& dir) {
  json manifest;
  try {
    manifest = json::parse(read_file(dir / "manifest.json"));
  } catch (const json::parse_error& e) {
    throw ParseError((dir / "manifest.json").string() + ": " + e.what());
  }
  if (!manifest.contains("model")) throw ParseError((dir / "manifest.json").string() + ": no model section");
  const ModelConfig mc = model_config_from_json(manifest["model"]);
  std::optional<ArmConfig> arm;
  if (manifest.contains("arm")) {
    const json& a = manifest["arm"];
    ArmConfig ac;
    ac.variant = parse_arm_variant(a.at("variant").get<std::string>());
    ac.kernel_size = a.at("k").get<int>();
    ac.gaussian_sigma = a.at("gaussian_sigma").get<double>();
    ac.use_external_modulation = a.at("external_modulation").get<bool>();
    if (ac.variant == ArmVariant::kBank) ac.bank = import_bank(dir / "arm_bank.aatd");
    arm = ac;
  }
  Model model = build_model(mc, arm, 0);
  for (NamedTensor& p : model.named_parameters()) {
    const TensorDump d = read_aatd(dir / file_name(p.name));
    if (d.shape != p.tensor.shape()) {
      throw ParseError(dir.string() + ": " + p.name + " has shape " + shape_str(d.shape) + ", expected " +
                       shape_str(p.tensor.shape()));
    }
    std::copy(d.values.begin(), d.values.end(), p.tensor.mutable_data().begin());
  }
  for (NamedBuffer& b : model.named_buffers()) {
    const TensorDump d = read_aatd(dir / file_name(b.name));
    if (d.values.size() != b.values->size()) throw ParseError(dir.string() + ": buffer " + b.name + " has wrong size");
    *b.values = d.values;
  }
  return model;
}

std::vector<std::filesystem::path> export_attention(Model& model, const Tensor& images,
                                                    const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::map<std::pair<int, int>, Tensor> maps;
  {
    NoGradGuard no_grad;
    model_forward(images, model, false, [&](const TapEvent& e) {
      if (e.name == "attention_map") maps[{e.stage, e.block}] = e.value;
    });
  }
  std::vector<std::filesystem::path> written;
  for (const auto& [key, t] : maps) {
    const auto path = dir / ("stage" + std::to_string(key.first) + "_block" + std::to_string(key.second) + ".aatd");
    write_aatd(path, t);
    written.push_back(path);
  }
  return written;
}

}  // namespace armkit

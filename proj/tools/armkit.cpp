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

// armkit: command-line front end for banks, demos, training, sweeps, probes,
// gradient checks and attention export. Every completed run leaves a
// manifest.json describing how to reproduce it.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "armkit/aatd.hpp"
#include "armkit/errors.hpp"
#include "armkit/experiments.hpp"
#include "armkit/filter_bank.hpp"
#include "armkit/grad_check.hpp"
#include "armkit/ops.hpp"
#include "armkit/rng.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace armkit;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool export_attn = false;
  int threads = 1;
};

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

fs::path run_dir(const Common& c, const std::string& command, const std::string& tag) {
  if (!c.out.empty()) return c.out;
  const char* root = std::getenv("ARMKIT_OUT");
  return fs::path(root && *root ? root : "armkit-runs") / (command + "-" + tag);
}

std::string hash_of(const json& j) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(j.dump())));
  return buf;
}

std::vector<std::string> list_outputs(const fs::path& dir, const fs::path& manifest) {
  std::vector<std::string> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file() && e.path() != manifest) out.push_back(fs::relative(e.path(), dir).generic_string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

void write_manifest(const fs::path& path, const std::string& command, const json& config, const std::string& hash,
                    const json& seed, const std::string& started, const json& args) {
  const json m{{"command", command},
               {"args", args},
               {"config", config},
               {"config_hash", hash},
               {"seed", seed},
               {"started", started},
               {"finished", utc_now()},
               {"outputs", list_outputs(path.parent_path(), path)}};
  write_file_atomic(path, m.dump(2) + "\n");
}

ExperimentConfig experiment_config(const Common& c) {
  ExperimentConfig cfg = c.config.empty() ? ExperimentConfig{} : load_config(c.config);
  if (c.seed) cfg.seeds = {*c.seed};
  cfg.validate();
  return cfg;
}

json seeds_json(const ExperimentConfig& cfg) { return json(cfg.seeds); }

std::string pct(double a) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f%%", 100.0 * a);
  return buf;
}

// ---- subcommands ----

int cmd_bank(const Common& c, int n, int k, std::optional<int> dogs) {
  const std::string started = utc_now();
  const std::uint64_t seed = c.seed.value_or(0);
  const int dog_count = dogs.value_or(default_dog_count(n));
  const FilterBank bank = sample_bank(seed, n, k, dog_count);
  const fs::path dump = c.out.empty() ? run_dir(c, "bank", std::to_string(seed)) / "bank.aatd" : fs::path(c.out);
  if (dump.has_parent_path()) fs::create_directories(dump.parent_path());
  export_bank(bank, dump);
  const json config{{"n", n}, {"k", k}, {"dog_count", dog_count}, {"seed", seed}};
  fs::path manifest = dump;
  manifest.replace_extension(".manifest.json");
  const json m{{"command", "bank"},
               {"config", config},
               {"config_hash", hash_of(config)},
               {"seed", seed},
               {"started", started},
               {"finished", utc_now()},
               {"outputs", {dump.filename().string(), bank_sidecar_path(dump).filename().string()}}};
  write_file_atomic(manifest, m.dump(2) + "\n");
  std::printf("bank: %d atoms (%d DoG), %dx%d, seed %llu -> %s\n", n, dog_count, k, k,
              static_cast<unsigned long long>(seed), dump.string().c_str());
  return 0;
}

int cmd_demo(const Common& c, double freq, double rate, std::optional<double> sigma, double duration) {
  const std::string started = utc_now();
  json config{{"freq_hz", freq}, {"rate_hz", rate}, {"duration_s", duration}};
  if (sigma) config["prefilter_sigma_s"] = *sigma;
  const std::string hash = hash_of(config);
  const fs::path dir = run_dir(c, "demo", hash);
  const AliasReport raw = alias_demo_1d(freq, rate, {}, duration);
  fs::create_directories(dir);
  write_file_atomic(dir / "spectrum.csv", spectrum_csv(raw));
  json report{{"signal_hz", raw.signal_hz},       {"sample_rate_hz", raw.sample_rate_hz},
              {"nyquist_hz", raw.nyquist_hz},     {"expected_hz", raw.expected_hz},
              {"dominant_hz", raw.dominant_hz},   {"aliased", raw.aliased},
              {"peak_magnitude", raw.peak_magnitude}, {"aliased_energy_ratio", raw.aliased_energy_ratio}};
  std::printf("signal %g Hz sampled at %g Hz: dominant %g Hz (expected %g Hz, %s)\n", freq, rate, raw.dominant_hz,
              raw.expected_hz, raw.aliased ? "aliased" : "below Nyquist");
  if (sigma) {
    const AliasReport filtered = alias_demo_1d(freq, rate, *sigma, duration);
    write_file_atomic(dir / "spectrum_prefiltered.csv", spectrum_csv(filtered));
    const double db = attenuation_db(raw, filtered);
    report["prefiltered"] = {{"dominant_hz", filtered.dominant_hz},
                             {"peak_magnitude", filtered.peak_magnitude},
                             {"attenuation_db", db}};
    std::printf("gaussian prefilter sigma %g s: alias peak attenuated by %.2f dB\n", *sigma, db);
  }
  write_file_atomic(dir / "report.json", report.dump(2) + "\n");
  write_manifest(dir / "manifest.json", "demo", config, hash, nullptr, started, json::object());
  return 0;
}

int cmd_train(const Common& c) {
  const std::string started = utc_now();
  const ExperimentConfig cfg = experiment_config(c);
  const std::string hash = config_hash(cfg);
  const fs::path dir = run_dir(c, "train", hash);
  RunOptions opts{dir, c.export_attn, c.threads};
  const std::vector<MetricsRecord> records = train_toy(cfg, opts);
  int status = 0;
  for (const MetricsRecord& r : records) {
    if (r.diverged) {
      std::fprintf(stderr, "armkit: error [divergence]: seed %llu: %s\n", static_cast<unsigned long long>(r.seed),
                   r.diagnostic.c_str());
      status = 1;
      continue;
    }
    std::printf("seed %llu: test accuracy %s, test loss %.4f\n", static_cast<unsigned long long>(r.seed),
                pct(r.final_test_accuracy).c_str(), r.final_test_loss);
  }
  std::printf("mean test accuracy %s over %zu seed(s) -> %s\n", pct(mean_test_accuracy(records)).c_str(),
              records.size(), dir.string().c_str());
  write_manifest(dir / "manifest.json", "train", to_json(cfg), hash, seeds_json(cfg), started,
                 {{"export_attn", c.export_attn}});
  return status;
}

int cmd_sweep(const Common& c, const std::string& kind, const std::vector<int>& sizes) {
  const std::string started = utc_now();
  const ExperimentConfig cfg = experiment_config(c);
  const std::string hash = config_hash(cfg);
  const fs::path dir = run_dir(c, "sweep-" + kind, hash);
  fs::create_directories(dir);
  write_file_atomic(dir / "config.json", to_json(cfg).dump(2) + "\n");
  SweepRunner runner(RunOptions{dir, c.export_attn, c.threads});
  SweepTable table;
  if (kind == "placement") {
    table = placement_sweep(cfg, runner);
  } else if (kind == "filter") {
    table = filter_sweep(cfg, runner);
  } else {
    table = bank_size_sweep(cfg, sizes, runner);
  }
  const std::string csv = table.csv();
  write_file_atomic(dir / ("sweep_" + kind + ".csv"), csv);
  std::fputs(csv.c_str(), stdout);
  bool finite = true;
  for (const SweepRow& r : table.rows) finite = finite && r.all_finite;
  write_manifest(dir / "manifest.json", "sweep", to_json(cfg), hash, seeds_json(cfg), started,
                 {{"kind", kind}, {"sizes", sizes}, {"export_attn", c.export_attn}});
  if (!finite) {
    std::fprintf(stderr, "armkit: error [divergence]: some sweep rows have non-finite losses\n");
    return 1;
  }
  return 0;
}

void print_probe(const ProbeReport& r) {
  std::printf("seed %llu (%s): input %s", static_cast<unsigned long long>(r.seed), r.trained ? "trained" : "untrained",
              pct(r.input_accuracy).c_str());
  for (std::size_t i = 0; i < r.stages.size(); ++i) std::printf(", stage %d %s", r.stages[i], pct(r.stage_accuracy[i]).c_str());
  std::printf("\n");
}

int cmd_probe(const Common& c, const std::string& checkpoint, bool untrained) {
  const std::string started = utc_now();
  ExperimentConfig cfg = experiment_config(c);
  std::vector<ProbeReport> reports;
  std::optional<Model> loaded;
  json args{{"untrained", untrained}};
  if (!checkpoint.empty()) {
    loaded = load_checkpoint(checkpoint);
    if (!c.config.empty() && to_json(loaded->config).dump() != to_json(cfg.model).dump()) {
      throw ConfigError("probe: --checkpoint model differs from the model in --config");
    }
    cfg.model = loaded->config;
    cfg.dataset.size = cfg.model.image_size;
    args["checkpoint"] = checkpoint;
  }
  const std::string hash = config_hash(cfg);
  const fs::path dir = run_dir(c, "probe", hash);
  const Dataset data = make_dataset(cfg.dataset);
  if (loaded) {
    const json m = json::parse(read_file(fs::path(checkpoint) / "manifest.json"));
    const bool trained = m.value("trained", false);
    const std::uint64_t seed = c.seed.value_or(m.value("seed", std::uint64_t{0}));
    reports.push_back(blur_probe(*loaded, data, cfg.probe, seed, trained));
  } else {
    for (std::uint64_t seed : cfg.seeds) {
      if (untrained) {
        std::optional<ArmConfig> arm;
        if (cfg.arm) arm = cfg.arm->resolve(seed);
        Model m = build_model(cfg.model, arm, seed);
        reports.push_back(blur_probe(m, data, cfg.probe, seed, false));
      } else {
        TrainedRun run = train_one(cfg, data, seed);
        reports.push_back(blur_probe(run.model, data, cfg.probe, seed, true));
      }
    }
  }
  int ordered = 0;
  for (const ProbeReport& r : reports) {
    print_probe(r);
    if (r.stage_accuracy.front() >= r.stage_accuracy.back()) ++ordered;
  }
  std::printf("earliest >= last tapped stage in %d of %zu seed(s)\n", ordered, reports.size());
  fs::create_directories(dir);
  write_file_atomic(dir / "config.json", to_json(cfg).dump(2) + "\n");
  write_file_atomic(dir / "probe.csv", probe_csv(reports));
  write_manifest(dir / "manifest.json", "probe", to_json(cfg), hash, seeds_json(cfg), started, args);
  return 0;
}

int cmd_gradcheck(const Common& c, std::size_t max_probes) {
  const std::string started = utc_now();
  const ExperimentConfig cfg = experiment_config(c);
  const std::uint64_t seed = cfg.seeds.front();
  std::optional<ArmConfig> arm;
  if (cfg.arm) arm = cfg.arm->resolve(seed);
  Model model = build_model(cfg.model, arm, seed);
  Rng rng(derive_seed(seed, "gradcheck"));
  const std::size_t s = static_cast<std::size_t>(cfg.model.image_size);
  const std::size_t ch = static_cast<std::size_t>(cfg.model.in_channels);
  std::vector<double> px(2 * ch * s * s);
  for (double& v : px) v = rng.normal();
  const Tensor images = Tensor::from({2, ch, s, s}, std::move(px));
  const std::vector<int> labels{0, 1};
  GradCheckOptions opts;
  opts.step = 1e-5;
  opts.max_probes_per_param = max_probes;
  const GradCheckReport r = grad_check_params(
      [&] { return cross_entropy(model_forward(images, model, true), labels); }, model.trainable(), opts);
  std::printf("max relative error %.3e over %zu probes (%s)\n", r.max_rel_error, r.probes,
              r.passed ? "pass" : "FAIL");
  const std::string hash = config_hash(cfg);
  const fs::path dir = run_dir(c, "gradcheck", hash);
  fs::create_directories(dir);
  const json result{{"max_rel_error", r.max_rel_error}, {"probes", r.probes}, {"passed", r.passed},
                    {"diagnostic", r.diagnostic}};
  write_file_atomic(dir / "gradcheck.json", result.dump(2) + "\n");
  write_manifest(dir / "manifest.json", "gradcheck", to_json(cfg), hash, seed, started,
                 {{"max_probes", max_probes}});
  if (!r.passed) std::fprintf(stderr, "armkit: error [gradcheck]: %s\n", r.diagnostic.c_str());
  return r.passed && r.max_rel_error < 1e-4 ? 0 : 1;
}

int cmd_export(const Common& c, const std::string& checkpoint, int count) {
  const std::string started = utc_now();
  Model model = load_checkpoint(checkpoint);
  ExperimentConfig cfg = c.config.empty() ? ExperimentConfig{} : load_config(c.config);
  cfg.model = model.config;
  cfg.dataset.size = model.config.image_size;
  cfg.arm.reset();
  if (model.config.arm_placement != Placement::kNone) cfg.arm = ArmSpec{};
  const Dataset data = make_dataset(cfg.dataset);
  const std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(std::max(1, count)), data.test_count());
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  const json config{{"checkpoint", checkpoint}, {"count", n}, {"dataset", to_json(cfg)["dataset"]}};
  const std::string hash = hash_of(config);
  const fs::path dir = run_dir(c, "export", hash);
  const auto files = export_attention(model, data.images(false, idx), dir / "attention");
  if (model.arm && model.arm->bank) export_bank(*model.arm->bank, dir / "arm_bank.aatd");
  std::printf("exported %zu attention map(s) for %zu image(s) -> %s\n", files.size(), n, dir.string().c_str());
  write_manifest(dir / "manifest.json", "export", config, hash, nullptr, started, json::object());
  return 0;
}

void add_common(CLI::App* sub, Common& c, bool config, bool attn) {
  if (config) sub->add_option("--config", c.config, "experiment config (JSON) or a run manifest");
  sub->add_option("--seed", c.seed, "seed (overrides the config's seed list)");
  sub->add_option("--out", c.out, "output directory (default: $ARMKIT_OUT/<command>-<hash>)");
  if (attn) sub->add_flag("--export-attn", c.export_attn, "dump folded attention maps as AATD files");
  sub->add_option("--threads", c.threads, "seeds / sweep entries trained concurrently")->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"armkit: aliasing reduction experiments for toy vision transformers"};
  app.require_subcommand(1);
  Common common;

  auto* bank = app.add_subcommand("bank", "sample a filter bank and write its AATD dump + JSON sidecar");
  int bank_n = 8, bank_k = 3;
  std::optional<int> bank_dogs;
  bank->add_option("--n", bank_n, "atoms")->check(CLI::Range(2, 1024));
  bank->add_option("--k", bank_k, "kernel size (odd, >= 3)");
  bank->add_option("--dog-count", bank_dogs, "difference-of-Gaussian atoms (default n / 4)");
  add_common(bank, common, false, false);

  auto* demo = app.add_subcommand("demo", "1-D aliasing demonstration");
  double freq = 7.0, rate = 10.0, duration = 4.0;
  std::optional<double> sigma;
  demo->add_option("--freq", freq, "tone frequency (Hz)");
  demo->add_option("--rate", rate, "sample rate (Hz)");
  demo->add_option("--prefilter-sigma", sigma, "Gaussian prefilter std (seconds)");
  demo->add_option("--duration", duration, "signal length (seconds)");
  add_common(demo, common, false, false);

  auto* train = app.add_subcommand("train", "train every seed of a config");
  add_common(train, common, true, true);

  auto* sweep = app.add_subcommand("sweep", "placement / filter / bank-size sweep");
  std::string kind = "filter";
  std::vector<int> sizes{2, 8, 16, 24};
  sweep->add_option("--kind", kind, "placement | filter | bank_size")
      ->check(CLI::IsMember({"placement", "filter", "bank_size"}));
  sweep->add_option("--sizes", sizes, "bank sizes for --kind bank_size")->delimiter(',');
  add_common(sweep, common, true, true);

  auto* probe = app.add_subcommand("probe", "blur-level probe on tapped attention maps");
  std::string probe_ckpt;
  bool untrained = false;
  probe->add_option("--checkpoint", probe_ckpt, "probe a saved model instead of training one per seed");
  probe->add_flag("--untrained", untrained, "probe freshly initialized models");
  add_common(probe, common, true, false);

  auto* gradcheck = app.add_subcommand("gradcheck", "central-difference check of the configured model");
  std::size_t max_probes = 0;
  gradcheck->add_option("--max-probes", max_probes, "elements probed per parameter (0 = all)");
  add_common(gradcheck, common, true, false);

  auto* exp = app.add_subcommand("export", "dump attention maps (and bank) of a checkpoint");
  std::string exp_ckpt;
  int exp_count = 8;
  exp->add_option("--checkpoint", exp_ckpt, "checkpoint directory")->required();
  exp->add_option("--count", exp_count, "test images to run");
  add_common(exp, common, true, false);

  if (argc > 1 && argv[1][0] != '-' && !app.get_subcommand_no_throw(argv[1])) {
    std::cerr << "armkit: error [usage]: unknown subcommand '" << argv[1] << "'\n\n" << app.help();
    return 2;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "armkit: error [usage]: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (*bank) return cmd_bank(common, bank_n, bank_k, bank_dogs);
    if (*demo) return cmd_demo(common, freq, rate, sigma, duration);
    if (*train) return cmd_train(common);
    if (*sweep) return cmd_sweep(common, kind, sizes);
    if (*probe) return cmd_probe(common, probe_ckpt, untrained);
    if (*gradcheck) return cmd_gradcheck(common, max_probes);
    if (*exp) return cmd_export(common, exp_ckpt, exp_count);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "armkit: error [config]: %s\n", e.what());
  } catch (const ParseError& e) {
    std::fprintf(stderr, "armkit: error [parse]: %s\n", e.what());
  } catch (const DimensionError& e) {
    std::fprintf(stderr, "armkit: error [dimension]: %s\n", e.what());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "armkit: error [runtime]: %s\n", e.what());
  }
  return 1;
}

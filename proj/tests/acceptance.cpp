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

// Acceptance run: one PASS/FAIL line per criterion, exit status 0 only when
// every criterion passes. Pass criterion numbers as arguments to run a subset.
// Artifacts (sweep tables, probe CSV, CLI run directories) go to
// ./acceptance-out.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "armkit/aatd.hpp"
#include "armkit/arm.hpp"
#include "armkit/batch_norm.hpp"
#include "armkit/errors.hpp"
#include "armkit/experiments.hpp"
#include "armkit/filter_bank.hpp"
#include "armkit/grad_check.hpp"
#include "armkit/ops.hpp"
#include "baseline_vit.hpp"
#include "oracles.hpp"

namespace {

namespace fs = std::filesystem;
using namespace armkit;
using armkit::testing::random_tensor;

const fs::path kOut = "acceptance-out";

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
}

ExperimentConfig config_file(const std::string& name) { return load_config(std::string(ARMKIT_CONFIG_DIR) + "/" + name); }

bool bit_equal(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() && std::memcmp(a.data().data(), b.data().data(), a.numel() * sizeof(double)) == 0;
}

// ---- 1 ----
Outcome filter_bank_correctness() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(derive_seed(2026, "acceptance-bank"));
  int gauss_bad = 0, dog_bad = 0, dogs = 0, degenerate = 0;
  double worst_g = 0.0, worst_d = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const int k = 3 + 2 * static_cast<int>(rng.below(3));
    const KernelSpec spec = sample_kernel_spec(rng, k);
    const Kernel g = gaussian_kernel(spec);
    worst_g = std::max(worst_g, std::abs(g.total() - 1.0));
    bool peak = true;
    for (double w : g.weights) peak = peak && w <= g.center();
    if (std::abs(g.total() - 1.0) > 1e-9 || !peak) ++gauss_bad;
    try {
      const Kernel d = dog_kernel(spec, sample_kernel_spec(rng, k));
      ++dogs;
      worst_d = std::max(worst_d, std::abs(d.total()));
      if (std::abs(d.total()) > 1e-9) ++dog_bad;
    } catch (const ConfigError&) {
      ++degenerate;
    }
  }
  const double secs = seconds_since(t0);
  return {gauss_bad == 0 && dog_bad == 0 && dogs > 900 && secs < 5.0,
          "1000 Gaussian atoms, worst |sum-1| " + fmt("%.1e", worst_g) + "; " + std::to_string(dogs) +
              " DoG atoms, worst |sum| " + fmt("%.1e", worst_d) + " (" + std::to_string(degenerate) +
              " degenerate pairs rejected); " + fmt("%.2f s", secs)};
}

// ---- 2 ----
Outcome selection_identity() {
  int exact = 0, total = 0;
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const FilterBank bank = sample_bank(seed, 8, 3 + 2 * static_cast<int>(seed % 3), 2);
    const std::size_t n = bank.n();
    for (std::size_t j = 0; j < n; ++j) {
      std::vector<double> c(n, 0.0);
      c[j] = 1.0;
      const Tensor f = combine_filters(bank, Tensor::from({1, 1, n}, c));
      ++total;
      if (std::memcmp(f.data().data(), bank.atoms[j].kernel.weights.data(), f.numel() * sizeof(double)) == 0) ++exact;
    }
    const FilterBank gauss = sample_bank(seed, 8, 5, 0);
    const Tensor u = combine_filters(gauss, Tensor::full({1, 1, 8}, 1.0 / 8.0));
    double s = 0.0;
    for (double v : u.data()) s += v;
    worst = std::max(worst, std::abs(s - 1.0));
  }
  return {exact == total && worst <= 1e-9, std::to_string(exact) + "/" + std::to_string(total) +
                                               " one-hot selections bit-exact; uniform Gaussian mix worst |sum-1| " +
                                               fmt("%.1e", worst)};
}

// ---- 3 ----
Outcome gradient_suite() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(derive_seed(2026, "acceptance-grad"));
  const GradCheckOptions opt{1e-5, 1e-4, 1e-4, 0};
  std::vector<std::pair<std::string, GradCheckReport>> results;
  auto check = [&](const std::string& name, const std::function<Tensor()>& f, std::vector<Tensor> params) {
    results.emplace_back(name, grad_check_params(f, std::move(params), opt));
  };
  auto weighted = [&](const Tensor& t) {
    // Fixed random weights so no gradient is trivially symmetric.
    Rng w(derive_seed(99, t.numel()));
    std::vector<double> v(t.numel());
    for (double& x : v) x = w.normal();
    return sum(mul(t, Tensor::from(t.shape(), v)));
  };

  Tensor a = random_tensor(rng, {2, 3, 4}, true), b = random_tensor(rng, {2, 3, 4}, true);
  Tensor row = random_tensor(rng, {4}, true);
  check("add", [&] { return weighted(add(a, row)); }, {a, row});
  check("sub", [&] { return weighted(sub(a, b)); }, {a, b});
  check("mul", [&] { return weighted(mul(a, b)); }, {a, b});
  check("scale", [&] { return weighted(scale(a, -1.7)); }, {a});
  check("square", [&] { return weighted(square(a)); }, {a});
  Tensor m1 = random_tensor(rng, {3, 4}, true), m2 = random_tensor(rng, {4, 5}, true);
  check("matmul", [&] { return weighted(matmul(m1, m2)); }, {m1, m2});
  Tensor g1 = random_tensor(rng, {2, 3, 4}, true), g2 = random_tensor(rng, {2, 4, 5}, true),
         g3 = random_tensor(rng, {2, 5, 4}, true);
  check("bmm", [&] { return weighted(bmm(g1, g2)); }, {g1, g2});
  check("bmm_transposed", [&] { return weighted(bmm(g1, g3, true)); }, {g1, g3});
  Tensor lw = random_tensor(rng, {4, 6}, true), lb = random_tensor(rng, {6}, true);
  check("linear", [&] { return weighted(linear(a, lw, lb)); }, {a, lw, lb});
  check("softmax_rows", [&] { return weighted(softmax_rows(a)); }, {a});
  check("gelu", [&] { return weighted(gelu(a)); }, {a});
  Tensor gam = random_tensor(rng, {4}, true), bet = random_tensor(rng, {4}, true);
  check("layer_norm", [&] { return weighted(layer_norm(a, gam, bet)); }, {a, gam, bet});
  check("reshape", [&] { return weighted(reshape(a, {6, 4})); }, {a});
  check("permute", [&] { return weighted(permute(a, {2, 0, 1})); }, {a});
  check("gather", [&] { return weighted(gather(a, {5}, {0, 7, 7, 23, 11})); }, {a});
  check("select0", [&] { return weighted(select0(a, 1)); }, {a});
  Tensor r4 = random_tensor(rng, {2, 3, 4, 2}, true);
  check("roll_hw", [&] { return weighted(roll_hw(r4, -1, 2)); }, {r4});
  check("sum", [&] { return sum(square(sum(a))); }, {a});
  check("mean", [&] { return sum(square(mean(a))); }, {a});
  check("mean_axis", [&] { return weighted(mean_axis(a, 1)); }, {a});
  Tensor logits = random_tensor(rng, {4, 3}, true);
  const std::vector<int> labels{2, 0, 1, 1};
  check("cross_entropy", [&] { return cross_entropy(logits, labels); }, {logits});
  Tensor img = random_tensor(rng, {2, 3, 5, 6}, true), ker = random_tensor(rng, {3, 3, 3}, true),
         bker = random_tensor(rng, {2, 3, 3, 3}, true);
  check("depthwise_conv2d", [&] { return weighted(depthwise_conv2d(img, ker)); }, {img, ker});
  check("depthwise_conv2d_batched", [&] { return weighted(depthwise_conv2d_batched(img, bker)); }, {img, bker});
  for (bool training : {true, false}) {
    ModulationState st = ModulationState::identity(3);
    st.gamma = random_tensor(rng, {3}, true);
    st.beta = random_tensor(rng, {3}, true);
    st.running_mean = {0.1, -0.2, 0.3};
    st.running_var = {0.5, 1.5, 2.0};
    check(std::string("batch_norm2d_") + (training ? "train" : "eval"),
          [&] { return weighted(batch_norm2d(img, st, training)); }, {img, st.gamma, st.beta});
  }
  ArmConfig bank_cfg;
  bank_cfg.bank = sample_bank(5, 8, 3, 2);
  {
    Rng prng(7);
    ArmParams p = init_arm_params(bank_cfg, 3, prng);
    for (double& w : p.coeff_weight.mutable_data()) w = prng.normal();
    check("predict_coefficients", [&] { return weighted(predict_coefficients(img, p)); },
          {img, p.coeff_weight, p.coeff_bias});
    Tensor coeffs = random_tensor(rng, {2, 3, 8}, true);
    check("combine_filters", [&] { return weighted(combine_filters(*bank_cfg.bank, coeffs)); }, {coeffs});
  }
  for (ArmVariant v : {ArmVariant::kGaussian, ArmVariant::kLearnable, ArmVariant::kBank}) {
    for (bool mod : {true, false}) {
      ArmConfig cfg = bank_cfg;
      cfg.variant = v;
      cfg.use_external_modulation = mod;
      if (v != ArmVariant::kBank) cfg.bank.reset();
      Rng prng(8);
      ArmParams p = init_arm_params(cfg, 3, prng);
      if (p.coeff_weight.defined()) {
        for (double& w : p.coeff_weight.mutable_data()) w = prng.normal();
      }
      std::vector<Tensor> params = p.trainable();
      params.push_back(img);
      check("apply_arm_" + to_string(v) + (mod ? "_modulated" : ""), [&] { return weighted(apply_arm(img, cfg, p, true)); },
            params);
    }
  }

  ModelConfig mc;
  mc.image_size = 16;
  mc.patch_size = 4;
  mc.embed_dim = 8;
  mc.heads = 2;
  mc.blocks_per_stage = {1};
  Model m = build_model(mc, std::nullopt, 3);
  const Tensor images = random_tensor(rng, {2, 1, 16, 16});
  check("patch_embed", [&] { return weighted(patch_embed(images, m.params, 4)); },
        {m.params.patch_weight, m.params.patch_bias, m.params.pos_embed});
  AttentionParams& ap = m.params.stages[0].blocks[0].attn;
  Tensor tokens = random_tensor(rng, {4, 4, 8}, true);
  const Tensor mask = shifted_window_mask(4, 4, 2, 1);
  check("self_attention", [&] { return weighted(self_attention(tokens, ap, 1, mask)); },
        {tokens, ap.qkv_weight, ap.qkv_bias, ap.proj_weight, ap.proj_bias});
  Tensor tok = random_tensor(rng, {2, 12, 3}, true);
  check("fold_to_spatial", [&] { return weighted(fold_to_spatial(tok, 3, 4)); }, {tok});
  Tensor sp = random_tensor(rng, {2, 3, 3, 4}, true);
  check("unfold_from_spatial", [&] { return weighted(unfold_from_spatial(sp)); }, {sp});
  Tensor grid = random_tensor(rng, {2, 4, 4, 3}, true);
  check("window_partition", [&] { return weighted(window_partition(grid, 2)); }, {grid});
  Tensor wins = random_tensor(rng, {8, 4, 3}, true);
  check("window_reverse", [&] { return weighted(window_reverse(wins, 2, 4, 4)); }, {wins});
  Tensor mw = random_tensor(rng, {12, 6}, true);
  check("patch_merge", [&] { return weighted(patch_merge(grid, mw)); }, {grid, mw});

  // The ARM-equipped tiny model end to end.
  ModelConfig tc;
  tc.image_size = 16;
  tc.patch_size = 4;
  tc.embed_dim = 8;
  tc.heads = 1;
  tc.blocks_per_stage = {1, 1};
  tc.arm_placement = Placement::kAfterAttention;
  ArmConfig tiny_arm;
  tiny_arm.bank = sample_bank(11, 8, 3, 2);
  Model tiny = build_model(tc, tiny_arm, 12);
  Rng hr(13);
  for (double& w : tiny.params.stages[0].blocks[0].arm->coeff_weight.mutable_data()) w = hr.normal();
  const Tensor timg = random_tensor(rng, {3, 1, 16, 16});
  const std::vector<int> tl{0, 1, 1};
  check("tiny_arm_model", [&] { return cross_entropy(model_forward(timg, tiny, true), tl); }, tiny.trainable());

  int failed = 0;
  double worst = 0.0;
  std::string worst_name, failures;
  std::size_t probes = 0;
  for (const auto& [name, r] : results) {
    probes += r.probes;
    if (r.max_rel_error > worst) {
      worst = r.max_rel_error;
      worst_name = name;
    }
    if (!r.passed) {
      ++failed;
      failures += " " + name;
    }
  }
  const double secs = seconds_since(t0);
  return {failed == 0 && secs < 120.0,
          std::to_string(results.size() - static_cast<std::size_t>(failed)) + "/" + std::to_string(results.size()) +
              " checks pass, " + std::to_string(probes) + " probes, worst rel err " + fmt("%.2e", worst) + " (" +
              worst_name + ")" + (failed ? "; failed:" + failures : "") + "; " + fmt("%.2f s", secs)};
}

// ---- 4 ----
Outcome structural_inverses() {
  Rng rng(derive_seed(2026, "acceptance-inverse"));
  int fold_ok = 0, win_ok = 0;
  const int trials = 1000;
  for (int t = 0; t < trials; ++t) {
    const std::size_t B = 1 + rng.below(3), H = 1 + rng.below(6), W = 1 + rng.below(6), C = 1 + rng.below(5);
    const Tensor tokens = random_tensor(rng, {B, H * W, C});
    const Tensor spatial = random_tensor(rng, {B, C, H, W});
    if (bit_equal(unfold_from_spatial(fold_to_spatial(tokens, static_cast<int>(H), static_cast<int>(W))), tokens) &&
        bit_equal(fold_to_spatial(unfold_from_spatial(spatial), static_cast<int>(H), static_cast<int>(W)), spatial)) {
      ++fold_ok;
    }
    const std::size_t w = 1 + rng.below(4), mh = 1 + rng.below(3), mw = 1 + rng.below(3);
    const Tensor x = random_tensor(rng, {B, w * mh, w * mw, C});
    const Tensor back =
        window_reverse(window_partition(x, static_cast<int>(w)), static_cast<int>(w), static_cast<int>(w * mh),
                       static_cast<int>(w * mw));
    if (bit_equal(back, x)) ++win_ok;
  }
  return {fold_ok == trials && win_ok == trials, "fold/unfold " + std::to_string(fold_ok) + "/1000, window " +
                                                     std::to_string(win_ok) + "/1000 bit-exact round trips"};
}

// ---- 5 ----
Outcome aliasing_demo() {
  const auto t0 = std::chrono::steady_clock::now();
  const AliasReport raw = alias_demo_1d(7.0, 10.0);
  const AliasReport filtered = alias_demo_1d(7.0, 10.0, 0.05);
  const double secs = seconds_since(t0);
  const double bin = raw.spectrum[1].hz;
  const double db = attenuation_db(raw, filtered);
  return {std::abs(raw.dominant_hz - 3.0) <= bin && db >= 10.0 && secs < 1.0,
          "7 Hz at 10 Hz peaks at " + fmt("%g Hz", raw.dominant_hz) + " (bin " + fmt("%g Hz", bin) +
              "); Gaussian prefilter (sigma 0.05 s) attenuates the alias by " + fmt("%.1f dB", db) + "; " +
              fmt("%.3f s", secs)};
}

// ---- 6 ----
Outcome noop_equivalence() {
  const ExperimentConfig cfg = config_file("toy_plain.json");
  ModelConfig plain = cfg.model;
  plain.arm_placement = Placement::kNone;
  Model m = build_model(plain, std::nullopt, 0);
  Rng rng(derive_seed(2026, "acceptance-noop"));
  bool same = true;
  for (int t = 0; t < 5; ++t) {
    const Tensor x = random_tensor(rng, {4, 1, 16, 16});
    same = same && bit_equal(model_forward(x, m, true), testing::baseline_forward(x, m)) &&
           bit_equal(model_forward(x, m, false), testing::baseline_forward(x, m));
  }
  const Model with = build_model(cfg.model, cfg.arm->resolve(0), 0);
  const double ratio = static_cast<double>(with.arm_parameter_count()) / static_cast<double>(m.parameter_count());
  return {same && ratio < 0.02, std::string(same ? "bit-identical" : "DIFFERENT") +
                                    " to the ARM-free baseline on 5 batches (train and eval); ARM adds " +
                                    std::to_string(with.arm_parameter_count()) + " params to " +
                                    std::to_string(m.parameter_count()) + " (" + fmt("%.2f%%", 100.0 * ratio) + ")"};
}

// ---- 7 ----
Outcome toy_direction() {
  const auto t0 = std::chrono::steady_clock::now();
  const ExperimentConfig cfg = config_file("toy_plain.json");
  SweepRunner runner{RunOptions{}};
  const SweepTable t = filter_sweep(cfg, runner);
  fs::create_directories(kOut);
  write_file_atomic(kOut / "sweep_filter.csv", t.csv());
  const double secs = seconds_since(t0);
  const double per_run = secs / static_cast<double>(runner.distinct_runs() * cfg.seeds.size());
  const SweepRow& none = t.rows.front();
  const SweepRow& bank = t.rows.back();
  const double delta = std::stod(bank.extra[0]);
  std::string others;
  for (std::size_t i = 1; i + 1 < t.rows.size(); ++i) others += ", " + t.rows[i].keys[0] + " " + fmt("%+.2f", std::stod(t.rows[i].extra[0]));
  return {cfg.seeds.size() >= 5 && delta >= -0.5 && bank.extra[2] == "true" && per_run < 600.0,
          std::to_string(cfg.seeds.size()) + " seeds: no ARM " + fmt("%.2f%%", 100.0 * none.mean_test_accuracy) +
              ", bank ARM " + fmt("%.2f%%", 100.0 * bank.mean_test_accuracy) + " (delta " + fmt("%+.2f", delta) +
              " points; reference +0.8" + others + "); " + fmt("%.1f s per run", per_run)};
}

// ---- 8 ----
Outcome placement_completeness() {
  const ExperimentConfig cfg = config_file("placement_sweep.json");
  SweepRunner runner{RunOptions{}};
  const SweepTable t = placement_sweep(cfg, runner);
  fs::create_directories(kOut);
  write_file_atomic(kOut / "sweep_placement.csv", t.csv());
  int finite = 0;
  for (const SweepRow& r : t.rows) finite += r.all_finite ? 1 : 0;
  const std::string csv = t.csv();
  const long lines = std::count(csv.begin(), csv.end(), '\n');
  return {t.rows.size() == 10 && finite == 10 && lines == 11,
          std::to_string(t.rows.size()) + " rows (5 placements + 5 stage subsets), " + std::to_string(finite) +
              " with finite losses, " + std::to_string(runner.distinct_runs()) + " distinct trainings"};
}

// ---- 9 ----
Outcome probe_ordering() {
  const auto t0 = std::chrono::steady_clock::now();
  const ExperimentConfig cfg = config_file("toy_hier.json");
  const Dataset data = make_dataset(cfg.dataset);
  std::vector<ProbeReport> reports;
  int ordered = 0;
  std::string per_seed;
  for (std::uint64_t seed : cfg.seeds) {
    TrainedRun run = train_one(cfg, data, seed);
    reports.push_back(blur_probe(run.model, data, cfg.probe, seed, true));
    const ProbeReport& r = reports.back();
    const bool ok = r.stage_accuracy.front() >= r.stage_accuracy.back();
    ordered += ok ? 1 : 0;
    per_seed += " " + fmt("%.2f", r.stage_accuracy.front()) + (ok ? ">=" : "<") + fmt("%.2f", r.stage_accuracy.back());
  }
  fs::create_directories(kOut);
  write_file_atomic(kOut / "probe.csv", probe_csv(reports));
  const double secs = seconds_since(t0);
  return {cfg.seeds.size() >= 3 && ordered >= 2 && secs < 600.0,
          "earliest >= last stage in " + std::to_string(ordered) + " of " + std::to_string(cfg.seeds.size()) +
              " seeds (" + per_seed.substr(1) + "); input probe " + fmt("%.2f", reports.front().input_accuracy) +
              "; " + fmt("%.1f s", secs)};
}

// ---- 10 ----
int run_cli(const std::string& args) {
  const int st = std::system((std::string(ARMKIT_CLI) + " " + args + " > /dev/null 2>&1").c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

Outcome determinism() {
  const fs::path d = kOut / "determinism";
  fs::remove_all(d);
  const std::string cfg = std::string(ARMKIT_CONFIG_DIR) + "/smoke.json";
  struct Pair {
    std::string name, first, rerun, file;
  };
  const std::vector<Pair> pairs{
      {"train", "train --config " + cfg + " --out " + (d / "train_a").string(),
       "train --threads 2 --config " + (d / "train_a" / "manifest.json").string() + " --out " + (d / "train_b").string(),
       "metrics.csv"},
      {"sweep", "sweep --kind filter --config " + cfg + " --out " + (d / "sweep_a").string(),
       "sweep --kind filter --config " + (d / "sweep_a" / "manifest.json").string() + " --out " +
           (d / "sweep_b").string(),
       "sweep_filter.csv"},
      {"probe", "probe --config " + cfg + " --out " + (d / "probe_a").string(),
       "probe --config " + (d / "probe_a" / "manifest.json").string() + " --out " + (d / "probe_b").string(),
       "probe.csv"}};
  int same = 0;
  std::string detail;
  for (const Pair& p : pairs) {
    bool ok = run_cli(p.first) == 0 && run_cli(p.rerun) == 0;
    const std::string a = p.name + "_a", b = p.name + "_b";
    ok = ok && fs::exists(d / a / p.file) && read_file(d / a / p.file) == read_file(d / b / p.file);
    // Every run directory under a sweep also has its own metrics CSV.
    if (ok && p.name == "sweep") {
      for (const auto& e : fs::directory_iterator(d / a / "runs")) {
        const fs::path twin = d / b / "runs" / e.path().filename() / "metrics.csv";
        ok = ok && fs::exists(twin) && read_file(e.path() / "metrics.csv") == read_file(twin);
      }
    }
    same += ok ? 1 : 0;
    detail += std::string(detail.empty() ? "" : ", ") + p.name + (ok ? " identical" : " DIFFERS");
  }
  return {same == static_cast<int>(pairs.size()), "re-run from manifest.json: " + detail};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"filter-bank correctness", filter_bank_correctness},
      {"coefficient selection identity", selection_identity},
      {"gradient suite", gradient_suite},
      {"structural inverses", structural_inverses},
      {"aliasing demo", aliasing_demo},
      {"no-op equivalence and overhead", noop_equivalence},
      {"toy-scale non-inferiority", toy_direction},
      {"placement sweep completeness", placement_completeness},
      {"blur-probe ordering", probe_ordering},
      {"determinism", determinism}};
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("%s  %2d  %s: %s\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}

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

#include "armkit/vit.hpp"

#include <algorithm>
#include <cmath>

#include "armkit/errors.hpp"
#include "armkit/ops.hpp"
#include "armkit/rng.hpp"

namespace armkit {

std::string to_string(Placement p) {
  switch (p) {
    case Placement::kNone:
      return "none";
    case Placement::kAfterPatchEmbed:
      return "after_patch_embed";
    case Placement::kAfterAttention:
      return "after_attention";
    case Placement::kAfterShortcut:
      return "after_shortcut";
    case Placement::kAfterPatchMerging:
      return "after_patch_merging";
  }
  return "unknown";
}

Placement parse_placement(const std::string& name) {
  for (Placement p : {Placement::kNone, Placement::kAfterPatchEmbed, Placement::kAfterAttention,
                      Placement::kAfterShortcut, Placement::kAfterPatchMerging}) {
    if (to_string(p) == name) return p;
  }
  throw ConfigError("model.arm_placement: expected none | after_patch_embed | after_attention | after_shortcut | "
                    "after_patch_merging, got '" + name + "'");
}

int ModelConfig::stage_dim(int s) const { return hierarchical ? embed_dim << s : embed_dim; }
int ModelConfig::stage_heads(int s) const { return hierarchical ? heads << s : heads; }
int ModelConfig::stage_grid(int s) const { return hierarchical ? grid() >> s : grid(); }
int ModelConfig::stage_window(int s) const {
  return hierarchical ? std::min(window_size, stage_grid(s)) : stage_grid(s);
}

void ModelConfig::validate() const {
  auto positive = [](const char* field, int v) {
    if (v < 1) throw ConfigError(std::string("model.") + field + ": must be positive, got " + std::to_string(v));
  };
  positive("image_size", image_size);
  positive("patch_size", patch_size);
  positive("in_channels", in_channels);
  positive("embed_dim", embed_dim);
  positive("heads", heads);
  positive("mlp_ratio", mlp_ratio);
  positive("window_size", window_size);
  if (num_classes < 2) throw ConfigError("model.num_classes: must be >= 2, got " + std::to_string(num_classes));
  if (image_size % patch_size != 0) {
    throw ConfigError("model.image_size (" + std::to_string(image_size) + ") must be divisible by model.patch_size (" +
                      std::to_string(patch_size) + ")");
  }
  if (embed_dim % heads != 0) {
    throw ConfigError("model.embed_dim (" + std::to_string(embed_dim) + ") must be divisible by model.heads (" +
                      std::to_string(heads) + ")");
  }
  if (blocks_per_stage.empty()) throw ConfigError("model.blocks_per_stage: needs at least one stage");
  for (int b : blocks_per_stage) positive("blocks_per_stage[]", b);
  if (hierarchical) {
    for (int s = 0; s < stages(); ++s) {
      if (s + 1 < stages() && stage_grid(s) % 2 != 0) {
        throw ConfigError("model.image_size / model.patch_size: token grid " + std::to_string(stage_grid(s)) +
                          " at stage " + std::to_string(s) + " cannot be halved for patch merging");
      }
      if (stage_grid(s) % stage_window(s) != 0) {
        throw ConfigError("model.window_size: window " + std::to_string(stage_window(s)) +
                          " does not tile the " + std::to_string(stage_grid(s)) + "-token grid of stage " +
                          std::to_string(s));
      }
    }
  }
  if (arm_placement == Placement::kAfterPatchMerging && !hierarchical) {
    throw ConfigError("model.arm_placement 'after_patch_merging' requires model.hierarchical = true");
  }
  for (int s : arm_stages) {
    if (s < 0 || s >= stages()) {
      throw ConfigError("model.arm_stages: stage " + std::to_string(s) + " out of range [0, " +
                        std::to_string(stages()) + ")");
    }
    if (arm_placement == Placement::kAfterPatchMerging && s == stages() - 1) {
      throw ConfigError("model.arm_stages: the last stage has no patch merge to follow (arm_placement "
                        "after_patch_merging)");
    }
  }
}

namespace {

void collect_arm(std::vector<NamedTensor>& out, const std::string& prefix, const std::optional<ArmParams>& arm) {
  if (!arm) return;
  if (arm->coeff_weight.defined()) out.push_back({prefix + ".coeff_weight", arm->coeff_weight});
  if (arm->coeff_bias.defined()) out.push_back({prefix + ".coeff_bias", arm->coeff_bias});
  if (arm->learnable_kernels.defined()) out.push_back({prefix + ".kernels", arm->learnable_kernels});
  if (arm->modulation) {
    out.push_back({prefix + ".bn_gamma", arm->modulation->gamma});
    out.push_back({prefix + ".bn_beta", arm->modulation->beta});
  }
}

void collect_buffers(std::vector<NamedBuffer>& out, const std::string& prefix, std::optional<ArmParams>& arm) {
  if (!arm || !arm->modulation) return;
  out.push_back({prefix + ".bn_running_mean", &arm->modulation->running_mean});
  out.push_back({prefix + ".bn_running_var", &arm->modulation->running_var});
}

std::string stage_prefix(std::size_t s) { return "stages." + std::to_string(s); }
std::string block_prefix(std::size_t s, std::size_t b) {
  return stage_prefix(s) + ".blocks." + std::to_string(b);
}

}  // namespace

std::vector<NamedTensor> Model::named_parameters() const {
  const ModelParams& p = params;
  std::vector<NamedTensor> out{{"patch.weight", p.patch_weight}, {"patch.bias", p.patch_bias}, {"pos_embed", p.pos_embed}};
  collect_arm(out, "embed_arm", p.embed_arm);
  for (std::size_t s = 0; s < p.stages.size(); ++s) {
    for (std::size_t b = 0; b < p.stages[s].blocks.size(); ++b) {
      const BlockParams& bp = p.stages[s].blocks[b];
      const std::string pre = block_prefix(s, b);
      out.push_back({pre + ".norm1.gamma", bp.norm1_gamma});
      out.push_back({pre + ".norm1.beta", bp.norm1_beta});
      out.push_back({pre + ".attn.qkv_weight", bp.attn.qkv_weight});
      out.push_back({pre + ".attn.qkv_bias", bp.attn.qkv_bias});
      out.push_back({pre + ".attn.proj_weight", bp.attn.proj_weight});
      out.push_back({pre + ".attn.proj_bias", bp.attn.proj_bias});
      out.push_back({pre + ".norm2.gamma", bp.norm2_gamma});
      out.push_back({pre + ".norm2.beta", bp.norm2_beta});
      out.push_back({pre + ".mlp.fc1_weight", bp.fc1_weight});
      out.push_back({pre + ".mlp.fc1_bias", bp.fc1_bias});
      out.push_back({pre + ".mlp.fc2_weight", bp.fc2_weight});
      out.push_back({pre + ".mlp.fc2_bias", bp.fc2_bias});
      collect_arm(out, pre + ".arm", bp.arm);
    }
    if (p.stages[s].merge_weight.defined()) out.push_back({stage_prefix(s) + ".merge.weight", p.stages[s].merge_weight});
    collect_arm(out, stage_prefix(s) + ".merge_arm", p.stages[s].merge_arm);
  }
  out.push_back({"norm.gamma", p.norm_gamma});
  out.push_back({"norm.beta", p.norm_beta});
  out.push_back({"head.weight", p.head_weight});
  out.push_back({"head.bias", p.head_bias});
  return out;
}

std::vector<NamedBuffer> Model::named_buffers() {
  std::vector<NamedBuffer> out;
  collect_buffers(out, "embed_arm", params.embed_arm);
  for (std::size_t s = 0; s < params.stages.size(); ++s) {
    for (std::size_t b = 0; b < params.stages[s].blocks.size(); ++b) {
      collect_buffers(out, block_prefix(s, b) + ".arm", params.stages[s].blocks[b].arm);
    }
    collect_buffers(out, stage_prefix(s) + ".merge_arm", params.stages[s].merge_arm);
  }
  return out;
}

std::vector<Tensor> Model::trainable() const {
  std::vector<Tensor> out;
  for (const NamedTensor& t : named_parameters()) out.push_back(t.tensor);
  return out;
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const NamedTensor& t : named_parameters()) n += t.tensor.numel();
  return n;
}

std::size_t Model::arm_parameter_count() const {
  std::size_t n = 0;
  for (const NamedTensor& t : named_parameters()) {
    if (t.name.find("arm.") != std::string::npos) n += t.tensor.numel();
  }
  return n;
}

namespace {

// Glorot-uniform [in x out].
Tensor xavier(Rng& rng, std::size_t in, std::size_t out) {
  const double a = std::sqrt(6.0 / static_cast<double>(in + out));
  std::vector<double> w(in * out);
  for (double& v : w) v = rng.uniform(-a, a);
  return Tensor::from({in, out}, std::move(w), true);
}

Tensor ones(std::size_t n) { return Tensor::full({n}, 1.0, true); }
Tensor zeros(std::size_t n) { return Tensor::zeros({n}, true); }

ArmParams make_arm(const ArmConfig& arm, int channels, int grid, const std::string& where, Rng& rng) {
  const int k = arm.effective_kernel_size();
  if (grid < k) {
    throw ConfigError("model.arm_stages: ARM " + where + " sees a " + std::to_string(grid) + "x" +
                      std::to_string(grid) + " map, smaller than the " + std::to_string(k) + "x" +
                      std::to_string(k) + " filter");
  }
  return init_arm_params(arm, static_cast<std::size_t>(channels), rng);
}

}  // namespace

Model build_model(const ModelConfig& cfg, const std::optional<ArmConfig>& arm, std::uint64_t seed) {
  cfg.validate();
  if (cfg.arm_placement == Placement::kNone && arm) {
    throw ConfigError("arm: an ARM is configured but model.arm_placement is 'none'");
  }
  if (cfg.arm_placement != Placement::kNone && !arm) {
    throw ConfigError("model.arm_placement '" + to_string(cfg.arm_placement) + "' needs an arm section");
  }
  if (arm) arm->validate();

  Model m;
  m.config = cfg;
  m.arm = arm;
  Rng rng(derive_seed(seed, "base"));
  Rng arm_rng(derive_seed(seed, "arm"));
  ModelParams& p = m.params;

  const std::size_t d0 = static_cast<std::size_t>(cfg.embed_dim);
  const std::size_t patch_in = static_cast<std::size_t>(cfg.in_channels * cfg.patch_size * cfg.patch_size);
  const std::size_t tokens = static_cast<std::size_t>(cfg.grid() * cfg.grid());
  p.patch_weight = xavier(rng, patch_in, d0);
  p.patch_bias = zeros(d0);
  std::vector<double> pos(tokens * d0);
  for (double& v : pos) v = rng.normal(0.0, 0.02);
  p.pos_embed = Tensor::from({tokens, d0}, std::move(pos), true);
  if (cfg.arm_placement == Placement::kAfterPatchEmbed) {
    p.embed_arm = make_arm(*arm, cfg.embed_dim, cfg.grid(), "after patch embedding", arm_rng);
  }

  const bool in_blocks =
      cfg.arm_placement == Placement::kAfterAttention || cfg.arm_placement == Placement::kAfterShortcut;
  for (int s = 0; s < cfg.stages(); ++s) {
    StageParams sp;
    const std::size_t d = static_cast<std::size_t>(cfg.stage_dim(s));
    const std::size_t hidden = d * static_cast<std::size_t>(cfg.mlp_ratio);
    for (int b = 0; b < cfg.blocks_per_stage[static_cast<std::size_t>(s)]; ++b) {
      BlockParams bp;
      bp.norm1_gamma = ones(d);
      bp.norm1_beta = zeros(d);
      bp.attn.qkv_weight = xavier(rng, d, 3 * d);
      bp.attn.qkv_bias = zeros(3 * d);
      bp.attn.proj_weight = xavier(rng, d, d);
      bp.attn.proj_bias = zeros(d);
      bp.norm2_gamma = ones(d);
      bp.norm2_beta = zeros(d);
      bp.fc1_weight = xavier(rng, d, hidden);
      bp.fc1_bias = zeros(hidden);
      bp.fc2_weight = xavier(rng, hidden, d);
      bp.fc2_bias = zeros(d);
      if (in_blocks && cfg.arm_stages.count(s)) {
        bp.arm = make_arm(*arm, cfg.stage_dim(s), cfg.stage_grid(s), "in stage " + std::to_string(s), arm_rng);
      }
      sp.blocks.push_back(std::move(bp));
    }
    if (cfg.hierarchical && s + 1 < cfg.stages()) {
      sp.merge_weight = xavier(rng, 4 * d, 2 * d);
      if (cfg.arm_placement == Placement::kAfterPatchMerging && cfg.arm_stages.count(s)) {
        sp.merge_arm = make_arm(*arm, cfg.stage_dim(s + 1), cfg.stage_grid(s + 1),
                                "after the patch merge of stage " + std::to_string(s), arm_rng);
      }
    }
    p.stages.push_back(std::move(sp));
  }
  const std::size_t d_last = static_cast<std::size_t>(cfg.stage_dim(cfg.stages() - 1));
  p.norm_gamma = ones(d_last);
  p.norm_beta = zeros(d_last);
  p.head_weight = xavier(rng, d_last, static_cast<std::size_t>(cfg.num_classes));
  p.head_bias = zeros(static_cast<std::size_t>(cfg.num_classes));
  return m;
}

Tensor patchify(const Tensor& images, int patch) {
  if (images.rank() != 4) throw DimensionError("patchify: expected [B x C x H x W], got " + shape_str(images.shape()));
  const std::size_t B = images.dim(0), C = images.dim(1), H = images.dim(2), W = images.dim(3);
  const std::size_t p = static_cast<std::size_t>(patch);
  if (patch < 1 || H % p != 0 || W % p != 0) {
    throw ConfigError("patch_embed: image " + std::to_string(H) + "x" + std::to_string(W) +
                      " is not divisible by patch size " + std::to_string(patch));
  }
  const std::size_t gh = H / p, gw = W / p, len = C * p * p;
  std::vector<std::size_t> index;
  index.reserve(B * gh * gw * len);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t ti = 0; ti < gh; ++ti) {
      for (std::size_t tj = 0; tj < gw; ++tj) {
        for (std::size_t c = 0; c < C; ++c) {
          for (std::size_t r = 0; r < p; ++r) {
            for (std::size_t q = 0; q < p; ++q) index.push_back(((b * C + c) * H + ti * p + r) * W + tj * p + q);
          }
        }
      }
    }
  }
  return gather(images, {B, gh * gw, len}, std::move(index));
}

Tensor patch_embed(const Tensor& images, const ModelParams& params, int patch) {
  return add(linear(patchify(images, patch), params.patch_weight, params.patch_bias), params.pos_embed);
}

Tensor self_attention(const Tensor& z, const AttentionParams& params, int heads, const Tensor& mask, const TapFn& tap,
                      int stage, int block) {
  if (z.rank() != 3) throw DimensionError("self_attention: expected [G x n x d], got " + shape_str(z.shape()));
  const std::size_t G = z.dim(0), n = z.dim(1), d = z.dim(2);
  const std::size_t h = static_cast<std::size_t>(heads);
  if (params.qkv_weight.dim(0) != d || params.qkv_weight.dim(1) != 3 * d) {
    throw DimensionError("self_attention: tokens " + shape_str(z.shape()) + " do not match qkv weight " +
                         shape_str(params.qkv_weight.shape()));
  }
  if (h == 0 || d % h != 0) throw DimensionError("self_attention: width " + std::to_string(d) + " not divisible by heads");
  const std::size_t dh = d / h;
  const Tensor qkv = permute(reshape(linear(z, params.qkv_weight, params.qkv_bias), {G, n, 3, h, dh}), {2, 0, 3, 1, 4});
  const Tensor q = reshape(select0(qkv, 0), {G * h, n, dh});
  const Tensor k = reshape(select0(qkv, 1), {G * h, n, dh});
  const Tensor v = reshape(select0(qkv, 2), {G * h, n, dh});
  Tensor scores = scale(bmm(q, k, true), 1.0 / std::sqrt(static_cast<double>(dh)));
  if (mask.defined()) scores = add(scores, mask);
  const Tensor attn = softmax_rows(scores);
  if (tap) tap({stage, block, "attention_probs", attn});
  const Tensor heads_out = permute(reshape(bmm(attn, v), {G, h, n, dh}), {0, 2, 1, 3});
  return linear(reshape(heads_out, {G, n, d}), params.proj_weight, params.proj_bias);
}

Tensor fold_to_spatial(const Tensor& tokens, int height, int width) {
  if (tokens.rank() != 3 || height < 1 || width < 1 ||
      tokens.dim(1) != static_cast<std::size_t>(height) * static_cast<std::size_t>(width)) {
    throw ContractError("fold_to_spatial: tokens " + shape_str(tokens.shape()) + " cannot fold to a " +
                        std::to_string(height) + "x" + std::to_string(width) + " grid");
  }
  const std::size_t B = tokens.dim(0), C = tokens.dim(2);
  return reshape(permute(tokens, {0, 2, 1}), {B, C, static_cast<std::size_t>(height), static_cast<std::size_t>(width)});
}

Tensor unfold_from_spatial(const Tensor& spatial) {
  if (spatial.rank() != 4) throw ContractError("unfold_from_spatial: expected [B x C x H x W], got " + shape_str(spatial.shape()));
  const std::size_t B = spatial.dim(0), C = spatial.dim(1);
  return permute(reshape(spatial, {B, C, spatial.dim(2) * spatial.dim(3)}), {0, 2, 1});
}

Tensor window_partition(const Tensor& x, int window) {
  if (x.rank() != 4) throw DimensionError("window_partition: expected [B x H x W x C], got " + shape_str(x.shape()));
  const std::size_t B = x.dim(0), H = x.dim(1), W = x.dim(2), C = x.dim(3);
  const std::size_t w = static_cast<std::size_t>(window);
  if (window < 1 || H % w != 0 || W % w != 0) {
    throw ConfigError("window_partition: " + std::to_string(H) + "x" + std::to_string(W) +
                      " is not divisible by window " + std::to_string(window));
  }
  const std::size_t nh = H / w, nw = W / w;
  std::vector<std::size_t> index;
  index.reserve(x.numel());
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t wi = 0; wi < nh; ++wi) {
      for (std::size_t wj = 0; wj < nw; ++wj) {
        for (std::size_t r = 0; r < w; ++r) {
          for (std::size_t s = 0; s < w; ++s) {
            const std::size_t base = ((b * H + wi * w + r) * W + wj * w + s) * C;
            for (std::size_t c = 0; c < C; ++c) index.push_back(base + c);
          }
        }
      }
    }
  }
  return gather(x, {B * nh * nw, w * w, C}, std::move(index));
}

Tensor window_reverse(const Tensor& windows, int window, int height, int width) {
  const std::size_t w = static_cast<std::size_t>(window);
  const std::size_t H = static_cast<std::size_t>(height), W = static_cast<std::size_t>(width);
  if (window < 1 || height < 1 || width < 1 || H % w != 0 || W % w != 0) {
    throw ConfigError("window_reverse: " + std::to_string(H) + "x" + std::to_string(W) +
                      " is not divisible by window " + std::to_string(window));
  }
  const std::size_t nh = H / w, nw = W / w;
  if (windows.rank() != 3 || windows.dim(1) != w * w || windows.dim(0) % (nh * nw) != 0) {
    throw DimensionError("window_reverse: windows " + shape_str(windows.shape()) + " do not tile " +
                         std::to_string(H) + "x" + std::to_string(W));
  }
  const std::size_t C = windows.dim(2), B = windows.dim(0) / (nh * nw);
  std::vector<std::size_t> index;
  index.reserve(windows.numel());
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t i = 0; i < H; ++i) {
      for (std::size_t j = 0; j < W; ++j) {
        const std::size_t win = (b * nh + i / w) * nw + j / w;
        const std::size_t base = (win * w * w + (i % w) * w + j % w) * C;
        for (std::size_t c = 0; c < C; ++c) index.push_back(base + c);
      }
    }
  }
  return gather(windows, {B, H, W, C}, std::move(index));
}

Tensor patch_merge(const Tensor& x, const Tensor& weight) {
  if (x.rank() != 4) throw DimensionError("patch_merge: expected [B x H x W x C], got " + shape_str(x.shape()));
  const std::size_t B = x.dim(0), H = x.dim(1), W = x.dim(2), C = x.dim(3);
  if (H % 2 != 0 || W % 2 != 0) {
    throw ConfigError("patch_merge: grid " + std::to_string(H) + "x" + std::to_string(W) + " has an odd side");
  }
  static constexpr std::size_t kOffsets[4][2] = {{0, 0}, {1, 0}, {0, 1}, {1, 1}};
  std::vector<std::size_t> index;
  index.reserve(x.numel());
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t i = 0; i < H / 2; ++i) {
      for (std::size_t j = 0; j < W / 2; ++j) {
        for (const auto& off : kOffsets) {
          const std::size_t base = ((b * H + 2 * i + off[0]) * W + 2 * j + off[1]) * C;
          for (std::size_t c = 0; c < C; ++c) index.push_back(base + c);
        }
      }
    }
  }
  return linear(gather(x, {B, H / 2, W / 2, 4 * C}, std::move(index)), weight, Tensor{});
}

Tensor shifted_window_mask(int height, int width, int window, int shift) {
  const std::size_t H = static_cast<std::size_t>(height), W = static_cast<std::size_t>(width);
  auto region = [&](std::size_t i, std::size_t size) -> int {
    if (i < size - static_cast<std::size_t>(window)) return 0;
    if (i < size - static_cast<std::size_t>(shift)) return 1;
    return 2;
  };
  std::vector<double> labels(H * W);
  for (std::size_t i = 0; i < H; ++i) {
    for (std::size_t j = 0; j < W; ++j) labels[i * W + j] = region(i, H) * 3 + region(j, W);
  }
  const Tensor grouped = window_partition(Tensor::from({1, H, W, 1}, labels), window);
  const std::size_t nwin = grouped.dim(0), n = grouped.dim(1);
  std::vector<double> mask(nwin * n * n);
  auto g = grouped.data();
  for (std::size_t w = 0; w < nwin; ++w) {
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = 0; b < n; ++b) mask[(w * n + a) * n + b] = g[w * n + a] == g[w * n + b] ? 0.0 : -100.0;
    }
  }
  return Tensor::from({nwin, n, n}, std::move(mask));
}

namespace {

Tensor arm_on_tokens(const Tensor& tokens, int grid, const ArmConfig& arm, ArmParams& params, bool training) {
  return unfold_from_spatial(apply_arm(fold_to_spatial(tokens, grid, grid), arm, params, training));
}

}  // namespace

Tensor block_forward(const Tensor& z, BlockParams& params, const ModelConfig& cfg, const ArmConfig* arm, int stage,
                     int block, bool training, const TapFn& tap) {
  const bool has_arm = params.arm.has_value();
  const bool in_block =
      cfg.arm_placement == Placement::kAfterAttention || cfg.arm_placement == Placement::kAfterShortcut;
  if (has_arm && (!in_block || !arm)) {
    throw ConfigError("block_forward: block carries ARM parameters but model.arm_placement is '" +
                      to_string(cfg.arm_placement) + "'");
  }
  const int grid = cfg.stage_grid(stage);
  const int window = cfg.stage_window(stage);
  const std::size_t B = z.dim(0), N = z.dim(1), C = z.dim(2);
  const std::size_t g = static_cast<std::size_t>(grid);
  if (N != g * g) {
    throw DimensionError("block_forward: " + std::to_string(N) + " tokens for a " + std::to_string(grid) + "x" +
                         std::to_string(grid) + " grid");
  }
  if (tap) tap({stage, block, "block_input", z});

  const int shift = cfg.shift_windows && window < grid && block % 2 == 1 ? window / 2 : 0;
  Tensor x = reshape(layer_norm(z, params.norm1_gamma, params.norm1_beta), {B, g, g, C});
  if (shift) x = roll_hw(x, -shift, -shift);
  Tensor a;
  if (window == grid) {
    a = self_attention(reshape(x, {B, N, C}), params.attn, cfg.stage_heads(stage), {}, tap, stage, block);
  } else {
    Tensor mask;
    const std::size_t h = static_cast<std::size_t>(cfg.stage_heads(stage));
    if (shift) {
      const Tensor m = shifted_window_mask(grid, grid, window, shift);
      const std::size_t nwin = m.dim(0), n = m.dim(1);
      std::vector<std::size_t> index;
      index.reserve(B * nwin * h * n * n);
      for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t w = 0; w < nwin; ++w) {
          for (std::size_t head = 0; head < h; ++head) {
            for (std::size_t i = 0; i < n * n; ++i) index.push_back(w * n * n + i);
          }
        }
      }
      mask = gather(m, {B * nwin * h, n, n}, std::move(index));
    }
    a = self_attention(window_partition(x, window), params.attn, cfg.stage_heads(stage), mask, tap, stage, block);
    a = window_reverse(a, window, grid, grid);
  }
  if (shift) a = roll_hw(a, shift, shift);
  a = reshape(a, {B, N, C});

  if (tap || (has_arm && cfg.arm_placement == Placement::kAfterAttention)) {
    Tensor spatial = fold_to_spatial(a, grid, grid);
    if (tap) tap({stage, block, "attention_raw", spatial});
    if (has_arm && cfg.arm_placement == Placement::kAfterAttention) {
      spatial = apply_arm(spatial, *arm, *params.arm, training);
      a = unfold_from_spatial(spatial);
    }
    if (tap) tap({stage, block, "attention_map", spatial});
  }
  Tensor out = add(z, a);
  if (has_arm && cfg.arm_placement == Placement::kAfterShortcut) out = arm_on_tokens(out, grid, *arm, *params.arm, training);

  const Tensor hidden = gelu(linear(layer_norm(out, params.norm2_gamma, params.norm2_beta), params.fc1_weight, params.fc1_bias));
  return add(out, linear(hidden, params.fc2_weight, params.fc2_bias));
}

Tensor model_forward(const Tensor& images, Model& model, bool training, const TapFn& tap) {
  const ModelConfig& cfg = model.config;
  ModelParams& p = model.params;
  if (images.rank() != 4 || images.dim(1) != static_cast<std::size_t>(cfg.in_channels) ||
      images.dim(2) != static_cast<std::size_t>(cfg.image_size) ||
      images.dim(3) != static_cast<std::size_t>(cfg.image_size)) {
    throw DimensionError("model_forward: images " + shape_str(images.shape()) + " do not match a " +
                         std::to_string(cfg.in_channels) + "-channel " + std::to_string(cfg.image_size) + "px model");
  }
  const ArmConfig* arm = model.arm ? &*model.arm : nullptr;
  const std::size_t B = images.dim(0);
  Tensor z = patch_embed(images, p, cfg.patch_size);
  if (p.embed_arm) z = arm_on_tokens(z, cfg.grid(), *arm, *p.embed_arm, training);
  for (int s = 0; s < cfg.stages(); ++s) {
    StageParams& sp = p.stages[static_cast<std::size_t>(s)];
    for (std::size_t b = 0; b < sp.blocks.size(); ++b) {
      z = block_forward(z, sp.blocks[b], cfg, arm, s, static_cast<int>(b), training, tap);
    }
    if (sp.merge_weight.defined()) {
      const std::size_t g = static_cast<std::size_t>(cfg.stage_grid(s));
      const Tensor merged = patch_merge(reshape(z, {B, g, g, z.dim(2)}), sp.merge_weight);
      const std::size_t g2 = merged.dim(1);
      z = reshape(merged, {B, g2 * g2, merged.dim(3)});
      if (sp.merge_arm) z = arm_on_tokens(z, static_cast<int>(g2), *arm, *sp.merge_arm, training);
    }
  }
  const Tensor pooled = mean_axis(layer_norm(z, p.norm_gamma, p.norm_beta), 1);
  return linear(pooled, p.head_weight, p.head_bias);
}

}  // namespace armkit

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

// Toy vision transformers. The plain model runs global attention over one
// token grid; the hierarchical model runs window attention and halves the
// grid (doubling width and heads) between stages with patch merging. Both
// use pre-norm blocks, a learned absolute position embedding, no CLS token
// and global average pooling before the classifier.

#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "armkit/arm.hpp"
#include "armkit/tensor.hpp"

namespace armkit {

enum class Placement { kNone, kAfterPatchEmbed, kAfterAttention, kAfterShortcut, kAfterPatchMerging };

std::string to_string(Placement p);
Placement parse_placement(const std::string& name);

struct ModelConfig {
  int image_size = 16;
  int patch_size = 4;
  int in_channels = 1;
  int embed_dim = 32;
  int heads = 2;
  int mlp_ratio = 4;
  int num_classes = 2;
  std::vector<int> blocks_per_stage{1, 1, 1, 1};
  bool hierarchical = false;
  int window_size = 7;
  bool shift_windows = false;
  Placement arm_placement = Placement::kNone;
  // Stages whose blocks get an ARM (after_attention / after_shortcut), or
  // whose closing patch merge gets one (after_patch_merging). Ignored for
  // after_patch_embed, which always acts once on the embedded tokens.
  std::set<int> arm_stages{0};

  int grid() const { return image_size / patch_size; }
  int stages() const { return static_cast<int>(blocks_per_stage.size()); }
  int head_dim() const { return embed_dim / heads; }
  int stage_dim(int s) const;
  int stage_heads(int s) const;
  int stage_grid(int s) const;
  // Window side actually used in stage s (the whole grid for plain models).
  int stage_window(int s) const;
  void validate() const;
};

struct AttentionParams {
  Tensor qkv_weight, qkv_bias;  // [d x 3d], [3d]
  Tensor proj_weight, proj_bias;
};

struct BlockParams {
  Tensor norm1_gamma, norm1_beta;
  AttentionParams attn;
  Tensor norm2_gamma, norm2_beta;
  Tensor fc1_weight, fc1_bias, fc2_weight, fc2_bias;
  std::optional<ArmParams> arm;
};

struct StageParams {
  std::vector<BlockParams> blocks;
  Tensor merge_weight;  // [4C x 2C], hierarchical stages except the last
  std::optional<ArmParams> merge_arm;
};

struct ModelParams {
  Tensor patch_weight, patch_bias, pos_embed;
  std::optional<ArmParams> embed_arm;
  std::vector<StageParams> stages;
  Tensor norm_gamma, norm_beta, head_weight, head_bias;
};

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

// Running statistics of an ARM's external modulation.
struct NamedBuffer {
  std::string name;
  std::vector<double>* values;
};

struct Model {
  ModelConfig config;
  std::optional<ArmConfig> arm;
  ModelParams params;

  std::vector<NamedTensor> named_parameters() const;
  std::vector<NamedBuffer> named_buffers();
  std::vector<Tensor> trainable() const;
  std::size_t parameter_count() const;
  std::size_t arm_parameter_count() const;
};

// An ARM config must be given exactly when the placement is not none. Base
// weights come from derive_seed(seed, "base") and ARM weights from
// derive_seed(seed, "arm"), so models that differ only in ARM share every
// base weight.
Model build_model(const ModelConfig& cfg, const std::optional<ArmConfig>& arm, std::uint64_t seed);

struct TapEvent {
  int stage;
  int block;
  // block_input [B x N x C]; attention_raw and attention_map [B x C x H x W]
  // (before and after ARM); attention_probs [windows*B*heads x n x n].
  std::string_view name;
  const Tensor& value;
};
using TapFn = std::function<void(const TapEvent&)>;

Tensor model_forward(const Tensor& images, Model& model, bool training, const TapFn& tap = {});

// Building blocks, exposed for tests.

// [B x C x H x W] -> [B x N x d] with N = (H/p)(W/p); tokens row-major over
// the patch grid, patch vectors ordered (channel, row, column).
Tensor patchify(const Tensor& images, int patch);
Tensor patch_embed(const Tensor& images, const ModelParams& params, int patch);

// Multi-head attention over [G x n x d] groups of tokens. `mask` (optional)
// is added to the scaled scores and has shape [G x heads x n x n] flattened
// to [G*heads x n x n].
Tensor self_attention(const Tensor& z, const AttentionParams& params, int heads, const Tensor& mask = {},
                      const TapFn& tap = {}, int stage = 0, int block = 0);

// [B x N x C] <-> [B x C x H x W], N = H*W row-major.
Tensor fold_to_spatial(const Tensor& tokens, int height, int width);
Tensor unfold_from_spatial(const Tensor& spatial);

// [B x H x W x C] -> [B*nW x w*w x C], windows row-major per sample.
Tensor window_partition(const Tensor& x, int window);
Tensor window_reverse(const Tensor& windows, int window, int height, int width);

// [B x H x W x C] -> [B x H/2 x W/2 x 4C] in the order (0,0), (1,0), (0,1),
// (1,1) of (row, column) offsets, then projected by weight [4C x 2C].
Tensor patch_merge(const Tensor& x, const Tensor& weight);

// Additive mask for shifted windows: 0 within a region, -100 across.
Tensor shifted_window_mask(int height, int width, int window, int shift);

// Tokens [B x H*W x C] through one pre-norm block; ARM (when present in
// params) sits where cfg.arm_placement says.
Tensor block_forward(const Tensor& z, BlockParams& params, const ModelConfig& cfg, const ArmConfig* arm, int stage,
                     int block, bool training, const TapFn& tap = {});

}  // namespace armkit

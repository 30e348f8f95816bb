#pragma once

#include <cstdint>
#include <array>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "peract/action_codec.hpp"
#include "peract/errors.hpp"

namespace peract {

using KeyValues = std::map<std::string, std::string>;

/// Architecture knobs. Defaults reproduce the full-size agent: a 100^3 grid
/// cut into 5^3 patches, 2048 x 512 latents, 6 latent self-attention layers,
/// 77 x 512 language features and 128-wide input tokens.
struct PolicyConfig {
  int grid_size = 100;
  int patch_size = 5;
  int num_latents = 2048;
  int latent_dim = 512;
  int num_self_attn_layers = 6;
  int embed_dim = 128;
  int voxel_feature_dim = 64;
  double rotation_bin_deg = 5.0;
  int num_lang_tokens = 77;
  int lang_feature_dim = 512;
  int num_attention_heads = 8;
  int num_cross_heads = 1;
  int cross_head_dim = 64;
  int ff_mult = 4;
  std::uint64_t init_seed = 0;
  std::uint64_t lang_seed = 0x5eed;

  [[nodiscard]] int patches_per_axis() const { return grid_size / patch_size; }
  [[nodiscard]] int num_voxel_tokens() const {
    const int n = patches_per_axis();
    return n * n * n;
  }
  [[nodiscard]] int sequence_length() const { return num_voxel_tokens() + num_lang_tokens; }
  [[nodiscard]] int rotation_bins() const { return rotation_bin_count(rotation_bin_deg); }
  [[nodiscard]] std::array<int, 3> grid() const { return {grid_size, grid_size, grid_size}; }

  void validate() const {
    const auto positive = [](int v, const char* name) {
      if (v <= 0) throw InvalidInput(std::string("policy config: ") + name + " must be positive");
    };
    positive(grid_size, "grid_size");
    positive(patch_size, "patch_size");
    positive(num_latents, "num_latents");
    positive(latent_dim, "latent_dim");
    positive(embed_dim, "embed_dim");
    positive(voxel_feature_dim, "voxel_feature_dim");
    positive(num_lang_tokens, "num_lang_tokens");
    positive(lang_feature_dim, "lang_feature_dim");
    positive(num_attention_heads, "num_attention_heads");
    positive(num_cross_heads, "num_cross_heads");
    positive(cross_head_dim, "cross_head_dim");
    positive(ff_mult, "ff_mult");
    if (num_self_attn_layers < 0) throw InvalidInput("policy config: num_self_attn_layers must be >= 0");
    if (grid_size % patch_size != 0) throw InvalidInput("policy config: grid_size must be divisible by patch_size");
    if (embed_dim != 2 * voxel_feature_dim) {
      throw InvalidInput("policy config: embed_dim must equal 2 * voxel_feature_dim (voxel + proprio features)");
    }
    if (latent_dim % num_attention_heads != 0) {
      throw InvalidInput("policy config: latent_dim must be divisible by num_attention_heads");
    }
    (void)rotation_bins();
  }

  [[nodiscard]] KeyValues to_map() const {
    return {{"grid_size", std::to_string(grid_size)},
            {"patch_size", std::to_string(patch_size)},
            {"num_latents", std::to_string(num_latents)},
            {"latent_dim", std::to_string(latent_dim)},
            {"num_self_attn_layers", std::to_string(num_self_attn_layers)},
            {"embed_dim", std::to_string(embed_dim)},
            {"voxel_feature_dim", std::to_string(voxel_feature_dim)},
            {"rotation_bin_deg", format_double(rotation_bin_deg)},
            {"num_lang_tokens", std::to_string(num_lang_tokens)},
            {"lang_feature_dim", std::to_string(lang_feature_dim)},
            {"num_attention_heads", std::to_string(num_attention_heads)},
            {"num_cross_heads", std::to_string(num_cross_heads)},
            {"cross_head_dim", std::to_string(cross_head_dim)},
            {"ff_mult", std::to_string(ff_mult)},
            {"init_seed", std::to_string(init_seed)},
            {"lang_seed", std::to_string(lang_seed)}};
  }

  /// Applies known keys; returns the keys it did not recognize.
  std::vector<std::string> apply(const KeyValues& kv) {
    std::vector<std::string> unknown;
    for (const auto& [k, v] : kv) {
      if (!set(k, v)) unknown.push_back(k);
    }
    return unknown;
  }

  bool set(const std::string& key, const std::string& value) {
    try {
      if (key == "grid_size") grid_size = std::stoi(value);
      else if (key == "patch_size") patch_size = std::stoi(value);
      else if (key == "num_latents") num_latents = std::stoi(value);
      else if (key == "latent_dim") latent_dim = std::stoi(value);
      else if (key == "num_self_attn_layers") num_self_attn_layers = std::stoi(value);
      else if (key == "embed_dim") embed_dim = std::stoi(value);
      else if (key == "voxel_feature_dim") voxel_feature_dim = std::stoi(value);
      else if (key == "rotation_bin_deg") rotation_bin_deg = std::stod(value);
      else if (key == "num_lang_tokens") num_lang_tokens = std::stoi(value);
      else if (key == "lang_feature_dim") lang_feature_dim = std::stoi(value);
      else if (key == "num_attention_heads") num_attention_heads = std::stoi(value);
      else if (key == "num_cross_heads") num_cross_heads = std::stoi(value);
      else if (key == "cross_head_dim") cross_head_dim = std::stoi(value);
      else if (key == "ff_mult") ff_mult = std::stoi(value);
      else if (key == "init_seed") init_seed = std::stoull(value);
      else if (key == "lang_seed") lang_seed = std::stoull(value);
      else return false;
    } catch (const std::logic_error&) {
      throw InvalidInput("policy config: bad value '" + value + "' for " + key);
    }
    return true;
  }

  friend bool operator==(const PolicyConfig&, const PolicyConfig&) = default;

  static std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
  }
};

}  // namespace peract

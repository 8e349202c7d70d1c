#pragma once

#include <cstddef>
#include <string>

#include <json.hpp>

namespace fastdad::density {

enum class SizePreset { Small, Large };

struct ModelConfig {
  std::size_t n_layers = 4;
  std::size_t n_heads = 8;
  std::size_t d_hidden = 32;
  std::size_t ffn_multiplier = 4;  // feedforward width = ffn_multiplier * d_hidden
  std::size_t n_components = 100;  // K
  double dropout = 0.1;
  double learning_rate = 3e-4;
  double weight_decay = 1e-6;
  double grad_clip_norm = 5.0;
  std::size_t batch_size = 16;
  SizePreset size_preset = SizePreset::Small;
  std::size_t small_large_threshold = 15000;

  static ModelConfig small();
  static ModelConfig large();
  // Small below `threshold` training rows, Large otherwise.
  static ModelConfig for_rows(std::size_t n_rows, std::size_t threshold = 15000);

  std::size_t d_ffn() const { return ffn_multiplier * d_hidden; }
  std::size_t head_dim() const { return d_hidden / n_heads; }

  // Throws std::invalid_argument on a broken invariant.
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

nlohmann::json to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& j);
// Applies the keys present in `overrides` on top of `base`.
ModelConfig apply_overrides(ModelConfig base, const nlohmann::json& overrides);

}  // namespace fastdad::density

#include "fastdad/density/config.hpp"

#include <stdexcept>

namespace fastdad::density {

ModelConfig ModelConfig::small() { return ModelConfig{}; }

ModelConfig ModelConfig::large() {
  ModelConfig c;
  c.d_hidden = 128;
  c.batch_size = 256;
  c.size_preset = SizePreset::Large;
  return c;
}

ModelConfig ModelConfig::for_rows(std::size_t n_rows, std::size_t threshold) {
  ModelConfig c = n_rows < threshold ? small() : large();
  c.small_large_threshold = threshold;
  return c;
}

void ModelConfig::validate() const {
  if (n_layers < 1) throw std::invalid_argument("n_layers must be >= 1");
  if (n_heads < 1 || d_hidden % n_heads != 0) throw std::invalid_argument("d_hidden must be divisible by n_heads");
  if (d_hidden % 2 != 0) throw std::invalid_argument("d_hidden must be even for positional encoding");
  if (ffn_multiplier < 1) throw std::invalid_argument("ffn_multiplier must be >= 1");
  if (n_components < 1) throw std::invalid_argument("K must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("dropout must lie in [0, 1)");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
  if (!(weight_decay >= 0.0)) throw std::invalid_argument("weight_decay must be non-negative");
  if (!(grad_clip_norm > 0.0)) throw std::invalid_argument("grad_clip_norm must be positive");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
}

nlohmann::json to_json(const ModelConfig& c) {
  return {{"n_layers", c.n_layers},
          {"n_heads", c.n_heads},
          {"d_hidden", c.d_hidden},
          {"ffn_multiplier", c.ffn_multiplier},
          {"n_components", c.n_components},
          {"dropout", c.dropout},
          {"learning_rate", c.learning_rate},
          {"weight_decay", c.weight_decay},
          {"grad_clip_norm", c.grad_clip_norm},
          {"batch_size", c.batch_size},
          {"size_preset", c.size_preset == SizePreset::Small ? "small" : "large"},
          {"small_large_threshold", c.small_large_threshold}};
}

ModelConfig apply_overrides(ModelConfig c, const nlohmann::json& j) {
  if (j.is_null()) return c;
  if (j.contains("size_preset")) {
    const auto preset = j.at("size_preset").get<std::string>();
    if (preset != "small" && preset != "large") throw std::invalid_argument("size_preset must be small or large");
    const ModelConfig base = preset == "small" ? ModelConfig::small() : ModelConfig::large();
    c.d_hidden = base.d_hidden;
    c.batch_size = base.batch_size;
    c.size_preset = base.size_preset;
  }
  auto take = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  take("n_layers", c.n_layers);
  take("n_heads", c.n_heads);
  take("d_hidden", c.d_hidden);
  take("ffn_multiplier", c.ffn_multiplier);
  take("n_components", c.n_components);
  take("dropout", c.dropout);
  take("learning_rate", c.learning_rate);
  take("weight_decay", c.weight_decay);
  take("grad_clip_norm", c.grad_clip_norm);
  take("batch_size", c.batch_size);
  take("small_large_threshold", c.small_large_threshold);
  c.validate();
  return c;
}

ModelConfig model_config_from_json(const nlohmann::json& j) { return apply_overrides(ModelConfig{}, j); }

}  // namespace fastdad::density

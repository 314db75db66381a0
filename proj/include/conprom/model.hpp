#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>

#include "conprom/autodiff.hpp"
#include "conprom/config.hpp"
#include "conprom/encoder.hpp"

namespace conprom {

using ParamMap = std::map<std::string, ad::Tensor>;

enum class CalSpace { Merged, Original };

struct ModelConfig {
  std::size_t encoder_dim = 32;
  bool encoder_shared = true;
  std::size_t merge_hidden = 0;  // 0 means encoder_dim

  bool merge_enabled = true;
  double merge_lambda = 0.5;
  double merge_alpha = 0.5;

  bool cal_enabled = true;
  double cal_margin = 1.0;
  CalSpace cal_space = CalSpace::Merged;

  std::size_t hidden() const { return merge_hidden ? merge_hidden : encoder_dim; }

  static ModelConfig from_config(const Config& cfg);
  void to_config(Config& cfg) const;
};

// Parameter names inside a Model's ParamMap.
inline constexpr const char* kParamEmbedding = "encoder.embedding";
inline constexpr const char* kParamEmbeddingSlot = "encoder.embedding_slot";
inline constexpr const char* kParamMergeW = "merge.W";
inline constexpr const char* kParamMergeU = "merge.U";
inline constexpr const char* kParamMergeV = "merge.V";

struct Model {
  ModelConfig config;
  TokenVocab vocab;
  ParamMap params;
};

// Fresh model with uniform [-0.1, 0.1] parameter init.
Model init_model(const ModelConfig& config, const TokenVocab& vocab, Rng& rng);

// Parameter nodes for one episode graph.
struct ParamNodes {
  ad::NodeId embedding_intent = -1;
  ad::NodeId embedding_slot = -1;  // == embedding_intent in shared mode
  ad::NodeId merge_w = -1;
  ad::NodeId merge_u = -1;
  ad::NodeId merge_v = -1;
};
ParamNodes make_param_nodes(ad::Graph& graph, const ModelConfig& config, const ParamMap& params);

// Optimizer / stream state stored alongside the model in a checkpoint.
struct TrainerState {
  std::int64_t step = 0;
  ParamMap adam_m;
  ParamMap adam_v;
  std::string rng_state;
};

// Checkpoint file: one JSON header line (format, dim, vocab, config snapshot,
// tensor manifest) followed by the raw little-endian float64 payload.
void save_checkpoint(const std::string& path, const Model& model,
                     const TrainerState* state = nullptr);

struct LoadedCheckpoint {
  Model model;
  std::optional<TrainerState> state;
};
LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace conprom

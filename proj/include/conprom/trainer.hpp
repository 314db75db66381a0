#pragma once

#include <optional>
#include <string>
#include <vector>

#include "conprom/model.hpp"
#include "conprom/pipeline.hpp"

namespace conprom {

struct TrainConfig {
  std::size_t episodes_per_batch = 4;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t max_steps = 500;
  std::uint64_t seed = 0;

  // Online episode sampling (used when no pre-built episodes are supplied).
  int shot_count = 1;
  int query_size = 16;

  // Dev evaluation for best-checkpoint selection. 0 disables it.
  std::size_t eval_interval = 100;
  int dev_episodes = 10;
  int dev_query_size = 16;

  std::size_t finetune_steps = 50;
  double finetune_lr = 1e-3;

  static TrainConfig from_config(const Config& cfg);
  void to_config(Config& cfg) const;
};

struct LossBreakdown {
  double l_all = 0.0;
  double ce_intent = 0.0;
  double ce_slot = 0.0;
  double l_intra = 0.0;
  double l_inter = 0.0;
};

// Forward-only evaluation of L_all with its components.
LossBreakdown episode_loss(const Model& model, const Episode& episode);

struct LossLogRow {
  std::size_t step = 0;
  LossBreakdown loss;
};

std::string loss_log_csv(const std::vector<LossLogRow>& rows);

class AdamOptimizer {
 public:
  AdamOptimizer(const ParamMap& params, double lr, double beta1, double beta2, double eps);
  // Restores moments from a checkpoint.
  AdamOptimizer(ParamMap m, ParamMap v, std::int64_t step, double lr, double beta1, double beta2,
                double eps);

  void step(ParamMap& params, const ParamMap& grads);

  std::int64_t step_count() const { return t_; }
  const ParamMap& moments_m() const { return m_; }
  const ParamMap& moments_v() const { return v_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
  ParamMap m_, v_;
};

// Episodic trainer. Episodes come either from a pre-built list streamed in a
// seed-derived order, or sampled online from the train split.
class Trainer {
 public:
  Trainer(const Dataset& data, std::optional<EpisodeList> episodes, const ModelConfig& model_cfg,
          const TrainConfig& train_cfg);
  // Resume from a checkpointed model + optimizer state.
  Trainer(const Dataset& data, std::optional<EpisodeList> episodes, Model model,
          const TrainerState& state, const TrainConfig& train_cfg);

  LossBreakdown step();
  std::size_t step_count() const { return static_cast<std::size_t>(optimizer_.step_count()); }

  const Model& model() const { return model_; }
  Model& model() { return model_; }
  TrainerState state() const;

 private:
  Episode next_episode();

  const Dataset& data_;
  std::optional<EpisodeList> episodes_;
  TrainConfig config_;
  Model model_;
  AdamOptimizer optimizer_;
  Rng rng_;
  std::size_t episode_cursor_ = 0;
};

struct TrainResult {
  Model best;
  Model final_model;
  TrainerState final_state;
  std::vector<LossLogRow> log;
  double best_dev_joint = -1.0;
  std::size_t best_step = 0;
};

TrainResult train(const Dataset& data, std::optional<EpisodeList> episodes,
                  const ModelConfig& model_cfg, const TrainConfig& train_cfg);

struct FinetuneOptions {
  std::size_t steps = 50;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
};

// Continues optimizing L_all on the target support set, the support serving
// as both support and query. The input model is left untouched.
Model finetune(const Model& model, const SupportSet& support, const FinetuneOptions& options);

// Gradient check of the full objective (merging + CAL enabled) on a small
// 2-intent / 3-tag synthetic episode.
ad::GradCheckResult full_objective_grad_check(std::uint64_t seed, double eps);

}  // namespace conprom

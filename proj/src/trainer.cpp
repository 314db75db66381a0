#include "conprom/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "conprom/error.hpp"
#include "conprom/eval.hpp"

namespace conprom {

TrainConfig TrainConfig::from_config(const Config& cfg) {
  TrainConfig tc;
  tc.episodes_per_batch = static_cast<std::size_t>(cfg.get_int("train.batch_episodes", 4));
  tc.learning_rate = cfg.get_double("train.learning_rate", 1e-3);
  tc.adam_beta1 = cfg.get_double("adam.beta1", 0.9);
  tc.adam_beta2 = cfg.get_double("adam.beta2", 0.999);
  tc.adam_eps = cfg.get_double("adam.eps", 1e-8);
  tc.max_steps = static_cast<std::size_t>(cfg.get_int("train.max_steps", 500));
  tc.seed = cfg.get_uint("train.seed", 0);
  tc.shot_count = static_cast<int>(cfg.get_int("train.k", 1));
  tc.query_size = static_cast<int>(cfg.get_int("train.query_size", 16));
  tc.eval_interval = static_cast<std::size_t>(cfg.get_int("train.eval_interval", 100));
  tc.dev_episodes = static_cast<int>(cfg.get_int("train.dev_episodes", 10));
  tc.dev_query_size = static_cast<int>(cfg.get_int("train.dev_query_size", 16));
  tc.finetune_steps = static_cast<std::size_t>(cfg.get_int("finetune.steps", 50));
  tc.finetune_lr = cfg.get_double("finetune.lr", 1e-3);
  if (tc.episodes_per_batch == 0 || tc.learning_rate <= 0.0 || tc.shot_count <= 0 ||
      tc.query_size <= 0) {
    raise(ErrorKind::Validation, "train config: rates, batch size, K and query size must be positive");
  }
  return tc;
}

void TrainConfig::to_config(Config& cfg) const {
  cfg.set_int("train.batch_episodes", static_cast<std::int64_t>(episodes_per_batch));
  cfg.set_double("train.learning_rate", learning_rate);
  cfg.set_double("adam.beta1", adam_beta1);
  cfg.set_double("adam.beta2", adam_beta2);
  cfg.set_double("adam.eps", adam_eps);
  cfg.set_int("train.max_steps", static_cast<std::int64_t>(max_steps));
  cfg.set_uint("train.seed", seed);
  cfg.set_int("train.k", shot_count);
  cfg.set_int("train.query_size", query_size);
  cfg.set_int("train.eval_interval", static_cast<std::int64_t>(eval_interval));
  cfg.set_int("train.dev_episodes", dev_episodes);
  cfg.set_int("train.dev_query_size", dev_query_size);
  cfg.set_int("finetune.steps", static_cast<std::int64_t>(finetune_steps));
  cfg.set_double("finetune.lr", finetune_lr);
}

namespace {

LossBreakdown read_breakdown(const ad::Graph& graph, const EpisodeForward& fwd) {
  LossBreakdown b;
  b.l_all = graph.value(fwd.l_all).values[0];
  b.ce_intent = graph.value(fwd.ce_intent).values[0];
  b.ce_slot = graph.value(fwd.ce_slot).values[0];
  b.l_intra = graph.value(fwd.l_intra).values[0];
  b.l_inter = graph.value(fwd.l_inter).values[0];
  return b;
}

std::map<std::string, ad::NodeId> named_param_nodes(const ModelConfig& config,
                                                    const ParamNodes& nodes) {
  std::map<std::string, ad::NodeId> named;
  named[kParamEmbedding] = nodes.embedding_intent;
  if (!config.encoder_shared) named[kParamEmbeddingSlot] = nodes.embedding_slot;
  named[kParamMergeW] = nodes.merge_w;
  named[kParamMergeU] = nodes.merge_u;
  named[kParamMergeV] = nodes.merge_v;
  return named;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

LossBreakdown episode_loss(const Model& model, const Episode& episode) {
  ad::Graph graph;
  ParamNodes nodes = make_param_nodes(graph, model.config, model.params);
  EpisodeForward fwd = build_episode_forward(graph, model.config, model.vocab, nodes, episode);
  return read_breakdown(graph, fwd);
}

std::string loss_log_csv(const std::vector<LossLogRow>& rows) {
  std::ostringstream out;
  out << "step,L_all,CE_intent,CE_slot,L_intra,L_inter\n";
  for (const auto& row : rows) {
    out << row.step << "," << format_double(row.loss.l_all) << ","
        << format_double(row.loss.ce_intent) << "," << format_double(row.loss.ce_slot) << ","
        << format_double(row.loss.l_intra) << "," << format_double(row.loss.l_inter) << "\n";
  }
  return out.str();
}

AdamOptimizer::AdamOptimizer(const ParamMap& params, double lr, double beta1, double beta2,
                             double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& [name, t] : params) {
    m_[name] = ad::Tensor::zeros(t.shape);
    v_[name] = ad::Tensor::zeros(t.shape);
  }
}

AdamOptimizer::AdamOptimizer(ParamMap m, ParamMap v, std::int64_t step, double lr, double beta1,
                             double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), t_(step), m_(std::move(m)),
      v_(std::move(v)) {}

void AdamOptimizer::step(ParamMap& params, const ParamMap& grads) {
  ++t_;
  double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (auto& [name, param] : params) {
    const ad::Tensor& g = grads.at(name);
    ad::Tensor& m = m_.at(name);
    ad::Tensor& v = v_.at(name);
    for (std::size_t i = 0; i < param.values.size(); ++i) {
      double gi = g.values[i];
      m.values[i] = beta1_ * m.values[i] + (1.0 - beta1_) * gi;
      v.values[i] = beta2_ * v.values[i] + (1.0 - beta2_) * gi * gi;
      double m_hat = m.values[i] / bc1;
      double v_hat = v.values[i] / bc2;
      param.values[i] -= lr_ * m_hat / (std::sqrt(v_hat) + eps_);
    }
  }
}

Trainer::Trainer(const Dataset& data, std::optional<EpisodeList> episodes,
                 const ModelConfig& model_cfg, const TrainConfig& train_cfg)
    : data_(data),
      episodes_(std::move(episodes)),
      config_(train_cfg),
      model_([&] {
        Rng init_rng(train_cfg.seed);
        return init_model(model_cfg, TokenVocab::from_dataset(data), init_rng);
      }()),
      optimizer_(model_.params, train_cfg.learning_rate, train_cfg.adam_beta1,
                 train_cfg.adam_beta2, train_cfg.adam_eps),
      rng_(train_cfg.seed + 1) {
  if (!episodes_ && data_.train.empty()) {
    raise(ErrorKind::InvalidArgument, "trainer: train split is empty and no episodes supplied");
  }
  if (episodes_ && episodes_->empty()) {
    raise(ErrorKind::InvalidArgument, "trainer: supplied episode list is empty");
  }
}

Trainer::Trainer(const Dataset& data, std::optional<EpisodeList> episodes, Model model,
                 const TrainerState& state, const TrainConfig& train_cfg)
    : data_(data),
      episodes_(std::move(episodes)),
      config_(train_cfg),
      model_(std::move(model)),
      optimizer_(state.adam_m, state.adam_v, state.step, train_cfg.learning_rate,
                 train_cfg.adam_beta1, train_cfg.adam_beta2, train_cfg.adam_eps),
      rng_(train_cfg.seed + 1) {
  if (!state.rng_state.empty()) rng_.restore_state(state.rng_state);
  episode_cursor_ = static_cast<std::size_t>(state.step) * config_.episodes_per_batch;
}

TrainerState Trainer::state() const {
  TrainerState s;
  s.step = optimizer_.step_count();
  s.adam_m = optimizer_.moments_m();
  s.adam_v = optimizer_.moments_v();
  s.rng_state = rng_.save_state();
  return s;
}

Episode Trainer::next_episode() {
  if (episodes_) {
    std::size_t n = episodes_->size();
    std::size_t pos = episode_cursor_++;
    std::size_t epoch = pos / n;
    // Stream order is a seed-derived permutation per pass, reconstructible
    // from the step count alone.
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    Rng order_rng(config_.seed ^ (0x9E3779B97F4A7C15ull * (epoch + 1)));
    order_rng.shuffle(perm);
    return (*episodes_)[perm[pos % n]];
  }
  const auto& domains = data_.train;
  const Domain& domain = domains[static_cast<std::size_t>(rng_.below(domains.size()))];
  return sample_episode(domain, config_.shot_count, config_.query_size, rng_);
}

LossBreakdown Trainer::step() {
  ParamMap grads;
  for (const auto& [name, t] : model_.params) grads[name] = ad::Tensor::zeros(t.shape);
  LossBreakdown mean;
  double inv = 1.0 / static_cast<double>(config_.episodes_per_batch);

  for (std::size_t b = 0; b < config_.episodes_per_batch; ++b) {
    Episode episode = next_episode();
    ad::Graph graph;
    ParamNodes nodes = make_param_nodes(graph, model_.config, model_.params);
    EpisodeForward fwd = build_episode_forward(graph, model_.config, model_.vocab, nodes, episode);
    graph.backward(fwd.l_all);

    LossBreakdown b_loss = read_breakdown(graph, fwd);
    mean.l_all += inv * b_loss.l_all;
    mean.ce_intent += inv * b_loss.ce_intent;
    mean.ce_slot += inv * b_loss.ce_slot;
    mean.l_intra += inv * b_loss.l_intra;
    mean.l_inter += inv * b_loss.l_inter;

    for (const auto& [name, node] : named_param_nodes(model_.config, nodes)) {
      const ad::Tensor& g = graph.grad(node);
      ad::Tensor& acc = grads.at(name);
      for (std::size_t i = 0; i < acc.values.size(); ++i) acc.values[i] += inv * g.values[i];
    }
  }

  if (!std::isfinite(mean.l_all)) {
    std::ostringstream msg;
    msg << "non-finite loss at step " << (optimizer_.step_count() + 1)
        << ": L_all=" << mean.l_all << " CE_intent=" << mean.ce_intent
        << " CE_slot=" << mean.ce_slot << " L_intra=" << mean.l_intra
        << " L_inter=" << mean.l_inter;
    raise(ErrorKind::Runtime, msg.str());
  }

  optimizer_.step(model_.params, grads);
  return mean;
}

TrainResult train(const Dataset& data, std::optional<EpisodeList> episodes,
                  const ModelConfig& model_cfg, const TrainConfig& train_cfg) {
  Trainer trainer(data, std::move(episodes), model_cfg, train_cfg);

  EpisodeList dev_episodes;
  if (train_cfg.eval_interval > 0 && !data.dev.empty()) {
    dev_episodes = build_episodes(data.dev, train_cfg.shot_count, train_cfg.dev_query_size,
                                  train_cfg.dev_episodes, train_cfg.seed + 17);
  }

  TrainResult result;
  for (std::size_t s = 1; s <= train_cfg.max_steps; ++s) {
    LossBreakdown loss = trainer.step();
    result.log.push_back({s, loss});

    bool last = s == train_cfg.max_steps;
    if (!dev_episodes.empty() && train_cfg.eval_interval > 0 &&
        (s % train_cfg.eval_interval == 0 || last)) {
      std::vector<MetricsReport> reports;
      for (const auto& ep : dev_episodes) {
        reports.push_back(evaluate_episode(trainer.model(), ep, EvalOptions{}));
      }
      double joint = mean_report(reports).joint_accuracy;
      if (joint > result.best_dev_joint) {
        result.best_dev_joint = joint;
        result.best_step = s;
        result.best = trainer.model();
      }
    }
  }
  result.final_model = trainer.model();
  result.final_state = trainer.state();
  if (result.best_dev_joint < 0.0) {
    result.best = result.final_model;
    result.best_step = train_cfg.max_steps;
  }
  return result;
}

Model finetune(const Model& model, const SupportSet& support, const FinetuneOptions& options) {
  if (support.frames.empty()) {
    raise(ErrorKind::InvalidArgument, "finetune: empty support set");
  }
  Model adapted = model;
  // The support set serves as both support and query.
  Episode episode;
  episode.domain_name = "finetune";
  episode.support = support;
  episode.query = support.frames;

  AdamOptimizer optimizer(adapted.params, options.learning_rate, options.adam_beta1,
                          options.adam_beta2, options.adam_eps);
  for (std::size_t s = 0; s < options.steps; ++s) {
    ad::Graph graph;
    ParamNodes nodes = make_param_nodes(graph, adapted.config, adapted.params);
    EpisodeForward fwd = build_episode_forward(graph, adapted.config, adapted.vocab, nodes,
                                               episode);
    graph.backward(fwd.l_all);
    if (!std::isfinite(graph.value(fwd.l_all).values[0])) {
      raise(ErrorKind::Runtime, "finetune: non-finite loss at step " + std::to_string(s + 1));
    }
    ParamMap grads;
    for (const auto& [name, node] : named_param_nodes(adapted.config, nodes)) {
      grads[name] = graph.grad(node);
    }
    optimizer.step(adapted.params, grads);
  }
  return adapted;
}

ad::GradCheckResult full_objective_grad_check(std::uint64_t seed, double eps) {
  // 2 intents, 3 tags (B-x, B-y, O) on a six-token vocabulary.
  Episode episode;
  episode.domain_name = "gradcheck";
  episode.support.shot_count = 1;
  episode.support.frames = {
      {{"a", "b", "c"}, "alpha", {"B-x", "O", "O"}},
      {{"d", "e", "f"}, "beta", {"B-y", "O", "O"}},
      {{"c", "a", "e"}, "alpha", {"O", "B-x", "O"}},
  };
  episode.query = {
      {{"a", "c", "e"}, "alpha", {"B-x", "O", "O"}},
      {{"d", "b", "f"}, "beta", {"B-y", "O", "O"}},
  };

  ModelConfig config;
  config.encoder_dim = 6;
  config.encoder_shared = true;
  config.merge_enabled = true;
  config.cal_enabled = true;
  config.cal_space = CalSpace::Merged;

  TokenVocab vocab = TokenVocab::build({"a", "b", "c", "d", "e", "f"});
  Rng rng(seed);
  Model model = init_model(config, vocab, rng);
  // Probe at O(1) parameter scale: near zero, tanh is almost linear and the
  // additive-attention scores become shift-like, leaving W with gradients at
  // the float round-off floor where central differences cannot resolve them.
  for (auto& [name, tensor] : model.params) {
    for (double& v : tensor.values) v *= 7.0;
  }

  ad::LossBuilder builder = [&](ad::Graph& graph,
                                const std::map<std::string, ad::NodeId>& ids) -> ad::NodeId {
    ParamNodes nodes;
    nodes.embedding_intent = ids.at(kParamEmbedding);
    nodes.embedding_slot = nodes.embedding_intent;
    nodes.merge_w = ids.at(kParamMergeW);
    nodes.merge_u = ids.at(kParamMergeU);
    nodes.merge_v = ids.at(kParamMergeV);
    EpisodeForward fwd = build_episode_forward(graph, config, vocab, nodes, episode);
    return fwd.l_all;
  };
  return ad::grad_check(builder, model.params, eps);
}

}  // namespace conprom

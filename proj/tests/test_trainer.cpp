#include <doctest.h>

#include <cmath>
#include <limits>

#include "conprom/error.hpp"
#include "conprom/eval.hpp"
#include "conprom/synthgen.hpp"
#include "conprom/trainer.hpp"

using namespace conprom;
using ad::Tensor;

namespace {

Dataset tiny_dataset(std::uint64_t seed, int domains = 4, int frames = 24) {
  SynthSpec spec;
  spec.train_domains = domains;
  spec.dev_domains = 2;
  spec.test_domains = 2;
  spec.intents_per_domain = 2;
  spec.slots_per_domain = 4;
  spec.frames_per_domain = frames;
  spec.vocab_size = 120;
  spec.seed = seed;
  return generate(spec);
}

Episode zero_geometry_episode() {
  // One frame per intent; tokens chosen so prototypes sit at hand-picked
  // points (see the embedding below).
  Episode ep;
  ep.domain_name = "geo";
  ep.support.frames = {
      {{"ta", "fa"}, "A", {"B-x", "O"}},
      {{"tb", "fb"}, "B", {"B-y", "O"}},
  };
  ep.query = ep.support.frames;
  return ep;
}

Model zero_geometry_model(bool cal_enabled) {
  ModelConfig config;
  config.encoder_dim = 2;
  config.merge_enabled = false;
  config.cal_enabled = cal_enabled;
  config.cal_margin = 1.0;

  TokenVocab vocab = TokenVocab::build({"ta", "tb", "fa", "fb"});
  Model model;
  model.config = config;
  model.vocab = vocab;
  Tensor emb = Tensor::zeros({vocab.size(), 2});
  auto set = [&](const std::string& tok, double x, double y) {
    emb.at(vocab.lookup(tok), 0) = x;
    emb.at(vocab.lookup(tok), 1) = y;
  };
  // Fillers coincide with their frame's head token, so each intent prototype
  // (the sentence mean) lands exactly on its related slot prototype: intent A
  // and B-x at (0,0), intent B and B-y at (8,0), everything else >= m apart.
  set("ta", 0, 0);
  set("fa", 0, 0);
  set("tb", 8, 0);
  set("fb", 8, 0);
  model.params[kParamEmbedding] = emb;
  model.params[kParamMergeW] = Tensor::zeros({2, 2});
  model.params[kParamMergeU] = Tensor::zeros({2, 2});
  model.params[kParamMergeV] = Tensor::zeros({2});
  return model;
}

}  // namespace

TEST_CASE("L_all under uniform predictions is ln N_I + ln N_T") {
  ModelConfig config;
  config.encoder_dim = 3;
  config.merge_enabled = false;
  config.cal_enabled = false;

  TokenVocab vocab = TokenVocab::build({"w1", "w2", "w3"});
  Model model;
  model.config = config;
  model.vocab = vocab;
  model.params[kParamEmbedding] = Tensor::zeros({vocab.size(), 3});  // all-zero: uniform output
  model.params[kParamMergeW] = Tensor::zeros({3, 3});
  model.params[kParamMergeU] = Tensor::zeros({3, 3});
  model.params[kParamMergeV] = Tensor::zeros({3});

  Episode ep;
  ep.domain_name = "uniform";
  ep.support.frames = {
      {{"w1", "w2"}, "A", {"B-x", "O"}},
      {{"w2", "w3"}, "B", {"B-y", "O"}},
  };
  ep.query = ep.support.frames;

  auto loss = episode_loss(model, ep);
  CHECK(loss.ce_intent == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(loss.ce_slot == doctest::Approx(std::log(3.0)).epsilon(1e-12));
  CHECK(loss.l_intra == 0.0);
  CHECK(loss.l_inter == 0.0);
  CHECK(loss.l_all == doctest::Approx(std::log(2.0) + std::log(3.0)).epsilon(1e-12));
}

TEST_CASE("CAL enabled at the zero geometry leaves only the CE terms") {
  Episode ep = zero_geometry_episode();
  auto with_cal = episode_loss(zero_geometry_model(true), ep);
  auto without = episode_loss(zero_geometry_model(false), ep);
  CHECK(with_cal.l_intra == 0.0);
  CHECK(with_cal.l_inter == 0.0);
  CHECK(with_cal.l_all == without.l_all);
}

TEST_CASE("episode_loss is pure: re-evaluation reproduces identical values") {
  Dataset ds = tiny_dataset(42);
  Rng rng(5);
  Episode ep = sample_episode(ds.train[0], 1, 4, rng);
  Rng init(0);
  ModelConfig config;
  config.encoder_dim = 8;
  Model model = init_model(config, TokenVocab::from_dataset(ds), init);
  auto a = episode_loss(model, ep);
  auto b = episode_loss(model, ep);
  CHECK(a.l_all == b.l_all);
  CHECK(a.ce_intent == b.ce_intent);
  CHECK(a.ce_slot == b.ce_slot);
  CHECK(a.l_intra == b.l_intra);
  CHECK(a.l_inter == b.l_inter);
}

TEST_CASE("ablation switches: cal off means L_all is exactly the CE sum") {
  Dataset ds = tiny_dataset(7);
  Rng rng(2);
  Episode ep = sample_episode(ds.train[1], 1, 4, rng);
  Rng init(1);
  ModelConfig config;
  config.encoder_dim = 8;
  config.cal_enabled = false;
  Model model = init_model(config, TokenVocab::from_dataset(ds), init);
  auto loss = episode_loss(model, ep);
  CHECK(loss.l_all == loss.ce_intent + loss.ce_slot);
  CHECK(loss.l_intra == 0.0);
  CHECK(loss.l_inter == 0.0);
}

TEST_CASE("adam with zero gradients leaves parameters unchanged") {
  ParamMap params{{"p", Tensor::vector({1.0, -2.0, 3.0})}};
  ParamMap grads{{"p", Tensor::zeros({3})}};
  AdamOptimizer opt(params, 0.1, 0.9, 0.999, 1e-8);
  opt.step(params, grads);
  CHECK(params.at("p").values == std::vector<double>{1.0, -2.0, 3.0});
}

TEST_CASE("adam moves parameters against the gradient") {
  ParamMap params{{"p", Tensor::vector({1.0})}};
  ParamMap grads{{"p", Tensor::vector({0.5})}};
  AdamOptimizer opt(params, 0.1, 0.9, 0.999, 1e-8);
  opt.step(params, grads);
  CHECK(params.at("p").values[0] < 1.0);
}

TEST_CASE("training is deterministic: identical seeds give identical logs") {
  Dataset ds = tiny_dataset(11);
  ModelConfig mc;
  mc.encoder_dim = 8;
  TrainConfig tc;
  tc.max_steps = 12;
  tc.eval_interval = 6;
  tc.dev_episodes = 2;
  tc.episodes_per_batch = 2;
  tc.query_size = 4;
  tc.seed = 3;

  auto r1 = train(ds, std::nullopt, mc, tc);
  auto r2 = train(ds, std::nullopt, mc, tc);
  CHECK(loss_log_csv(r1.log) == loss_log_csv(r2.log));
  CHECK(r1.final_model.params.at(kParamEmbedding).values ==
        r2.final_model.params.at(kParamEmbedding).values);
}

TEST_CASE("training on a separable toy task descends") {
  Dataset ds = tiny_dataset(23, 6, 30);
  ModelConfig mc;
  mc.encoder_dim = 16;
  TrainConfig tc;
  tc.max_steps = 250;
  tc.eval_interval = 0;  // no dev eval needed here
  tc.episodes_per_batch = 2;
  tc.query_size = 8;
  tc.seed = 0;

  auto result = train(ds, std::nullopt, mc, tc);
  CHECK(result.log.back().loss.l_all < result.log.front().loss.l_all);
}

TEST_CASE("pre-built episode streaming is deterministic and covers the list") {
  Dataset ds = tiny_dataset(31);
  EpisodeList episodes = build_episodes(ds.train, 1, 4, 6, 9);
  ModelConfig mc;
  mc.encoder_dim = 8;
  TrainConfig tc;
  tc.max_steps = 9;
  tc.eval_interval = 0;
  tc.episodes_per_batch = 2;
  tc.seed = 1;
  auto r1 = train(ds, episodes, mc, tc);
  auto r2 = train(ds, episodes, mc, tc);
  CHECK(loss_log_csv(r1.log) == loss_log_csv(r2.log));
}

TEST_CASE("checkpoint round-trip: save, load and one step match exactly") {
  Dataset ds = tiny_dataset(13);
  ModelConfig mc;
  mc.encoder_dim = 8;
  TrainConfig tc;
  tc.max_steps = 40;
  tc.eval_interval = 0;
  tc.episodes_per_batch = 2;
  tc.query_size = 4;
  tc.seed = 5;

  Trainer trainer(ds, std::nullopt, mc, tc);
  for (int s = 0; s < 5; ++s) trainer.step();

  std::string path = "/tmp/conprom_test_roundtrip.ckpt";
  TrainerState state = trainer.state();
  save_checkpoint(path, trainer.model(), &state);

  trainer.step();  // continue without reloading

  auto loaded = load_checkpoint(path);
  REQUIRE(loaded.state.has_value());
  Trainer resumed(ds, std::nullopt, loaded.model, *loaded.state, tc);
  resumed.step();

  for (const auto& [name, tensor] : trainer.model().params) {
    CHECK(tensor.values == resumed.model().params.at(name).values);
  }
}

TEST_CASE("checkpoint preserves model-only state too") {
  Dataset ds = tiny_dataset(17);
  Rng init(2);
  ModelConfig mc;
  mc.encoder_dim = 8;
  Model model = init_model(mc, TokenVocab::from_dataset(ds), init);
  std::string path = "/tmp/conprom_test_model.ckpt";
  save_checkpoint(path, model);
  auto loaded = load_checkpoint(path);
  CHECK(!loaded.state.has_value());
  CHECK(loaded.model.vocab.tokens == model.vocab.tokens);
  for (const auto& [name, tensor] : model.params) {
    CHECK(tensor.values == loaded.model.params.at(name).values);
  }
  CHECK(loaded.model.config.encoder_dim == mc.encoder_dim);
}

TEST_CASE("non-finite loss aborts with the step index and breakdown") {
  Dataset ds = tiny_dataset(19);
  ModelConfig mc;
  mc.encoder_dim = 4;
  TrainConfig tc;
  tc.max_steps = 1;
  tc.episodes_per_batch = 1;
  tc.query_size = 4;
  tc.seed = 0;

  Rng init(0);
  Model poisoned = init_model(mc, TokenVocab::from_dataset(ds), init);
  for (double& v : poisoned.params.at(kParamEmbedding).values) {
    v = std::numeric_limits<double>::quiet_NaN();
  }
  TrainerState state;
  state.step = 0;
  for (const auto& [name, t] : poisoned.params) {
    state.adam_m[name] = Tensor::zeros(t.shape);
    state.adam_v[name] = Tensor::zeros(t.shape);
  }
  Trainer trainer(ds, std::nullopt, poisoned, state, tc);
  CHECK_THROWS_WITH_AS(trainer.step(), doctest::Contains("non-finite loss at step"), Error);
}

TEST_CASE("finetune: zero steps is the identity, nonzero steps adapt") {
  Dataset ds = tiny_dataset(29);
  Rng init(3);
  ModelConfig mc;
  mc.encoder_dim = 8;
  Model model = init_model(mc, TokenVocab::from_dataset(ds), init);

  Rng rng(1);
  SupportSet support = build_support_set(ds.test[0], 1, rng);

  FinetuneOptions none;
  none.steps = 0;
  Model same = finetune(model, support, none);
  CHECK(same.params.at(kParamEmbedding).values == model.params.at(kParamEmbedding).values);

  FinetuneOptions some;
  some.steps = 20;
  some.learning_rate = 1e-2;
  Model adapted = finetune(model, support, some);
  CHECK(adapted.params.at(kParamEmbedding).values != model.params.at(kParamEmbedding).values);
  // the original model is untouched
  CHECK(same.params.at(kParamEmbedding).values == model.params.at(kParamEmbedding).values);

  // support loss after finetuning does not exceed the starting loss
  Episode self;
  self.support = support;
  self.query = support.frames;
  CHECK(episode_loss(adapted, self).l_all <= episode_loss(model, self).l_all);
}

TEST_CASE("full objective gradient check passes at eps 1e-4") {
  auto result = full_objective_grad_check(0, 1e-4);
  CHECK(result.max_rel_err < 1e-4);
}

TEST_CASE("separate-encoder mode keeps two embedding tables and trains") {
  Dataset ds = tiny_dataset(37);
  ModelConfig mc;
  mc.encoder_dim = 6;
  mc.encoder_shared = false;
  TrainConfig tc;
  tc.max_steps = 5;
  tc.eval_interval = 0;
  tc.episodes_per_batch = 1;
  tc.query_size = 4;
  tc.seed = 2;

  Trainer trainer(ds, std::nullopt, mc, tc);
  REQUIRE(trainer.model().params.count(kParamEmbeddingSlot) == 1);
  auto before_intent = trainer.model().params.at(kParamEmbedding).values;
  auto before_slot = trainer.model().params.at(kParamEmbeddingSlot).values;
  CHECK(before_intent != before_slot);  // independent initializations
  for (int s = 0; s < 5; ++s) trainer.step();
  CHECK(trainer.model().params.at(kParamEmbedding).values != before_intent);
  CHECK(trainer.model().params.at(kParamEmbeddingSlot).values != before_slot);
}

TEST_CASE("separate-encoder gradients match finite differences") {
  Episode ep;
  ep.support.frames = {
      {{"a", "b"}, "alpha", {"B-x", "O"}},
      {{"c", "d"}, "beta", {"B-y", "O"}},
  };
  ep.query = {{{"a", "d"}, "alpha", {"B-x", "O"}}};

  ModelConfig config;
  config.encoder_dim = 4;
  config.encoder_shared = false;
  TokenVocab vocab = TokenVocab::build({"a", "b", "c", "d"});
  Rng rng(1);
  Model model = init_model(config, vocab, rng);
  for (auto& [name, tensor] : model.params) {
    for (double& v : tensor.values) v *= 7.0;  // probe where tanh is nonlinear
  }

  ad::LossBuilder builder = [&](ad::Graph& graph,
                                const std::map<std::string, ad::NodeId>& ids) -> ad::NodeId {
    ParamNodes nodes;
    nodes.embedding_intent = ids.at(kParamEmbedding);
    nodes.embedding_slot = ids.at(kParamEmbeddingSlot);
    nodes.merge_w = ids.at(kParamMergeW);
    nodes.merge_u = ids.at(kParamMergeU);
    nodes.merge_v = ids.at(kParamMergeV);
    return build_episode_forward(graph, config, vocab, nodes, ep).l_all;
  };
  CHECK(ad::grad_check(builder, model.params, 1e-4).max_rel_err < 1e-4);
}

TEST_CASE("train and model configs round-trip through flat config text") {
  TrainConfig tc;
  tc.max_steps = 123;
  tc.learning_rate = 0.00325;
  tc.seed = 77;
  Config cfg;
  tc.to_config(cfg);
  TrainConfig back = TrainConfig::from_config(Config::parse(cfg.serialize()));
  CHECK(back.max_steps == 123);
  CHECK(back.learning_rate == 0.00325);
  CHECK(back.seed == 77);

  ModelConfig mc;
  mc.encoder_dim = 24;
  mc.merge_alpha = 0.25;
  mc.cal_space = CalSpace::Original;
  Config mcfg;
  mc.to_config(mcfg);
  ModelConfig mback = ModelConfig::from_config(Config::parse(mcfg.serialize()));
  CHECK(mback.encoder_dim == 24);
  CHECK(mback.merge_alpha == 0.25);
  CHECK(mback.cal_space == CalSpace::Original);
}

#include <doctest.h>

#include "conprom/encoder.hpp"
#include "conprom/error.hpp"

using namespace conprom;
using ad::Graph;
using ad::NodeId;
using ad::Tensor;

TEST_CASE("token vocab is sorted, deduplicated and carries <UNK>") {
  TokenVocab vocab = TokenVocab::build({"zebra", "apple", "apple"});
  CHECK(vocab.tokens == std::vector<std::string>{"<UNK>", "apple", "zebra"});
  CHECK(vocab.lookup("apple") == 1);
  CHECK(vocab.lookup("never-seen") == vocab.lookup(kUnkToken));
}

TEST_CASE("repeated tokens produce identical rows; OOV maps to <UNK>") {
  TokenVocab vocab = TokenVocab::build({"a", "b"});
  Rng rng(4);
  Graph g;
  NodeId emb = g.param(init_embedding(vocab.size(), 4, rng));
  NodeId rows = embed_tokens(g, emb, vocab, {"a", "a", "oov"});
  const Tensor& t = g.value(rows);
  for (std::size_t c = 0; c < 4; ++c) {
    CHECK(t.at(0, c) == t.at(1, c));
    CHECK(t.at(2, c) == g.value(emb).at(vocab.lookup(kUnkToken), c));
  }
}

TEST_CASE("embed_tokens rejects empty sequences") {
  TokenVocab vocab = TokenVocab::build({"a"});
  Graph g;
  NodeId emb = g.constant(Tensor::zeros({vocab.size(), 3}));
  CHECK_THROWS_WITH_AS(embed_tokens(g, emb, vocab, {}), doctest::Contains("empty"), Error);
}

TEST_CASE("gradient of sum(embed_tokens) w.r.t. a token row equals its count") {
  TokenVocab vocab = TokenVocab::build({"a", "b"});
  Rng rng(4);
  ad::ParamTensors params{{"emb", init_embedding(vocab.size(), 3, rng)}};
  std::vector<std::string> tokens{"a", "b", "a", "a"};
  auto builder = [&](Graph& g, const std::map<std::string, NodeId>& ids) {
    return g.sum(embed_tokens(g, ids.at("emb"), vocab, tokens));
  };
  CHECK(ad::grad_check(builder, params, 1e-5).max_rel_err < 1e-6);

  Graph g;
  std::map<std::string, NodeId> ids{{"emb", g.param(params.at("emb"))}};
  NodeId loss = builder(g, ids);
  g.backward(loss);
  const Tensor& grad = g.grad(ids.at("emb"));
  for (std::size_t c = 0; c < 3; ++c) {
    CHECK(grad.at(vocab.lookup("a"), c) == 3.0);
    CHECK(grad.at(vocab.lookup("b"), c) == 1.0);
    CHECK(grad.at(vocab.lookup(kUnkToken), c) == 0.0);
  }
}

TEST_CASE("sentence embedding is the mean of token rows") {
  Graph g;
  NodeId one = g.constant(Tensor::matrix(1, 2, {0.25, -1.5}));
  const Tensor& single = g.value(embed_sentence(g, one));
  CHECK(single.values[0] == 0.25);
  CHECK(single.values[1] == -1.5);

  NodeId two = g.constant(Tensor::matrix(2, 2, {1, 0, 0, 1}));
  const Tensor& mean = g.value(embed_sentence(g, two));
  CHECK(mean.values[0] == 0.5);
  CHECK(mean.values[1] == 0.5);
}

TEST_CASE("sentence embedding is permutation invariant and scale equivariant") {
  Graph g;
  NodeId a = g.constant(Tensor::matrix(3, 2, {1, 2, 3, 4, 5, 6}));
  NodeId b = g.constant(Tensor::matrix(3, 2, {5, 6, 1, 2, 3, 4}));
  CHECK(g.value(embed_sentence(g, a)).values == g.value(embed_sentence(g, b)).values);

  NodeId scaled = g.scale(a, 2.5);
  const Tensor& ea = g.value(embed_sentence(g, a));
  const Tensor& es = g.value(embed_sentence(g, scaled));
  for (std::size_t c = 0; c < 2; ++c) {
    CHECK(es.values[c] == doctest::Approx(2.5 * ea.values[c]).epsilon(1e-15));
  }
}

TEST_CASE("embedding init is deterministic per seed and inside [-0.1, 0.1]") {
  Rng a(9), b(9);
  Tensor ta = init_embedding(5, 4, a);
  Tensor tb = init_embedding(5, 4, b);
  CHECK(ta.values == tb.values);
  for (double v : ta.values) {
    CHECK(v >= -0.1);
    CHECK(v <= 0.1);
  }
}

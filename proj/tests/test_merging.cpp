#include <doctest.h>

#include <cmath>

#include "conprom/error.hpp"
#include "conprom/merging.hpp"
#include "conprom/synthgen.hpp"

using namespace conprom;
using ad::Graph;
using ad::NodeId;
using ad::Tensor;

namespace {

SupportSet hand_support() {
  // frames (A,{b}), (A,{b,c}), (B,{c}) with b, c realized as B- tags
  SupportSet s;
  s.frames = {
      {{"t1", "t2", "f"}, "A", {"B-b", "B-b", "O"}},  // tag b counted once for this frame
      {{"t1", "t3", "f"}, "A", {"B-b", "B-c", "O"}},
      {{"t3", "f"}, "B", {"B-c", "O"}},
  };
  return s;
}

}  // namespace

TEST_CASE("co-occurrence counts are frame-level and row-normalized") {
  auto support = hand_support();
  std::vector<std::string> intents{"A", "B"};
  std::vector<std::string> tags{"B-b", "B-c", "O"};
  auto non_o = non_o_tag_indices(tags);
  CHECK(non_o == std::vector<std::size_t>{0, 1});

  auto counts = cooccurrence_counts(support, intents, tags, non_o);
  CHECK(counts == std::vector<std::vector<long long>>{{2, 1}, {0, 1}});

  Tensor a_stat = stat_attention(counts);
  CHECK(a_stat.at(0, 0) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(a_stat.at(0, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(a_stat.at(1, 0) == 0.0);
  CHECK(a_stat.at(1, 1) == 1.0);
}

TEST_CASE("single frame (A,{b}) gives a_stat [[1]]") {
  SupportSet s;
  s.frames = {{{"t"}, "A", {"B-b"}}};
  auto counts = cooccurrence_counts(s, {"A"}, {"B-b", "O"}, {0});
  Tensor a_stat = stat_attention(counts);
  CHECK(a_stat.numel() == 1);
  CHECK(a_stat.values[0] == 1.0);
}

TEST_CASE("an intent with no slotted frames falls back to a uniform row") {
  SupportSet s;
  s.frames = {{{"t"}, "A", {"B-b"}}, {{"u"}, "B", {"O"}}};
  auto counts = cooccurrence_counts(s, {"A", "B"}, {"B-b", "B-c", "O"}, {0, 1});
  Tensor a_stat = stat_attention(counts);
  CHECK(a_stat.at(1, 0) == 0.5);
  CHECK(a_stat.at(1, 1) == 0.5);
}

TEST_CASE("representation attention: hand-computed 1-d case") {
  Graph g;
  MergeParamRefs params;
  params.w = g.param(Tensor::matrix(1, 1, {1.0}));
  params.u = g.param(Tensor::matrix(1, 1, {1.0}));
  params.v = g.param(Tensor::vector({1.0}));
  NodeId intent_protos = g.constant(Tensor::matrix(1, 1, {0.0}));
  NodeId slot_protos = g.constant(Tensor::matrix(2, 1, {0.0, 10.0}));

  const Tensor& a_repr = g.value(representation_attention(g, intent_protos, slot_protos, params));
  double s1 = std::tanh(10.0);
  double denom = std::exp(0.0) + std::exp(s1);
  CHECK(a_repr.at(0, 0) == doctest::Approx(std::exp(0.0) / denom).epsilon(1e-12));
  CHECK(a_repr.at(0, 1) == doctest::Approx(std::exp(s1) / denom).epsilon(1e-12));
  CHECK(a_repr.at(0, 0) == doctest::Approx(0.2689).epsilon(1e-3));
  CHECK(a_repr.at(0, 1) == doctest::Approx(0.7311).epsilon(1e-3));
}

TEST_CASE("zero W and U (or zero V) give uniform attention rows") {
  Rng rng(5);
  Graph g;
  NodeId intent_protos = g.constant([&] {
    Tensor t = Tensor::zeros({2, 3});
    for (double& v : t.values) v = rng.uniform(-1, 1);
    return t;
  }());
  NodeId slot_protos = g.constant([&] {
    Tensor t = Tensor::zeros({4, 3});
    for (double& v : t.values) v = rng.uniform(-1, 1);
    return t;
  }());

  MergeParamRefs zero_wu;
  zero_wu.w = g.constant(Tensor::zeros({3, 3}));
  zero_wu.u = g.constant(Tensor::zeros({3, 3}));
  zero_wu.v = g.constant(Tensor::vector({0.3, -0.4, 0.9}));
  const Tensor& a1 = g.value(representation_attention(g, intent_protos, slot_protos, zero_wu));
  for (double v : a1.values) CHECK(v == doctest::Approx(0.25).epsilon(1e-12));

  MergeParamRefs zero_v;
  zero_v.w = g.constant(Tensor::matrix(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1}));
  zero_v.u = g.constant(Tensor::matrix(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1}));
  zero_v.v = g.constant(Tensor::zeros({3}));
  const Tensor& a2 = g.value(representation_attention(g, intent_protos, slot_protos, zero_v));
  for (double v : a2.values) CHECK(v == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("representation attention rejects inconsistent shapes") {
  Graph g;
  MergeParamRefs params;
  params.w = g.constant(Tensor::zeros({2, 3}));
  params.u = g.constant(Tensor::zeros({2, 3}));
  params.v = g.constant(Tensor::zeros({2}));
  NodeId intents = g.constant(Tensor::zeros({2, 3}));
  NodeId slots = g.constant(Tensor::zeros({2, 4}));
  CHECK_THROWS_AS(representation_attention(g, intents, slots, params), Error);
}

namespace {

struct BuiltAttention {
  Graph graph;
  PrototypeSet protos;
  AttentionState attention;
  TokenVocab vocab;
};

void build_for(BuiltAttention& out, const SupportSet& support, double lambda,
               std::uint64_t seed, std::size_t dim = 4) {
  std::vector<std::string> tokens;
  for (const auto& f : support.frames) {
    tokens.insert(tokens.end(), f.tokens.begin(), f.tokens.end());
  }
  out.vocab = TokenVocab::build(tokens);
  Rng rng(seed);
  Episode ep;
  ep.support = support;
  auto names = episode_vocab(ep);

  NodeId emb = out.graph.param(init_embedding(out.vocab.size(), dim, rng));
  EncoderRef enc{&out.vocab, emb, emb};
  out.protos = compute_prototypes(out.graph, support, enc, names.intent_names, names.tag_names);

  std::size_t h = dim;
  auto uniform = [&](std::vector<std::size_t> shape) {
    Tensor t = Tensor::zeros(std::move(shape));
    for (double& v : t.values) v = rng.uniform(-0.5, 0.5);
    return t;
  };
  MergeParamRefs params;
  params.w = out.graph.param(uniform({h, dim}));
  params.u = out.graph.param(uniform({h, dim}));
  params.v = out.graph.param(uniform({h}));
  out.attention = build_attention(out.graph, support, out.protos, params, lambda);
}

}  // namespace

TEST_CASE("attention rows are stochastic and a_final interpolates exactly") {
  SynthSpec spec;
  spec.train_domains = 6;
  spec.dev_domains = 0;
  spec.test_domains = 0;
  spec.frames_per_domain = 20;
  spec.seed = 77;
  Dataset ds = generate(spec);

  std::uint64_t seed = 0;
  for (const auto& domain : ds.train) {
    Rng srng(seed);
    SupportSet support = build_support_set(domain, 1, srng);
    const double lambda = 0.3;
    BuiltAttention built;
    build_for(built, support, lambda, seed++);

    const Tensor& a_stat = built.graph.value(built.attention.a_stat);
    const Tensor& a_repr = built.graph.value(built.attention.a_repr);
    const Tensor& a_final = built.graph.value(built.attention.a_final);
    std::size_t rows = a_stat.shape[0], cols = a_stat.shape[1];
    for (std::size_t r = 0; r < rows; ++r) {
      double s1 = 0, s2 = 0, s3 = 0;
      for (std::size_t c = 0; c < cols; ++c) {
        s1 += a_stat.at(r, c);
        s2 += a_repr.at(r, c);
        s3 += a_final.at(r, c);
        CHECK(a_final.at(r, c) ==
              doctest::Approx(lambda * a_stat.at(r, c) + (1 - lambda) * a_repr.at(r, c))
                  .epsilon(1e-12));
      }
      CHECK(s1 == doctest::Approx(1.0).epsilon(1e-9));
      CHECK(s2 == doctest::Approx(1.0).epsilon(1e-9));
      CHECK(s3 == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
}

TEST_CASE("merge with a degenerate attention row copies the attended slot") {
  Graph g;
  PrototypeSet protos;
  protos.intent_names = {"A"};
  protos.tag_names = {"B-p", "B-q", "O"};
  protos.intent_protos = g.constant(Tensor::matrix(1, 2, {5, 5}));
  protos.slot_protos = g.constant(Tensor::matrix(3, 2, {1, 2, 3, 4, 0, 0}));

  AttentionState attn;
  attn.non_o_tags = {0, 1};
  attn.counts = {{1, 0}};
  attn.a_stat = g.constant(Tensor::matrix(1, 2, {1, 0}));
  attn.a_repr = attn.a_stat;
  attn.a_final = g.constant(Tensor::matrix(1, 2, {1, 0}));

  auto merged = merge_prototypes(g, protos, attn, 1.0);  // alpha = 1: pure fusion
  const Tensor& mi = g.value(merged.intent);
  CHECK(mi.at(0, 0) == 1.0);  // equals slot prototype p1
  CHECK(mi.at(0, 1) == 2.0);
}

TEST_CASE("alpha = 0 reproduces the original prototypes exactly") {
  SupportSet support = hand_support();
  BuiltAttention built;
  build_for(built, support, 0.5, 9);
  auto merged = merge_prototypes(built.graph, built.protos, built.attention, 0.0);
  CHECK(built.graph.value(merged.intent).values ==
        built.graph.value(built.protos.intent_protos).values);
  CHECK(built.graph.value(merged.slot).values ==
        built.graph.value(built.protos.slot_protos).values);
}

TEST_CASE("alpha = 1 with a single intent and slot swaps the prototypes") {
  Graph g;
  PrototypeSet protos;
  protos.intent_names = {"A"};
  protos.tag_names = {"B-x", "O"};
  protos.intent_protos = g.constant(Tensor::matrix(1, 2, {1, 2}));
  protos.slot_protos = g.constant(Tensor::matrix(2, 2, {7, 8, 0, 0}));

  AttentionState attn;
  attn.non_o_tags = {0};
  attn.counts = {{1}};
  attn.a_stat = g.constant(Tensor::matrix(1, 1, {1}));
  attn.a_repr = attn.a_stat;
  attn.a_final = g.constant(Tensor::matrix(1, 1, {1}));

  auto merged = merge_prototypes(g, protos, attn, 1.0);
  const Tensor& mi = g.value(merged.intent);
  const Tensor& ms = g.value(merged.slot);
  CHECK(mi.at(0, 0) == 7.0);
  CHECK(mi.at(0, 1) == 8.0);
  CHECK(ms.at(0, 0) == 1.0);  // B-x row took the intent prototype
  CHECK(ms.at(0, 1) == 2.0);
  CHECK(ms.at(1, 0) == 0.0);  // "O" passes through untouched
  CHECK(ms.at(1, 1) == 0.0);
}

TEST_CASE("renaming slot classes permutes columns but leaves merged intents unchanged") {
  SupportSet support = hand_support();
  BuiltAttention original;
  build_for(original, support, 0.5, 13);
  auto merged_orig = merge_prototypes(original.graph, original.protos, original.attention, 0.5);

  // rename B-b -> B-zz so the sorted tag order flips
  SupportSet renamed = support;
  for (auto& frame : renamed.frames) {
    for (auto& tag : frame.slot_tags) {
      if (tag == "B-b") tag = "B-zz";
    }
  }
  BuiltAttention permuted;
  build_for(permuted, renamed, 0.5, 13);
  auto merged_perm = merge_prototypes(permuted.graph, permuted.protos, permuted.attention, 0.5);

  const Tensor& a = original.graph.value(merged_orig.intent);
  const Tensor& b = permuted.graph.value(merged_perm.intent);
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    CHECK(a.values[i] == doctest::Approx(b.values[i]).epsilon(1e-12));
  }

  // columns of the statistic attention swapped along with the tag order
  const Tensor& as = original.graph.value(original.attention.a_stat);
  const Tensor& bs = permuted.graph.value(permuted.attention.a_stat);
  for (std::size_t r = 0; r < as.shape[0]; ++r) {
    CHECK(as.at(r, 0) == bs.at(r, 1));
    CHECK(as.at(r, 1) == bs.at(r, 0));
  }
}

TEST_CASE("build_attention requires a non-O tag") {
  SupportSet s;
  s.frames = {{{"t"}, "A", {"O"}}};
  BuiltAttention built;
  CHECK_THROWS_WITH_AS(build_for(built, s, 0.5, 1), doctest::Contains("non-O"), Error);
}

#pragma once

#include <cstdint>

#include "conprom/config.hpp"
#include "conprom/corpus.hpp"

namespace conprom {

// Specification for the synthetic domain-family generator. `dependency` is
// the probability that a slot-bearing token's tag identity is determined by
// the sentence intent (the film-vs-book style ambiguity); the remaining
// tokens map to one fixed slot regardless of intent.
struct SynthSpec {
  int train_domains = 20;
  int dev_domains = 5;
  int test_domains = 5;
  int intents_per_domain = 3;
  int slots_per_domain = 6;
  double dependency = 0.9;
  int vocab_size = 400;
  int min_sentence_len = 6;
  int max_sentence_len = 10;
  int frames_per_domain = 60;
  std::uint64_t seed = 0;

  static SynthSpec from_config(const Config& cfg);
  void validate() const;
};

// Deterministic per seed. Every domain receives fresh label names (the
// unseen-domain transfer setting); surface tokens are shared across domains.
Dataset generate(const SynthSpec& spec);

}  // namespace conprom

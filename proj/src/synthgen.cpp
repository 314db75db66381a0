#include "conprom/synthgen.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "conprom/error.hpp"
#include "conprom/rng.hpp"

namespace conprom {

SynthSpec SynthSpec::from_config(const Config& cfg) {
  SynthSpec spec;
  spec.train_domains = static_cast<int>(cfg.get_int("synth.train_domains", spec.train_domains));
  spec.dev_domains = static_cast<int>(cfg.get_int("synth.dev_domains", spec.dev_domains));
  spec.test_domains = static_cast<int>(cfg.get_int("synth.test_domains", spec.test_domains));
  spec.intents_per_domain =
      static_cast<int>(cfg.get_int("synth.intents_per_domain", spec.intents_per_domain));
  spec.slots_per_domain =
      static_cast<int>(cfg.get_int("synth.slots_per_domain", spec.slots_per_domain));
  spec.dependency = cfg.get_double("synth.dependency", spec.dependency);
  spec.vocab_size = static_cast<int>(cfg.get_int("synth.vocab_size", spec.vocab_size));
  spec.min_sentence_len =
      static_cast<int>(cfg.get_int("synth.min_sentence_len", spec.min_sentence_len));
  spec.max_sentence_len =
      static_cast<int>(cfg.get_int("synth.max_sentence_len", spec.max_sentence_len));
  spec.frames_per_domain =
      static_cast<int>(cfg.get_int("synth.frames_per_domain", spec.frames_per_domain));
  spec.seed = cfg.get_uint("synth.seed", spec.seed);
  spec.validate();
  return spec;
}

void SynthSpec::validate() const {
  if (train_domains < 0 || dev_domains < 0 || test_domains < 0 ||
      train_domains + dev_domains + test_domains == 0) {
    raise(ErrorKind::Validation, "synth: domain counts must be non-negative with at least one domain");
  }
  if (intents_per_domain <= 0 || slots_per_domain <= 0 || frames_per_domain <= 0) {
    raise(ErrorKind::Validation, "synth: counts must be positive");
  }
  if (dependency < 0.0 || dependency > 1.0) {
    raise(ErrorKind::Validation, "synth: dependency must be in [0, 1]");
  }
  if (vocab_size < 30) raise(ErrorKind::Validation, "synth: vocab_size must be at least 30");
  if (min_sentence_len < 5 || max_sentence_len < min_sentence_len) {
    raise(ErrorKind::Validation, "synth: sentence length range must satisfy 5 <= min <= max");
  }
}

namespace {

std::string pad3(int n) {
  std::string s = std::to_string(n);
  while (s.size() < 3) s = "0" + s;
  return s;
}

struct TokenPools {
  std::vector<std::string> heads;          // slot-bearing span heads
  std::vector<std::string> continuations;  // second tokens of two-token spans
  std::vector<std::string> fillers;        // "O" background tokens
};

TokenPools make_pools(int vocab_size) {
  TokenPools pools;
  int n_heads = vocab_size * 2 / 5;
  int n_cont = vocab_size / 5;
  int n_fill = vocab_size - n_heads - n_cont;
  for (int i = 0; i < n_heads; ++i) pools.heads.push_back("e" + pad3(i));
  for (int i = 0; i < n_cont; ++i) pools.continuations.push_back("c" + pad3(i));
  for (int i = 0; i < n_fill; ++i) pools.fillers.push_back("f" + pad3(i));
  return pools;
}

// Draw a pool token not yet claimed by this domain.
std::string draw_unused(Rng& rng, const std::vector<std::string>& pool,
                        std::set<std::string>& used) {
  for (int attempt = 0; attempt < 1000; ++attempt) {
    const std::string& tok = rng.pick(pool);
    if (used.insert(tok).second) return tok;
  }
  raise(ErrorKind::Runtime, "synth: token pool exhausted, increase vocab_size");
}

Domain make_domain(const SynthSpec& spec, const TokenPools& pools, const std::string& name,
                   Rng& rng) {
  int n_intents = spec.intents_per_domain;
  int n_slots = spec.slots_per_domain;

  std::vector<std::string> intents, slots;
  for (int i = 0; i < n_intents; ++i) intents.push_back("i_" + name + "_" + pad3(i));
  for (int j = 0; j < n_slots; ++j) slots.push_back("s_" + name + "_" + pad3(j));

  // Each slot belongs to one intent; sentences of an intent only carry its
  // own slots.
  std::vector<int> owner(n_slots);
  std::vector<std::vector<int>> owned(n_intents);
  for (int j = 0; j < n_slots; ++j) {
    owner[j] = j % n_intents;
    owned[owner[j]].push_back(j);
  }

  // Head tokens. A dependency-chosen head is ambiguous: it appears under a
  // pair of intents and its slot is a function of the intent. The rest are
  // tied to one fixed slot.
  std::set<std::string> used;
  std::map<std::pair<int, int>, std::vector<std::string>> eligible;  // (intent, slot) -> heads
  std::vector<int> intents_with_slots;
  for (int i = 0; i < n_intents; ++i) {
    if (!owned[i].empty()) intents_with_slots.push_back(i);
  }
  int n_domain_heads = 2 * n_slots;
  for (int h = 0; h < n_domain_heads; ++h) {
    std::string tok = draw_unused(rng, pools.heads, used);
    bool dependent = intents_with_slots.size() >= 2 && rng.uniform() < spec.dependency;
    if (dependent) {
      std::size_t p1 = static_cast<std::size_t>(rng.below(intents_with_slots.size()));
      std::size_t p2 = static_cast<std::size_t>(rng.below(intents_with_slots.size() - 1));
      if (p2 >= p1) ++p2;
      int i1 = intents_with_slots[p1];
      int i2 = intents_with_slots[p2];
      int s1 = owned[i1][static_cast<std::size_t>(rng.below(owned[i1].size()))];
      int s2 = owned[i2][static_cast<std::size_t>(rng.below(owned[i2].size()))];
      eligible[{i1, s1}].push_back(tok);
      eligible[{i2, s2}].push_back(tok);
    } else {
      int s = static_cast<int>(rng.below(static_cast<std::uint64_t>(n_slots)));
      eligible[{owner[s], s}].push_back(tok);
    }
  }
  // Every slot needs at least one head under its owner intent.
  for (int j = 0; j < n_slots; ++j) {
    auto& list = eligible[{owner[j], j}];
    if (list.empty()) list.push_back(draw_unused(rng, pools.heads, used));
  }

  // Two-token spans continue with slot-specific tokens.
  std::vector<std::vector<std::string>> continuation(n_slots);
  for (int j = 0; j < n_slots; ++j) {
    continuation[j].push_back(draw_unused(rng, pools.continuations, used));
    continuation[j].push_back(draw_unused(rng, pools.continuations, used));
  }

  std::vector<std::string> domain_fillers;
  for (int f = 0; f < 12; ++f) domain_fillers.push_back(draw_unused(rng, pools.fillers, used));

  // Balanced intents, shuffled.
  std::vector<int> frame_intents;
  for (int f = 0; f < spec.frames_per_domain; ++f) frame_intents.push_back(f % n_intents);
  rng.shuffle(frame_intents);

  Domain domain;
  domain.name = name;
  std::vector<int> slot_rr(n_intents, 0);     // round-robin over an intent's slots
  std::vector<int> span_len_rr(n_slots, 0);   // alternates one- and two-token spans
  int span_count_rr = 0;

  for (int f = 0; f < spec.frames_per_domain; ++f) {
    int intent = frame_intents[f];
    int length = static_cast<int>(rng.range(spec.min_sentence_len, spec.max_sentence_len));
    int spans = (span_count_rr++ % 2 == 0) ? 2 : 1;
    if (owned[intent].empty()) spans = 0;
    while (spans * 2 + 1 > length) --spans;

    // Each unit is a filler token or a whole span; units are shuffled so span
    // positions vary.
    struct Unit {
      std::vector<std::string> tokens;
      std::vector<std::string> tags;
    };
    std::vector<Unit> units;
    int span_tokens = 0;
    for (int sp = 0; sp < spans; ++sp) {
      const auto& slots_of_intent = owned[intent];
      int slot = slots_of_intent[static_cast<std::size_t>(slot_rr[intent]++) % slots_of_intent.size()];
      int span_len = (span_len_rr[slot]++ % 2 == 0) ? 1 : 2;
      const auto& heads = eligible[{intent, slot}];
      Unit unit;
      unit.tokens.push_back(rng.pick(heads));
      unit.tags.push_back("B-" + slots[slot]);
      if (span_len == 2) {
        unit.tokens.push_back(rng.pick(continuation[slot]));
        unit.tags.push_back("I-" + slots[slot]);
      }
      span_tokens += span_len;
      units.push_back(std::move(unit));
    }
    for (int k = 0; k < length - span_tokens; ++k) {
      units.push_back({{rng.pick(domain_fillers)}, {"O"}});
    }
    rng.shuffle(units);

    SemanticFrame frame;
    frame.intent = intents[intent];
    for (const auto& unit : units) {
      frame.tokens.insert(frame.tokens.end(), unit.tokens.begin(), unit.tokens.end());
      frame.slot_tags.insert(frame.slot_tags.end(), unit.tags.begin(), unit.tags.end());
    }
    domain.frames.push_back(std::move(frame));
  }

  std::set<std::string> intent_vocab, tag_vocab{"O"};
  for (const auto& frame : domain.frames) {
    intent_vocab.insert(frame.intent);
    tag_vocab.insert(frame.slot_tags.begin(), frame.slot_tags.end());
  }
  domain.intent_vocab.assign(intent_vocab.begin(), intent_vocab.end());
  domain.tag_vocab.assign(tag_vocab.begin(), tag_vocab.end());
  return domain;
}

}  // namespace

Dataset generate(const SynthSpec& spec) {
  spec.validate();
  TokenPools pools = make_pools(spec.vocab_size);
  Rng rng(spec.seed);

  Dataset dataset;
  auto fill = [&](std::vector<Domain>& split, const std::string& prefix, int count) {
    for (int d = 0; d < count; ++d) {
      split.push_back(make_domain(spec, pools, prefix + "-" + pad3(d), rng));
    }
  };
  fill(dataset.train, "train", spec.train_domains);
  fill(dataset.dev, "dev", spec.dev_domains);
  fill(dataset.test, "test", spec.test_domains);
  return dataset;
}

}  // namespace conprom

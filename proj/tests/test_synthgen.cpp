#include <doctest.h>

#include <cmath>
#include <map>
#include <set>

#include "conprom/corpus.hpp"
#include "conprom/episodes.hpp"
#include "conprom/error.hpp"
#include "conprom/synthgen.hpp"

using namespace conprom;

namespace {

// slot name of each head-token occurrence, grouped per domain and intent
using TokenTable = std::map<std::string, std::map<std::string, std::map<std::string, int>>>;

TokenTable token_intent_slot_counts(const Domain& domain) {
  TokenTable table;  // token -> intent -> slot name -> count
  for (const auto& frame : domain.frames) {
    for (std::size_t k = 0; k < frame.tokens.size(); ++k) {
      const std::string& tag = frame.slot_tags[k];
      if (tag == "O" || tag[0] != 'B') continue;  // span heads carry the ambiguity
      table[frame.tokens[k]][frame.intent][tag_slot_name(tag)]++;
    }
  }
  return table;
}

// Cramer's V for one token's intent-by-slot contingency table.
double cramers_v(const std::map<std::string, std::map<std::string, int>>& by_intent) {
  std::map<std::string, int> col_totals;
  std::map<std::string, int> row_totals;
  int n = 0;
  for (const auto& [intent, slots] : by_intent) {
    for (const auto& [slot, count] : slots) {
      row_totals[intent] += count;
      col_totals[slot] += count;
      n += count;
    }
  }
  std::size_t r = row_totals.size(), c = col_totals.size();
  if (n == 0 || r < 2 || c < 2) return 0.0;
  double chi2 = 0.0;
  for (const auto& [intent, rt] : row_totals) {
    for (const auto& [slot, ct] : col_totals) {
      double expected = static_cast<double>(rt) * ct / n;
      int observed = 0;
      auto it = by_intent.find(intent);
      if (it != by_intent.end()) {
        auto jt = it->second.find(slot);
        if (jt != it->second.end()) observed = jt->second;
      }
      chi2 += (observed - expected) * (observed - expected) / expected;
    }
  }
  double denom = static_cast<double>(n) * static_cast<double>(std::min(r, c) - 1);
  return std::sqrt(chi2 / denom);
}

}  // namespace

TEST_CASE("generation is deterministic per seed") {
  SynthSpec spec;
  spec.train_domains = 3;
  spec.dev_domains = 1;
  spec.test_domains = 1;
  spec.seed = 42;
  CHECK(serialize_dataset(generate(spec)) == serialize_dataset(generate(spec)));
  SynthSpec other = spec;
  other.seed = 43;
  CHECK(serialize_dataset(generate(spec)) != serialize_dataset(generate(other)));
}

TEST_CASE("spec validation rejects bad parameters") {
  SynthSpec spec;
  spec.dependency = 1.5;
  CHECK_THROWS_AS(spec.validate(), Error);
  spec = SynthSpec{};
  spec.min_sentence_len = 10;
  spec.max_sentence_len = 6;
  CHECK_THROWS_AS(spec.validate(), Error);
  spec = SynthSpec{};
  spec.vocab_size = 10;
  CHECK_THROWS_AS(spec.validate(), Error);
}

TEST_CASE("dependency 0: every head token maps to exactly one slot") {
  SynthSpec spec;
  spec.train_domains = 4;
  spec.dev_domains = 0;
  spec.test_domains = 0;
  spec.dependency = 0.0;
  spec.frames_per_domain = 80;
  spec.seed = 7;
  Dataset ds = generate(spec);
  double v_sum = 0.0;
  int v_count = 0;
  for (const auto& domain : ds.train) {
    for (const auto& [token, by_intent] : token_intent_slot_counts(domain)) {
      std::set<std::string> slots;
      for (const auto& [intent, slot_counts] : by_intent) {
        for (const auto& [slot, count] : slot_counts) slots.insert(slot);
      }
      CHECK(slots.size() == 1);
      v_sum += cramers_v(by_intent);
      ++v_count;
    }
  }
  CHECK(v_sum / v_count == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("dependency 1: a head token's slot is a function of the intent") {
  SynthSpec spec;
  spec.train_domains = 4;
  spec.dev_domains = 0;
  spec.test_domains = 0;
  spec.dependency = 1.0;
  spec.frames_per_domain = 80;
  spec.seed = 7;
  Dataset ds = generate(spec);
  double v_sum = 0.0;
  int v_count = 0;
  bool saw_multi_intent_token = false;
  for (const auto& domain : ds.train) {
    for (const auto& [token, by_intent] : token_intent_slot_counts(domain)) {
      for (const auto& [intent, slot_counts] : by_intent) {
        CHECK(slot_counts.size() == 1);  // deterministic given (token, intent)
      }
      if (by_intent.size() >= 2) {
        saw_multi_intent_token = true;
        v_sum += cramers_v(by_intent);
        ++v_count;
      }
    }
  }
  CHECK(saw_multi_intent_token);
  // disjoint per-intent slot inventories make the association perfect
  CHECK(v_sum / v_count > 0.9);
}

TEST_CASE("test-domain label names are disjoint from train-domain label names") {
  SynthSpec spec;
  spec.train_domains = 5;
  spec.dev_domains = 2;
  spec.test_domains = 3;
  spec.seed = 13;
  Dataset ds = generate(spec);
  auto labels_of = [](const std::vector<Domain>& domains) {
    std::set<std::string> labels;
    for (const auto& d : domains) {
      labels.insert(d.intent_vocab.begin(), d.intent_vocab.end());
      for (const auto& t : d.tag_vocab) {
        if (t != "O") labels.insert(t);
      }
    }
    return labels;
  };
  auto train_labels = labels_of(ds.train);
  for (const auto& label : labels_of(ds.test)) CHECK(!train_labels.count(label));
}

TEST_CASE("every domain supports 5-shot episode construction with query slack") {
  SynthSpec spec;  // defaults
  spec.train_domains = 3;
  spec.dev_domains = 1;
  spec.test_domains = 1;
  spec.seed = 99;
  Dataset ds = generate(spec);
  for (const auto* split : {&ds.train, &ds.dev, &ds.test}) {
    for (const auto& domain : *split) {
      std::map<std::string, std::size_t> counts;
      for (const auto& frame : domain.frames) {
        for (const auto& label : frame_labels(frame)) ++counts[label];
      }
      for (const auto& intent : domain.intent_vocab) CHECK(counts[intent] >= 7);
      for (const auto& tag : domain.tag_vocab) {
        if (tag != "O") CHECK(counts[tag] >= 7);
      }
      Rng rng(1);
      Episode ep = sample_episode(domain, 5, 10, rng);
      CHECK(verify_mini_including(ep.support, domain, 5).ok);
      CHECK(ep.query.size() == 10);
    }
  }
}

TEST_CASE("sentence lengths stay inside the configured range") {
  SynthSpec spec;
  spec.train_domains = 2;
  spec.dev_domains = 0;
  spec.test_domains = 0;
  spec.min_sentence_len = 6;
  spec.max_sentence_len = 9;
  spec.seed = 3;
  for (const auto& domain : generate(spec).train) {
    for (const auto& frame : domain.frames) {
      CHECK(frame.tokens.size() >= 6);
      CHECK(frame.tokens.size() <= 9);
      CHECK(frame.tokens.size() == frame.slot_tags.size());
      CHECK(validate_frame(frame).empty());
    }
  }
}

TEST_CASE("synth spec reads from flat config") {
  auto cfg = Config::parse(
      "synth.train_domains = 7\n"
      "synth.dependency = 0.25\n"
      "synth.seed = 11\n");
  SynthSpec spec = SynthSpec::from_config(cfg);
  CHECK(spec.train_domains == 7);
  CHECK(spec.dependency == 0.25);
  CHECK(spec.seed == 11);
  CHECK(spec.dev_domains == 5);  // default untouched
}

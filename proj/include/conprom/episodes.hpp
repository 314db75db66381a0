#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "conprom/corpus.hpp"
#include "conprom/rng.hpp"

namespace conprom {

// K-shot support set built with the Mini-Including criteria.
struct SupportSet {
  std::vector<SemanticFrame> frames;
  int shot_count = 1;

  bool operator==(const SupportSet&) const = default;
};

struct Episode {
  std::string domain_name;
  SupportSet support;
  std::vector<SemanticFrame> query;

  bool operator==(const Episode&) const = default;
};

using EpisodeList = std::vector<Episode>;

// The labels a frame covers: its intent plus its distinct non-"O" tag
// symbols (B-x and I-x count separately).
std::vector<std::string> frame_labels(const SemanticFrame& frame);

// Per-label coverage targets, clamped to the label's occurrence count in the
// domain: target = min(K, occurrences).
std::map<std::string, std::size_t> coverage_targets(const Domain& domain, int k);

// Greedy Mini-Including construction: shuffle frames, repeatedly add a frame
// covering the scarcest deficient label, then sweep in random order removing
// any frame whose removal keeps criterion 1 intact.
SupportSet build_support_set(const Domain& domain, int k, Rng& rng);

struct MiniIncludingReport {
  bool ok = false;
  bool criterion1 = false;  // all labels reach their (clamped) targets
  bool criterion2 = false;  // no frame is removable
  struct LabelStatus {
    std::string label;
    std::size_t count = 0;
    std::size_t target = 0;
  };
  std::vector<LabelStatus> labels;
  std::vector<bool> removable;  // per support frame
};

MiniIncludingReport verify_mini_including(const SupportSet& support, const Domain& domain, int k);

// Support via build_support_set; query sampled uniformly without replacement
// from the remaining frames, truncated to what is available.
Episode sample_episode(const Domain& domain, int k, int query_size, Rng& rng);

// n episodes drawn round-robin over the split's domains.
EpisodeList build_episodes(const std::vector<Domain>& domains, int k, int query_size,
                           int n_episodes, std::uint64_t seed);

// Class vocabularies of an episode, derived from its support (sorted; the
// tag vocabulary always includes "O").
struct EpisodeVocab {
  std::vector<std::string> intent_names;
  std::vector<std::string> tag_names;
};
EpisodeVocab episode_vocab(const Episode& episode);

std::string serialize_episodes(const EpisodeList& episodes);
EpisodeList parse_episodes(const std::string& json_text);
EpisodeList load_episodes(const std::string& path);
void save_episodes(const EpisodeList& episodes, const std::string& path);

}  // namespace conprom

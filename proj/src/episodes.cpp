#include "conprom/episodes.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "conprom/error.hpp"

namespace conprom {

using nlohmann::json;

std::vector<std::string> frame_labels(const SemanticFrame& frame) {
  std::set<std::string> labels{frame.intent};
  for (const auto& tag : frame.slot_tags) {
    if (tag != "O") labels.insert(tag);
  }
  return {labels.begin(), labels.end()};
}

std::map<std::string, std::size_t> coverage_targets(const Domain& domain, int k) {
  if (k <= 0) raise(ErrorKind::InvalidArgument, "coverage_targets: K must be positive");
  std::map<std::string, std::size_t> occurrences;
  for (const auto& intent : domain.intent_vocab) occurrences[intent] = 0;
  for (const auto& tag : domain.tag_vocab) {
    if (tag != "O") occurrences[tag] = 0;
  }
  for (const auto& frame : domain.frames) {
    for (const auto& label : frame_labels(frame)) ++occurrences[label];
  }
  std::map<std::string, std::size_t> targets;
  for (const auto& [label, count] : occurrences) {
    targets[label] = std::min<std::size_t>(static_cast<std::size_t>(k), count);
  }
  return targets;
}

SupportSet build_support_set(const Domain& domain, int k, Rng& rng) {
  if (domain.frames.empty()) {
    raise(ErrorKind::InvalidArgument, "build_support_set: domain '" + domain.name + "' is empty");
  }
  if (k <= 0) raise(ErrorKind::InvalidArgument, "build_support_set: K must be positive");

  std::map<std::string, std::size_t> domain_count;
  for (const auto& frame : domain.frames) {
    for (const auto& label : frame_labels(frame)) ++domain_count[label];
  }
  auto targets = coverage_targets(domain, k);

  std::vector<std::size_t> order(domain.frames.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);

  std::map<std::string, std::size_t> counts;
  for (const auto& [label, target] : targets) counts[label] = 0;
  std::vector<bool> selected(domain.frames.size(), false);

  auto deficiency = [&]() -> std::string {
    // scarcest deficient label; ties broken by name for determinism
    std::string best;
    std::size_t best_freq = 0;
    for (const auto& [label, target] : targets) {
      if (counts[label] >= target) continue;
      std::size_t freq = domain_count[label];
      if (best.empty() || freq < best_freq || (freq == best_freq && label < best)) {
        best = label;
        best_freq = freq;
      }
    }
    return best;
  };

  std::vector<std::size_t> picked;
  for (;;) {
    std::string label = deficiency();
    if (label.empty()) break;
    bool found = false;
    for (std::size_t idx : order) {
      if (selected[idx]) continue;
      auto labels = frame_labels(domain.frames[idx]);
      if (std::find(labels.begin(), labels.end(), label) == labels.end()) continue;
      selected[idx] = true;
      picked.push_back(idx);
      for (const auto& l : labels) ++counts[l];
      found = true;
      break;
    }
    if (!found) {
      // cannot happen: targets are clamped to domain occurrence counts
      raise(ErrorKind::Runtime, "build_support_set: no frame covers label '" + label + "'");
    }
  }

  // Removal sweep. Removing a frame only lowers counts, so a single random
  // pass leaves no removable frame behind.
  std::vector<std::size_t> sweep = picked;
  rng.shuffle(sweep);
  for (std::size_t idx : sweep) {
    bool removable = true;
    for (const auto& label : frame_labels(domain.frames[idx])) {
      if (counts[label] == 0 || counts[label] - 1 < targets[label]) {
        removable = false;
        break;
      }
    }
    if (removable) {
      selected[idx] = false;
      for (const auto& label : frame_labels(domain.frames[idx])) --counts[label];
    }
  }

  SupportSet support;
  support.shot_count = k;
  for (std::size_t i = 0; i < domain.frames.size(); ++i) {
    if (selected[i]) support.frames.push_back(domain.frames[i]);
  }
  return support;
}

MiniIncludingReport verify_mini_including(const SupportSet& support, const Domain& domain, int k) {
  auto targets = coverage_targets(domain, k);
  std::map<std::string, std::size_t> counts;
  for (const auto& [label, target] : targets) counts[label] = 0;
  for (const auto& frame : support.frames) {
    for (const auto& label : frame_labels(frame)) {
      // labels outside the domain vocabulary are counted too; they simply
      // carry no target
      ++counts[label];
    }
  }

  MiniIncludingReport report;
  report.criterion1 = true;
  for (const auto& [label, target] : targets) {
    report.labels.push_back({label, counts[label], target});
    if (counts[label] < target) report.criterion1 = false;
  }

  report.criterion2 = true;
  for (const auto& frame : support.frames) {
    bool removable = true;
    for (const auto& label : frame_labels(frame)) {
      auto it = targets.find(label);
      std::size_t target = it == targets.end() ? 0 : it->second;
      if (counts[label] - 1 < target) {
        removable = false;
        break;
      }
    }
    report.removable.push_back(removable);
    if (removable) report.criterion2 = false;
  }
  if (support.frames.empty() && !domain.frames.empty()) {
    // an empty support trivially satisfies criterion 2; it fails through
    // criterion 1 unless every target is zero
    report.criterion2 = true;
  }
  report.ok = report.criterion1 && report.criterion2;
  return report;
}

Episode sample_episode(const Domain& domain, int k, int query_size, Rng& rng) {
  if (query_size <= 0) raise(ErrorKind::InvalidArgument, "sample_episode: query_size must be positive");
  SupportSet support = build_support_set(domain, k, rng);

  std::set<std::size_t> used;
  {
    // support frames are unique positions in the domain frame list
    std::size_t si = 0;
    for (std::size_t i = 0; i < domain.frames.size() && si < support.frames.size(); ++i) {
      if (domain.frames[i] == support.frames[si]) {
        used.insert(i);
        ++si;
      }
    }
  }
  std::vector<std::size_t> remaining;
  for (std::size_t i = 0; i < domain.frames.size(); ++i) {
    if (!used.count(i)) remaining.push_back(i);
  }
  if (remaining.empty()) {
    raise(ErrorKind::InvalidArgument,
          "sample_episode: domain '" + domain.name + "' exhausted, no non-support frames left");
  }

  auto sample = rng.sample_indices(remaining.size(), static_cast<std::size_t>(query_size));
  Episode episode;
  episode.domain_name = domain.name;
  episode.support = std::move(support);
  for (std::size_t s : sample) episode.query.push_back(domain.frames[remaining[s]]);
  return episode;
}

EpisodeList build_episodes(const std::vector<Domain>& domains, int k, int query_size,
                           int n_episodes, std::uint64_t seed) {
  if (domains.empty()) raise(ErrorKind::InvalidArgument, "build_episodes: no domains in split");
  if (n_episodes <= 0) raise(ErrorKind::InvalidArgument, "build_episodes: n_episodes must be positive");
  Rng rng(seed);
  EpisodeList episodes;
  episodes.reserve(static_cast<std::size_t>(n_episodes));
  for (int i = 0; i < n_episodes; ++i) {
    const Domain& domain = domains[static_cast<std::size_t>(i) % domains.size()];
    episodes.push_back(sample_episode(domain, k, query_size, rng));
  }
  return episodes;
}

EpisodeVocab episode_vocab(const Episode& episode) {
  std::set<std::string> intents, tags{"O"};
  for (const auto& frame : episode.support.frames) {
    intents.insert(frame.intent);
    tags.insert(frame.slot_tags.begin(), frame.slot_tags.end());
  }
  EpisodeVocab vocab;
  vocab.intent_names.assign(intents.begin(), intents.end());
  vocab.tag_names.assign(tags.begin(), tags.end());
  return vocab;
}

namespace {

json frame_json(const SemanticFrame& frame) {
  return json{{"tokens", frame.tokens}, {"intent", frame.intent}, {"slot_tags", frame.slot_tags}};
}

SemanticFrame frame_from_json(const json& j) {
  SemanticFrame frame;
  frame.tokens = j.at("tokens").get<std::vector<std::string>>();
  frame.intent = j.at("intent").get<std::string>();
  frame.slot_tags = j.at("slot_tags").get<std::vector<std::string>>();
  if (frame.tokens.size() != frame.slot_tags.size()) {
    raise(ErrorKind::Validation, "episode frame: length mismatch between tokens and slot_tags");
  }
  for (const auto& tag : frame.slot_tags) {
    if (!is_valid_tag(tag)) raise(ErrorKind::Validation, "episode frame: malformed tag '" + tag + "'");
  }
  return frame;
}

}  // namespace

std::string serialize_episodes(const EpisodeList& episodes) {
  json root = json::array();
  for (const auto& ep : episodes) {
    json support = json::array();
    for (const auto& frame : ep.support.frames) support.push_back(frame_json(frame));
    json query = json::array();
    for (const auto& frame : ep.query) query.push_back(frame_json(frame));
    root.push_back(json{{"domain", ep.domain_name},
                        {"shot_count", ep.support.shot_count},
                        {"support", std::move(support)},
                        {"query", std::move(query)}});
  }
  return root.dump(2);
}

EpisodeList parse_episodes(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    raise(ErrorKind::Parse, std::string("episode JSON: ") + e.what());
  }
  if (!root.is_array()) raise(ErrorKind::Validation, "episode JSON: top level must be an array");
  EpisodeList episodes;
  try {
    for (const auto& ej : root) {
      Episode ep;
      ep.domain_name = ej.at("domain").get<std::string>();
      ep.support.shot_count = ej.value("shot_count", 1);
      for (const auto& fj : ej.at("support")) ep.support.frames.push_back(frame_from_json(fj));
      for (const auto& fj : ej.at("query")) ep.query.push_back(frame_from_json(fj));
      episodes.push_back(std::move(ep));
    }
  } catch (const json::exception& e) {
    raise(ErrorKind::Validation, std::string("episode JSON: ") + e.what());
  }
  return episodes;
}

EpisodeList load_episodes(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorKind::Io, "cannot open episode file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_episodes(buf.str());
}

void save_episodes(const EpisodeList& episodes, const std::string& path) {
  std::ofstream out(path);
  if (!out) raise(ErrorKind::Io, "cannot write episode file " + path);
  out << serialize_episodes(episodes) << "\n";
}

}  // namespace conprom

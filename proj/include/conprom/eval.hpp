#pragma once

#include <compare>
#include <map>
#include <string>
#include <vector>

#include "conprom/episodes.hpp"
#include "conprom/model.hpp"

namespace conprom {

struct MetricsReport {
  double intent_accuracy = 0.0;
  double slot_precision = 0.0;
  double slot_recall = 0.0;
  double slot_f1 = 0.0;
  double joint_accuracy = 0.0;
  double sentence_slot_accuracy = 0.0;
  std::size_t n_sentences = 0;
  std::size_t n_gold_chunks = 0;
  std::size_t n_pred_chunks = 0;
};

// Per-token tag distributions -> tag sequence. Without transition rules this
// is the per-token argmax (ties go to the lexicographically smallest tag).
// With them, decoding is greedy left-to-right and "I-x" is masked unless the
// previous output tag is "B-x" or "I-x"; position 0 masks every "I-*".
std::vector<std::string> decode_slots(const std::vector<std::vector<double>>& distributions,
                                      const std::vector<std::string>& tag_names,
                                      bool transition_rules);

// conlleval BIO semantics: a chunk starts at "B-x" or at an orphan "I-x";
// it ends before "O", any "B-*", or an "I-y" of a different slot.
struct Chunk {
  std::string name;
  std::size_t begin = 0;
  std::size_t end = 0;  // inclusive
  auto operator<=>(const Chunk&) const = default;
};
std::vector<Chunk> extract_chunks(const std::vector<std::string>& tags);

// Micro-averaged chunk F1 over a set of sentences; 0 when a denominator is 0.
struct SlotF1 {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t matched = 0;
  std::size_t n_pred = 0;
  std::size_t n_gold = 0;
};
SlotF1 slot_f1(const std::vector<std::vector<std::string>>& pred,
               const std::vector<std::vector<std::string>>& gold);

struct EvalOptions {
  bool finetune = false;
  bool transition_rules = false;
  std::size_t finetune_steps = 50;
  double finetune_lr = 1e-3;
};

// Predictions for one episode's query set.
struct EpisodePredictions {
  std::vector<std::string> intents;
  std::vector<std::vector<std::string>> slot_tags;
};
EpisodePredictions predict_episode(const Model& model, const Episode& episode,
                                   const EvalOptions& options);

MetricsReport evaluate_episode(const Model& model, const Episode& episode,
                               const EvalOptions& options);

// Unweighted mean over episodes; counts are summed.
MetricsReport mean_report(const std::vector<MetricsReport>& reports);

// Mean over episodes within each seed, then mean and population standard
// deviation across seeds.
struct AggregateReport {
  std::vector<MetricsReport> per_seed;
  MetricsReport mean;
  MetricsReport stddev;
};
AggregateReport aggregate(const std::vector<std::vector<MetricsReport>>& per_seed_reports);

std::string report_json(const AggregateReport& report,
                        const std::map<std::string, std::string>& options);

}  // namespace conprom

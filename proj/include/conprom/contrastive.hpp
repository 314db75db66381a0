#pragma once

#include <vector>

#include "conprom/autodiff.hpp"

namespace conprom {

// Per-intent relatedness over non-"O" slot classes: R_i = slots co-occurring
// with intent i in the support, U_i = the complement.
struct RelatednessSets {
  std::vector<std::vector<std::size_t>> related;
  std::vector<std::vector<std::size_t>> unrelated;
};

RelatednessSets relatedness_from_counts(const std::vector<std::vector<long long>>& counts);

struct ContrastiveConfig {
  double margin = 1.0;
  bool enabled = true;
};

// (1/N^2) * sum over ordered pairs i != j of max(0, m - ||C_i - C_j||)^2.
ad::NodeId intra_loss(ad::Graph& graph, ad::NodeId protos, double margin);

// Attracts related intent-slot pairs quadratically, repels unrelated pairs
// inside the margin; an empty R_i or U_i contributes 0.
ad::NodeId inter_loss(ad::Graph& graph, ad::NodeId intent_protos, ad::NodeId slot_protos_non_o,
                      const RelatednessSets& relatedness, double margin);

struct ContrastiveTerms {
  ad::NodeId intra = -1;  // (intra_intent + intra_slot) / 2
  ad::NodeId inter = -1;
  ad::NodeId total = -1;  // inter + intra; constant 0 when disabled
};

// slot_protos_non_o may be -1 (no non-"O" classes); the slot-side terms are
// then zero.
ContrastiveTerms contrastive_loss(ad::Graph& graph, ad::NodeId intent_protos,
                                  ad::NodeId slot_protos_non_o,
                                  const RelatednessSets& relatedness,
                                  const ContrastiveConfig& config);

}  // namespace conprom

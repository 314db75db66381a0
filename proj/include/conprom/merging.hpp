#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "conprom/autodiff.hpp"
#include "conprom/episodes.hpp"
#include "conprom/protonet.hpp"

namespace conprom {

// Additive-attention parameter nodes: W [h x d], U [h x d], V [h].
struct MergeParamRefs {
  ad::NodeId w = -1;
  ad::NodeId u = -1;
  ad::NodeId v = -1;
};

// Cross-attention between intents and non-"O" slot tags.
struct AttentionState {
  std::vector<std::size_t> non_o_tags;             // indices into tag_names
  std::vector<std::vector<long long>> counts;      // [N_I][N_T'] frame-level co-occurrence
  ad::NodeId a_stat = -1;   // constant, row-normalized counts (uniform fallback)
  ad::NodeId a_repr = -1;   // row-softmaxed additive attention
  ad::NodeId a_final = -1;  // lambda * a_stat + (1 - lambda) * a_repr
};

std::vector<std::size_t> non_o_tag_indices(const std::vector<std::string>& tag_names);

// counts[i][j] = number of support frames whose intent is i and which contain
// tag j, counted once per frame.
std::vector<std::vector<long long>> cooccurrence_counts(const SupportSet& support,
                                                        const std::vector<std::string>& intent_names,
                                                        const std::vector<std::string>& tag_names,
                                                        const std::vector<std::size_t>& non_o_tags);

// Row normalization of the counts; rows without any co-occurrence fall back
// to a uniform distribution.
ad::Tensor stat_attention(const std::vector<std::vector<long long>>& counts);

// A^R[i][j] = V^T tanh(W C_intent_i + U C_slot_j), then row softmax.
ad::NodeId representation_attention(ad::Graph& graph, ad::NodeId intent_protos,
                                    ad::NodeId slot_protos_non_o, const MergeParamRefs& params);

// Full attention state for a support set. Requires at least one non-"O" tag.
AttentionState build_attention(ad::Graph& graph, const SupportSet& support,
                               const PrototypeSet& protos, const MergeParamRefs& params,
                               double lambda);

// Fused prototypes weighted by the attention, interpolated with the
// originals: C' = alpha * C^F + (1 - alpha) * C. The "O" prototype passes
// through untouched. Slot fusion uses the attention column-wise without
// renormalization.
struct MergedPrototypes {
  ad::NodeId intent = -1;  // [N_I x d]
  ad::NodeId slot = -1;    // [N_T x d]
};
MergedPrototypes merge_prototypes(ad::Graph& graph, const PrototypeSet& protos,
                                  const AttentionState& attention, double alpha);

}  // namespace conprom

#pragma once

#include <string>
#include <vector>

#include "conprom/autodiff.hpp"
#include "conprom/encoder.hpp"
#include "conprom/episodes.hpp"

namespace conprom {

// Embedding references used by the prototype builders. In shared mode both
// nodes are the same embedding matrix; the SepProto ablation splits them.
struct EncoderRef {
  const TokenVocab* vocab = nullptr;
  ad::NodeId intent_embedding = -1;
  ad::NodeId slot_embedding = -1;
};

// Class prototypes on the graph: mean embeddings of the support examples of
// each class. Names are sorted; the tag side includes "O".
struct PrototypeSet {
  std::vector<std::string> intent_names;
  std::vector<std::string> tag_names;
  ad::NodeId intent_protos = -1;  // [N_I x d]
  ad::NodeId slot_protos = -1;    // [N_T x d]
};

// Intent prototype i = mean of the sentence embeddings of support frames with
// intent i; slot prototype t = mean of the token embeddings of support tokens
// tagged t. A class with zero support occurrences is an error.
PrototypeSet compute_prototypes(ad::Graph& graph, const SupportSet& support,
                                const EncoderRef& encoder,
                                const std::vector<std::string>& intent_names,
                                const std::vector<std::string>& tag_names);

// Similarity-softmax over dot products; returns a [1 x N] probability row.
ad::NodeId classify(ad::Graph& graph, ad::NodeId query_vec, ad::NodeId protos);

// Mean cross-entropy losses for the query set: per sentence for intents, per
// token for slots.
struct TaskLosses {
  ad::NodeId ce_intent = -1;
  ad::NodeId ce_slot = -1;
  ad::NodeId intent_logits = -1;  // [Q x N_I]
  ad::NodeId slot_logits = -1;    // [T x N_T]
};
TaskLosses task_cross_entropy(ad::Graph& graph, const std::vector<SemanticFrame>& queries,
                              const EncoderRef& encoder, ad::NodeId intent_protos,
                              ad::NodeId slot_protos, const std::vector<std::string>& intent_names,
                              const std::vector<std::string>& tag_names);

}  // namespace conprom

#pragma once

#include <optional>

#include "conprom/contrastive.hpp"
#include "conprom/merging.hpp"
#include "conprom/model.hpp"
#include "conprom/protonet.hpp"

namespace conprom {

struct PipelineOptions {
  bool build_loss = true;  // false builds prototypes + query probabilities only
};

// One episode's full forward pass: encode support, build prototypes, merge
// (when enabled), classify queries, and assemble L_all with its components.
struct EpisodeForward {
  EpisodeVocab vocab;
  PrototypeSet protos;
  ad::NodeId merged_intent = -1;  // == protos.intent_protos when merging is off
  ad::NodeId merged_slot = -1;
  std::optional<AttentionState> attention;
  RelatednessSets relatedness;

  ad::NodeId intent_probs = -1;  // [Q x N_I]
  ad::NodeId slot_probs = -1;    // [T x N_T]
  std::vector<std::size_t> query_token_offsets;  // row offset of each query in slot_probs

  ad::NodeId ce_intent = -1;
  ad::NodeId ce_slot = -1;
  ad::NodeId l_intra = -1;
  ad::NodeId l_inter = -1;
  ad::NodeId l_contrastive = -1;
  ad::NodeId l_all = -1;
};

EpisodeForward build_episode_forward(ad::Graph& graph, const ModelConfig& config,
                                     const TokenVocab& vocab, const ParamNodes& params,
                                     const Episode& episode,
                                     const PipelineOptions& options = {});

}  // namespace conprom

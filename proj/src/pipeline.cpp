#include "conprom/pipeline.hpp"

#include "conprom/error.hpp"

namespace conprom {

EpisodeForward build_episode_forward(ad::Graph& graph, const ModelConfig& config,
                                     const TokenVocab& vocab, const ParamNodes& params,
                                     const Episode& episode, const PipelineOptions& options) {
  EpisodeForward fwd;
  fwd.vocab = episode_vocab(episode);

  EncoderRef encoder{&vocab, params.embedding_intent, params.embedding_slot};
  fwd.protos = compute_prototypes(graph, episode.support, encoder, fwd.vocab.intent_names,
                                  fwd.vocab.tag_names);

  auto non_o = non_o_tag_indices(fwd.vocab.tag_names);
  MergeParamRefs merge_params{params.merge_w, params.merge_u, params.merge_v};

  fwd.merged_intent = fwd.protos.intent_protos;
  fwd.merged_slot = fwd.protos.slot_protos;
  if (config.merge_enabled && !non_o.empty()) {
    fwd.attention = build_attention(graph, episode.support, fwd.protos, merge_params,
                                    config.merge_lambda);
    MergedPrototypes merged = merge_prototypes(graph, fwd.protos, *fwd.attention,
                                               config.merge_alpha);
    fwd.merged_intent = merged.intent;
    fwd.merged_slot = merged.slot;
  }

  // Query classification runs against the merged space.
  if (!episode.query.empty()) {
    TaskLosses losses = task_cross_entropy(graph, episode.query, encoder, fwd.merged_intent,
                                           fwd.merged_slot, fwd.vocab.intent_names,
                                           fwd.vocab.tag_names);
    fwd.intent_probs = graph.row_softmax(losses.intent_logits);
    fwd.slot_probs = graph.row_softmax(losses.slot_logits);
    std::size_t offset = 0;
    for (const auto& frame : episode.query) {
      fwd.query_token_offsets.push_back(offset);
      offset += frame.tokens.size();
    }
    fwd.ce_intent = losses.ce_intent;
    fwd.ce_slot = losses.ce_slot;
  } else if (options.build_loss) {
    raise(ErrorKind::InvalidArgument, "build_episode_forward: episode has no query frames");
  }

  if (!options.build_loss) return fwd;

  // Contrastive terms live in the merged space unless configured otherwise.
  const auto& counts = fwd.attention
                           ? fwd.attention->counts
                           : cooccurrence_counts(episode.support, fwd.vocab.intent_names,
                                                 fwd.vocab.tag_names, non_o);
  fwd.relatedness = relatedness_from_counts(counts);

  ContrastiveConfig cal{config.cal_margin, config.cal_enabled};
  bool use_merged = config.cal_space == CalSpace::Merged;
  ad::NodeId cal_intent = use_merged ? fwd.merged_intent : fwd.protos.intent_protos;
  ad::NodeId cal_slot_base = use_merged ? fwd.merged_slot : fwd.protos.slot_protos;
  ad::NodeId cal_slot_non_o = non_o.empty() ? -1 : graph.gather_rows(cal_slot_base, non_o);
  ContrastiveTerms terms = contrastive_loss(graph, cal_intent, cal_slot_non_o, fwd.relatedness,
                                            cal);
  fwd.l_intra = terms.intra;
  fwd.l_inter = terms.inter;
  fwd.l_contrastive = terms.total;

  fwd.l_all = graph.add(graph.add(fwd.ce_intent, fwd.ce_slot), fwd.l_contrastive);
  return fwd;
}

}  // namespace conprom

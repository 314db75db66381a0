#include "conprom/protonet.hpp"

#include <algorithm>
#include <map>

#include "conprom/error.hpp"

namespace conprom {

namespace {

std::map<std::string, std::size_t> name_index(const std::vector<std::string>& names) {
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < names.size(); ++i) index[names[i]] = i;
  return index;
}

}  // namespace

PrototypeSet compute_prototypes(ad::Graph& graph, const SupportSet& support,
                                const EncoderRef& encoder,
                                const std::vector<std::string>& intent_names,
                                const std::vector<std::string>& tag_names) {
  if (support.frames.empty()) {
    raise(ErrorKind::InvalidArgument, "compute_prototypes: empty support set");
  }
  auto intent_index = name_index(intent_names);
  auto tag_index = name_index(tag_names);

  // Sentence embeddings per frame (intent path) and one big token-embedding
  // matrix over all support tokens (slot path).
  std::vector<ad::NodeId> sentence_embeddings;
  std::vector<ad::NodeId> frame_token_embeddings;
  std::vector<std::vector<std::size_t>> tag_positions(tag_names.size());
  std::size_t token_offset = 0;
  for (const auto& frame : support.frames) {
    ad::NodeId slot_tokens = embed_tokens(graph, encoder.slot_embedding, *encoder.vocab,
                                          frame.tokens);
    frame_token_embeddings.push_back(slot_tokens);
    ad::NodeId intent_tokens = slot_tokens;
    if (encoder.intent_embedding != encoder.slot_embedding) {
      intent_tokens = embed_tokens(graph, encoder.intent_embedding, *encoder.vocab, frame.tokens);
    }
    sentence_embeddings.push_back(embed_sentence(graph, intent_tokens));
    for (std::size_t k = 0; k < frame.slot_tags.size(); ++k) {
      auto it = tag_index.find(frame.slot_tags[k]);
      if (it == tag_index.end()) {
        raise(ErrorKind::Validation,
              "compute_prototypes: support tag '" + frame.slot_tags[k] + "' missing from vocab");
      }
      tag_positions[it->second].push_back(token_offset + k);
    }
    token_offset += frame.tokens.size();
  }
  ad::NodeId all_tokens = graph.concat_rows(frame_token_embeddings);

  std::vector<std::vector<std::size_t>> intent_members(intent_names.size());
  for (std::size_t f = 0; f < support.frames.size(); ++f) {
    auto it = intent_index.find(support.frames[f].intent);
    if (it == intent_index.end()) {
      raise(ErrorKind::Validation, "compute_prototypes: support intent '" +
                                       support.frames[f].intent + "' missing from vocab");
    }
    intent_members[it->second].push_back(f);
  }

  std::vector<ad::NodeId> intent_rows;
  for (std::size_t i = 0; i < intent_names.size(); ++i) {
    if (intent_members[i].empty()) {
      raise(ErrorKind::Validation,
            "compute_prototypes: class '" + intent_names[i] + "' has no support occurrences");
    }
    std::vector<ad::NodeId> members;
    for (std::size_t f : intent_members[i]) members.push_back(sentence_embeddings[f]);
    intent_rows.push_back(graph.mean_rows(graph.stack_rows(members)));
  }

  std::vector<ad::NodeId> slot_rows;
  for (std::size_t t = 0; t < tag_names.size(); ++t) {
    if (tag_positions[t].empty()) {
      raise(ErrorKind::Validation,
            "compute_prototypes: class '" + tag_names[t] + "' has no support occurrences");
    }
    slot_rows.push_back(graph.mean_rows(graph.gather_rows(all_tokens, tag_positions[t])));
  }

  PrototypeSet protos;
  protos.intent_names = intent_names;
  protos.tag_names = tag_names;
  protos.intent_protos = graph.stack_rows(intent_rows);
  protos.slot_protos = graph.stack_rows(slot_rows);
  return protos;
}

ad::NodeId classify(ad::Graph& graph, ad::NodeId query_vec, ad::NodeId protos) {
  const ad::Tensor& p = graph.value(protos);
  if (p.rank() != 2 || p.shape[0] == 0) {
    raise(ErrorKind::InvalidArgument, "classify: empty prototype set");
  }
  ad::NodeId logits = graph.matmul(protos, query_vec);  // [N]
  return graph.row_softmax(graph.stack_rows({logits}));
}

TaskLosses task_cross_entropy(ad::Graph& graph, const std::vector<SemanticFrame>& queries,
                              const EncoderRef& encoder, ad::NodeId intent_protos,
                              ad::NodeId slot_protos, const std::vector<std::string>& intent_names,
                              const std::vector<std::string>& tag_names) {
  if (queries.empty()) raise(ErrorKind::InvalidArgument, "task_cross_entropy: no queries");
  auto intent_index = name_index(intent_names);
  auto tag_index = name_index(tag_names);

  std::vector<ad::NodeId> sentence_embeddings;
  std::vector<ad::NodeId> token_embeddings;
  std::vector<std::size_t> gold_intents;
  std::vector<std::size_t> gold_tags;
  for (const auto& frame : queries) {
    ad::NodeId slot_tokens = embed_tokens(graph, encoder.slot_embedding, *encoder.vocab,
                                          frame.tokens);
    token_embeddings.push_back(slot_tokens);
    ad::NodeId intent_tokens = slot_tokens;
    if (encoder.intent_embedding != encoder.slot_embedding) {
      intent_tokens = embed_tokens(graph, encoder.intent_embedding, *encoder.vocab, frame.tokens);
    }
    sentence_embeddings.push_back(embed_sentence(graph, intent_tokens));
    auto ii = intent_index.find(frame.intent);
    if (ii == intent_index.end()) {
      raise(ErrorKind::Validation,
            "task_cross_entropy: gold intent '" + frame.intent + "' has no prototype");
    }
    gold_intents.push_back(ii->second);
    for (const auto& tag : frame.slot_tags) {
      auto ti = tag_index.find(tag);
      if (ti == tag_index.end()) {
        raise(ErrorKind::Validation, "task_cross_entropy: gold tag '" + tag + "' has no prototype");
      }
      gold_tags.push_back(ti->second);
    }
  }

  TaskLosses losses;
  ad::NodeId query_matrix = graph.stack_rows(sentence_embeddings);  // [Q x d]
  losses.intent_logits = graph.matmul(query_matrix, graph.transpose(intent_protos));
  losses.ce_intent = graph.cross_entropy_from_logits(losses.intent_logits, gold_intents);

  ad::NodeId token_matrix = graph.concat_rows(token_embeddings);  // [T x d]
  losses.slot_logits = graph.matmul(token_matrix, graph.transpose(slot_protos));
  losses.ce_slot = graph.cross_entropy_from_logits(losses.slot_logits, gold_tags);
  return losses;
}

}  // namespace conprom

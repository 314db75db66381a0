#include "conprom/merging.hpp"

#include <map>
#include <set>

#include "conprom/error.hpp"

namespace conprom {

std::vector<std::size_t> non_o_tag_indices(const std::vector<std::string>& tag_names) {
  std::vector<std::size_t> indices;
  for (std::size_t i = 0; i < tag_names.size(); ++i) {
    if (tag_names[i] != "O") indices.push_back(i);
  }
  return indices;
}

std::vector<std::vector<long long>> cooccurrence_counts(const SupportSet& support,
                                                        const std::vector<std::string>& intent_names,
                                                        const std::vector<std::string>& tag_names,
                                                        const std::vector<std::size_t>& non_o_tags) {
  std::map<std::string, std::size_t> intent_index;
  for (std::size_t i = 0; i < intent_names.size(); ++i) intent_index[intent_names[i]] = i;
  std::map<std::string, std::size_t> column;
  for (std::size_t j = 0; j < non_o_tags.size(); ++j) column[tag_names[non_o_tags[j]]] = j;

  std::vector<std::vector<long long>> counts(intent_names.size(),
                                             std::vector<long long>(non_o_tags.size(), 0));
  for (const auto& frame : support.frames) {
    auto ii = intent_index.find(frame.intent);
    if (ii == intent_index.end()) continue;
    std::set<std::string> seen(frame.slot_tags.begin(), frame.slot_tags.end());
    for (const auto& tag : seen) {
      auto cj = column.find(tag);
      if (cj != column.end()) ++counts[ii->second][cj->second];
    }
  }
  return counts;
}

ad::Tensor stat_attention(const std::vector<std::vector<long long>>& counts) {
  std::size_t rows = counts.size();
  std::size_t cols = rows ? counts[0].size() : 0;
  ad::Tensor a = ad::Tensor::zeros({rows, cols});
  for (std::size_t i = 0; i < rows; ++i) {
    long long total = 0;
    for (long long c : counts[i]) total += c;
    for (std::size_t j = 0; j < cols; ++j) {
      a.at(i, j) = total > 0 ? static_cast<double>(counts[i][j]) / static_cast<double>(total)
                             : 1.0 / static_cast<double>(cols);
    }
  }
  return a;
}

ad::NodeId representation_attention(ad::Graph& graph, ad::NodeId intent_protos,
                                    ad::NodeId slot_protos_non_o, const MergeParamRefs& params) {
  const ad::Tensor& ci = graph.value(intent_protos);
  const ad::Tensor& cs = graph.value(slot_protos_non_o);
  if (ci.rank() != 2 || cs.rank() != 2 || ci.shape[1] != cs.shape[1]) {
    raise(ErrorKind::InvalidArgument, "representation_attention: prototype shapes " +
                                          shape_str(ci) + " and " + shape_str(cs) +
                                          " are inconsistent");
  }
  std::size_t n_intents = ci.shape[0];
  std::size_t n_slots = cs.shape[0];

  // Rows of C * W^T are W * C_i; same for U.
  ad::NodeId wi = graph.matmul(intent_protos, graph.transpose(params.w));   // [N_I x h]
  ad::NodeId us = graph.matmul(slot_protos_non_o, graph.transpose(params.u));  // [N_T' x h]

  std::vector<ad::NodeId> score_rows;
  score_rows.reserve(n_intents);
  for (std::size_t i = 0; i < n_intents; ++i) {
    ad::NodeId wi_row = graph.row(wi, i);
    std::vector<ad::NodeId> scores;
    scores.reserve(n_slots);
    for (std::size_t j = 0; j < n_slots; ++j) {
      ad::NodeId pre = graph.tanh(graph.add(wi_row, graph.row(us, j)));
      scores.push_back(graph.dot(params.v, pre));
    }
    score_rows.push_back(graph.stack_scalars(scores));
  }
  return graph.row_softmax(graph.stack_rows(score_rows));
}

AttentionState build_attention(ad::Graph& graph, const SupportSet& support,
                               const PrototypeSet& protos, const MergeParamRefs& params,
                               double lambda) {
  AttentionState state;
  state.non_o_tags = non_o_tag_indices(protos.tag_names);
  if (state.non_o_tags.empty()) {
    raise(ErrorKind::InvalidArgument, "build_attention: support carries no non-O tags");
  }
  state.counts = cooccurrence_counts(support, protos.intent_names, protos.tag_names,
                                     state.non_o_tags);
  state.a_stat = graph.constant(stat_attention(state.counts));
  ad::NodeId slot_non_o = graph.gather_rows(protos.slot_protos, state.non_o_tags);
  state.a_repr = representation_attention(graph, protos.intent_protos, slot_non_o, params);
  state.a_final = graph.add(graph.scale(state.a_stat, lambda),
                            graph.scale(state.a_repr, 1.0 - lambda));
  return state;
}

MergedPrototypes merge_prototypes(ad::Graph& graph, const PrototypeSet& protos,
                                  const AttentionState& attention, double alpha) {
  ad::NodeId slot_non_o = graph.gather_rows(protos.slot_protos, attention.non_o_tags);

  // C_intent^F = A * C_slot ; C_slot^F = A^T * C_intent (column weights, not
  // renormalized).
  ad::NodeId fused_intent = graph.matmul(attention.a_final, slot_non_o);
  ad::NodeId fused_slot = graph.matmul(graph.transpose(attention.a_final), protos.intent_protos);

  MergedPrototypes merged;
  merged.intent = graph.add(graph.scale(fused_intent, alpha),
                            graph.scale(protos.intent_protos, 1.0 - alpha));
  ad::NodeId merged_non_o = graph.add(graph.scale(fused_slot, alpha),
                                      graph.scale(slot_non_o, 1.0 - alpha));

  // Reassemble the full slot matrix in tag order, "O" bypassing the fusion.
  std::map<std::size_t, std::size_t> non_o_position;
  for (std::size_t j = 0; j < attention.non_o_tags.size(); ++j) {
    non_o_position[attention.non_o_tags[j]] = j;
  }
  std::vector<ad::NodeId> slot_rows;
  for (std::size_t t = 0; t < protos.tag_names.size(); ++t) {
    auto it = non_o_position.find(t);
    if (it == non_o_position.end()) {
      slot_rows.push_back(graph.row(protos.slot_protos, t));
    } else {
      slot_rows.push_back(graph.row(merged_non_o, it->second));
    }
  }
  merged.slot = graph.stack_rows(slot_rows);
  return merged;
}

}  // namespace conprom

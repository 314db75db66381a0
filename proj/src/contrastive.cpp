#include "conprom/contrastive.hpp"

#include "conprom/error.hpp"

namespace conprom {

RelatednessSets relatedness_from_counts(const std::vector<std::vector<long long>>& counts) {
  RelatednessSets sets;
  sets.related.resize(counts.size());
  sets.unrelated.resize(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) {
    for (std::size_t j = 0; j < counts[i].size(); ++j) {
      (counts[i][j] > 0 ? sets.related : sets.unrelated)[i].push_back(j);
    }
  }
  return sets;
}

namespace {

// max(0, m - ||a - b||)^2 as a graph node.
ad::NodeId hinge_sq(ad::Graph& g, ad::NodeId a, ad::NodeId b, double margin) {
  ad::NodeId dist = g.euclidean_distance(a, b);
  ad::NodeId gap = g.subtract(g.constant(ad::Tensor::scalar(margin)), dist);
  return g.square(g.relu(gap));
}

ad::NodeId zero(ad::Graph& g) { return g.constant(ad::Tensor::scalar(0.0)); }

}  // namespace

ad::NodeId intra_loss(ad::Graph& graph, ad::NodeId protos, double margin) {
  const ad::Tensor& p = graph.value(protos);
  if (p.rank() != 2) raise(ErrorKind::InvalidArgument, "intra_loss: prototypes must be a matrix");
  std::size_t n = p.shape[0];
  if (n < 2) return zero(graph);

  std::vector<ad::NodeId> rows;
  rows.reserve(n);
  for (std::size_t i = 0; i < n; ++i) rows.push_back(graph.row(protos, i));

  // Ordered pairs i != j; the diagonal is excluded (it would only add a
  // constant m^2 per class).
  std::vector<ad::NodeId> terms;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      terms.push_back(hinge_sq(graph, rows[i], rows[j], margin));
    }
  }
  ad::NodeId total = graph.sum(graph.stack_scalars(terms));
  return graph.scale(total, 1.0 / static_cast<double>(n * n));
}

ad::NodeId inter_loss(ad::Graph& graph, ad::NodeId intent_protos, ad::NodeId slot_protos_non_o,
                      const RelatednessSets& relatedness, double margin) {
  const ad::Tensor& ci = graph.value(intent_protos);
  std::size_t n_intents = ci.shape[0];
  if (relatedness.related.size() != n_intents || relatedness.unrelated.size() != n_intents) {
    raise(ErrorKind::InvalidArgument, "inter_loss: relatedness does not cover all intents");
  }

  std::vector<ad::NodeId> terms;
  for (std::size_t i = 0; i < n_intents; ++i) {
    ad::NodeId intent_row = graph.row(intent_protos, i);
    const auto& related = relatedness.related[i];
    const auto& unrelated = relatedness.unrelated[i];
    if (!related.empty()) {
      std::vector<ad::NodeId> attract;
      for (std::size_t j : related) {
        ad::NodeId dist = graph.euclidean_distance(intent_row, graph.row(slot_protos_non_o, j));
        attract.push_back(graph.square(dist));
      }
      terms.push_back(graph.scale(graph.sum(graph.stack_scalars(attract)),
                                  1.0 / (2.0 * static_cast<double>(related.size()))));
    }
    if (!unrelated.empty()) {
      std::vector<ad::NodeId> repel;
      for (std::size_t j : unrelated) {
        repel.push_back(hinge_sq(graph, intent_row, graph.row(slot_protos_non_o, j), margin));
      }
      terms.push_back(graph.scale(graph.sum(graph.stack_scalars(repel)),
                                  1.0 / (2.0 * static_cast<double>(unrelated.size()))));
    }
  }
  if (terms.empty()) return zero(graph);
  return graph.sum(graph.stack_scalars(terms));
}

ContrastiveTerms contrastive_loss(ad::Graph& graph, ad::NodeId intent_protos,
                                  ad::NodeId slot_protos_non_o,
                                  const RelatednessSets& relatedness,
                                  const ContrastiveConfig& config) {
  ContrastiveTerms terms;
  if (!config.enabled) {
    terms.intra = zero(graph);
    terms.inter = zero(graph);
    terms.total = zero(graph);
    return terms;
  }
  ad::NodeId intra_intent = intra_loss(graph, intent_protos, config.margin);
  ad::NodeId intra_slot = slot_protos_non_o >= 0
                              ? intra_loss(graph, slot_protos_non_o, config.margin)
                              : zero(graph);
  terms.intra = graph.scale(graph.add(intra_intent, intra_slot), 0.5);
  terms.inter = slot_protos_non_o >= 0
                    ? inter_loss(graph, intent_protos, slot_protos_non_o, relatedness,
                                 config.margin)
                    : zero(graph);
  terms.total = graph.add(terms.inter, terms.intra);
  return terms;
}

}  // namespace conprom

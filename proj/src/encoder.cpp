#include "conprom/encoder.hpp"

#include <algorithm>
#include <set>

#include "conprom/error.hpp"

namespace conprom {

TokenVocab TokenVocab::build(std::vector<std::string> tokens) {
  std::set<std::string> unique(tokens.begin(), tokens.end());
  unique.insert(kUnkToken);
  TokenVocab vocab;
  vocab.tokens.assign(unique.begin(), unique.end());
  for (std::size_t i = 0; i < vocab.tokens.size(); ++i) vocab.index[vocab.tokens[i]] = i;
  return vocab;
}

TokenVocab TokenVocab::from_dataset(const Dataset& dataset) {
  std::vector<std::string> tokens;
  for (const auto& domain : dataset.train) {
    for (const auto& frame : domain.frames) {
      tokens.insert(tokens.end(), frame.tokens.begin(), frame.tokens.end());
    }
  }
  return build(std::move(tokens));
}

std::size_t TokenVocab::lookup(const std::string& token) const {
  auto it = index.find(token);
  if (it != index.end()) return it->second;
  return index.at(kUnkToken);
}

ad::Tensor init_embedding(std::size_t vocab_size, std::size_t dim, Rng& rng) {
  ad::Tensor t = ad::Tensor::zeros({vocab_size, dim});
  for (double& v : t.values) v = rng.uniform(-0.1, 0.1);
  return t;
}

ad::NodeId embed_tokens(ad::Graph& graph, ad::NodeId embedding_matrix, const TokenVocab& vocab,
                        const std::vector<std::string>& tokens) {
  if (tokens.empty()) raise(ErrorKind::InvalidArgument, "embed_tokens: empty token sequence");
  std::vector<std::size_t> ids;
  ids.reserve(tokens.size());
  for (const auto& token : tokens) ids.push_back(vocab.lookup(token));
  return graph.gather_rows(embedding_matrix, std::move(ids));
}

ad::NodeId embed_sentence(ad::Graph& graph, ad::NodeId token_embeddings) {
  return graph.mean_rows(token_embeddings);
}

}  // namespace conprom

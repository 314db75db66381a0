#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "conprom/autodiff.hpp"
#include "conprom/corpus.hpp"
#include "conprom/rng.hpp"

namespace conprom {

inline constexpr const char* kUnkToken = "<UNK>";

// Token vocabulary with a guaranteed <UNK> entry. Order is sorted so token
// ids are stable across runs.
struct TokenVocab {
  std::vector<std::string> tokens;
  std::unordered_map<std::string, std::size_t> index;

  static TokenVocab build(std::vector<std::string> tokens);
  // Vocabulary from the train split; dev/test OOV maps to <UNK>.
  static TokenVocab from_dataset(const Dataset& dataset);

  std::size_t size() const { return tokens.size(); }
  std::size_t lookup(const std::string& token) const;
};

// Uniform [-0.1, 0.1] embedding table [vocab x dim].
ad::Tensor init_embedding(std::size_t vocab_size, std::size_t dim, Rng& rng);

// Row k is the embedding of token k (<UNK> row for OOV). Differentiable
// w.r.t. the embedding matrix. Empty token sequences are an error.
ad::NodeId embed_tokens(ad::Graph& graph, ad::NodeId embedding_matrix, const TokenVocab& vocab,
                        const std::vector<std::string>& tokens);

// Sentence embedding: arithmetic mean over token rows.
ad::NodeId embed_sentence(ad::Graph& graph, ad::NodeId token_embeddings);

}  // namespace conprom

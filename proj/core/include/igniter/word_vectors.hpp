#pragma once

#include <string>

#include "igniter/corpus.hpp"
#include "igniter/linalg.hpp"

namespace igniter {

/// Pre-trained word embeddings. Rows follow file order; two extra all-zero
/// rows are appended for PAD and OOV (ids in `index`).
struct WordEmbeddingTable {
  Mat<double> vectors;  // (vocab + 2) x g1
  TokenIndex index;
  int g1 = 0;

  std::int64_t vocab_size() const { return vectors.rows() - 2; }
};

/// Text format: one "token v1 ... v_g1" per line; an optional leading
/// "vocab_size dim" header line is auto-detected. Duplicate tokens keep the
/// first occurrence.
WordEmbeddingTable load_word_vectors(const std::string& path);

}  // namespace igniter

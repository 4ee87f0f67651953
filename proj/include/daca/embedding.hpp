#pragma once

#include <cstddef>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace daca {

inline constexpr std::size_t kEmbedDim = 4096;

struct EmbeddingVector {
  std::size_t dims = 0;
  std::vector<double> values;
  bool normalized = false;

  bool is_zero() const;
};

// Copy scaled to unit L2 norm; the zero vector is returned unchanged.
EmbeddingVector normalize(EmbeddingVector v);

// dot(a,b) / (|a||b|). Throws PreconditionError on dimension mismatch or a
// zero vector.
double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b);

const std::set<std::string>& stopwords();
// Lowercased tokens with stopwords removed.
std::vector<std::string> content_tokens(std::string_view text);

// Signed feature hashing of content tokens into kEmbedDim buckets, L2
// normalised. No content tokens gives the zero vector.
EmbeddingVector hash_embed(std::string_view text);
std::size_t hash_bucket(std::string_view token);
double hash_sign(std::string_view token);

}  // namespace daca

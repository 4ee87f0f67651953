#include "daca/embedding.hpp"

#include <algorithm>
#include <cmath>

#include "daca/builtin_data.hpp"
#include "daca/error.hpp"
#include "daca/text.hpp"

namespace daca {

namespace {
constexpr std::uint64_t kSignBasis = 0x84222325cbf29ce4ULL;
}

bool EmbeddingVector::is_zero() const {
  return std::all_of(values.begin(), values.end(), [](double x) { return x == 0.0; });
}

EmbeddingVector normalize(EmbeddingVector v) {
  double sq = 0;
  for (double x : v.values) sq += x * x;
  if (sq == 0) return v;
  const double n = std::sqrt(sq);
  for (double& x : v.values) x /= n;
  v.normalized = true;
  return v;
}

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dims != b.dims || a.values.size() != b.values.size())
    throw PreconditionError("dimension mismatch: " + std::to_string(a.dims) + " vs " + std::to_string(b.dims));
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    dot += a.values[i] * b.values[i];
    na += a.values[i] * a.values[i];
    nb += b.values[i] * b.values[i];
  }
  if (na == 0 || nb == 0) throw PreconditionError("cosine of a zero vector");
  const double c = dot / (std::sqrt(na) * std::sqrt(nb));
  return std::clamp(c, -1.0, 1.0);
}

const std::set<std::string>& stopwords() {
  static const std::set<std::string> words = [] {
    std::set<std::string> s;
    for (auto& line : text::split(builtin_file("stopwords.txt"), "\n")) {
      const std::string w = text::trim(line);
      if (!w.empty() && w[0] != '#') s.insert(text::to_lower(w));
    }
    return s;
  }();
  return words;
}

std::vector<std::string> content_tokens(std::string_view s) {
  auto toks = text::tokenize(s);
  const auto& stop = stopwords();
  toks.erase(std::remove_if(toks.begin(), toks.end(), [&](const std::string& t) { return stop.count(t) > 0; }),
             toks.end());
  return toks;
}

std::size_t hash_bucket(std::string_view token) { return text::fnv1a64(token) % kEmbedDim; }

double hash_sign(std::string_view token) { return (text::fnv1a64(token, kSignBasis) & 1) ? 1.0 : -1.0; }

EmbeddingVector hash_embed(std::string_view s) {
  EmbeddingVector v;
  v.dims = kEmbedDim;
  v.values.assign(kEmbedDim, 0.0);
  for (const auto& t : content_tokens(s)) v.values[hash_bucket(t)] += hash_sign(t);
  return normalize(std::move(v));
}

}  // namespace daca

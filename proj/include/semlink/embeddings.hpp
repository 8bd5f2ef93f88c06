#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace semlink {

inline constexpr std::size_t kDefaultEmbeddingDim = 100;

/// Token -> vector table read from GloVe-style text (`token v1 ... vd`).
class WordVectorTable {
 public:
  explicit WordVectorTable(std::size_t dim = kDefaultEmbeddingDim) : dim_(dim) {}

  static WordVectorTable load(const std::filesystem::path& path,
                              std::size_t expected_dim = kDefaultEmbeddingDim);
  static WordVectorTable parse(std::istream& in, std::size_t expected_dim = kDefaultEmbeddingDim);

  /// Replaces an existing vector for the same token.
  void insert(std::string token, std::vector<double> vector);

  /// nullptr when the token is absent.
  const std::vector<double>* find(std::string_view token) const;

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return vectors_.size(); }

 private:
  std::size_t dim_;
  std::unordered_map<std::string, std::vector<double>> vectors_;
};

struct EntityEmbedding {
  std::vector<double> vector;
  std::vector<std::string> source_tokens;
};

/// Lowercases and whitespace-splits the label, then averages the vectors of
/// the in-vocabulary tokens. Throws kOutOfVocabulary when none is known.
EntityEmbedding embed_entity(const WordVectorTable& table, std::string_view label);

struct EntitySetEmbedding {
  std::vector<double> vector;
  /// Labels that contributed nothing (all tokens out of vocabulary).
  std::vector<std::string> skipped;
};

/// Mean of embed_entity over the embeddable labels.
EntitySetEmbedding embed_entity_set(const WordVectorTable& table, std::span<const std::string> labels);

}  // namespace semlink

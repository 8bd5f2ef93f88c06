#include "semlink/embeddings.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>

#include "semlink/error.hpp"
#include "text_util.hpp"

namespace semlink {

WordVectorTable WordVectorTable::load(const std::filesystem::path& path, std::size_t expected_dim) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kFileMissing, "cannot open word vectors " + path.string());
  return parse(in, expected_dim);
}

WordVectorTable WordVectorTable::parse(std::istream& in, std::size_t expected_dim) {
  if (expected_dim == 0) throw Error(ErrorCode::kInvalidArgument, "embedding dimension must be positive");
  WordVectorTable table(expected_dim);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto fields = detail::split_whitespace(line);
    if (fields.empty()) continue;
    if (fields.size() - 1 != expected_dim) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "expected " + std::to_string(expected_dim) + " values, found " +
                      std::to_string(fields.size() - 1),
                  line_no);
    }
    std::vector<double> vec(expected_dim);
    for (std::size_t i = 0; i < expected_dim; ++i) {
      std::string_view f = fields[i + 1];
      auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), vec[i]);
      if (ec != std::errc() || ptr != f.data() + f.size()) {
        throw Error(ErrorCode::kParse, "unparseable number '" + std::string(f) + "'", line_no);
      }
    }
    table.insert(std::string(fields[0]), std::move(vec));
  }
  if (table.size() == 0) throw Error(ErrorCode::kEmpty, "word vector file has no entries");
  return table;
}

void WordVectorTable::insert(std::string token, std::vector<double> vector) {
  if (vector.size() != dim_) {
    throw Error(ErrorCode::kDimensionMismatch, "vector for '" + token + "' has length " +
                                                   std::to_string(vector.size()));
  }
  vectors_.insert_or_assign(std::move(token), std::move(vector));
}

const std::vector<double>* WordVectorTable::find(std::string_view token) const {
  auto it = vectors_.find(std::string(token));
  return it == vectors_.end() ? nullptr : &it->second;
}

EntityEmbedding embed_entity(const WordVectorTable& table, std::string_view label) {
  if (detail::trim(label).empty()) throw Error(ErrorCode::kInvalidArgument, "empty entity label");
  const std::string lowered = detail::to_lower(label);

  EntityEmbedding out;
  out.vector.assign(table.dim(), 0.0);
  for (std::string_view token : detail::split_whitespace(lowered)) {
    const auto* v = table.find(token);
    if (v == nullptr) continue;
    for (std::size_t i = 0; i < v->size(); ++i) out.vector[i] += (*v)[i];
    out.source_tokens.emplace_back(token);
  }
  if (out.source_tokens.empty()) {
    throw Error(ErrorCode::kOutOfVocabulary, "no token of '" + std::string(label) + "' is in vocabulary");
  }
  const double n = static_cast<double>(out.source_tokens.size());
  for (double& x : out.vector) x /= n;
  return out;
}

EntitySetEmbedding embed_entity_set(const WordVectorTable& table, std::span<const std::string> labels) {
  if (labels.empty()) throw Error(ErrorCode::kEmpty, "empty entity label list");
  EntitySetEmbedding out;
  std::vector<std::pair<std::string_view, std::vector<double>>> embedded;
  for (const std::string& label : labels) {
    try {
      embedded.emplace_back(label, embed_entity(table, label).vector);
    } catch (const Error& err) {
      if (err.code() != ErrorCode::kOutOfVocabulary && err.code() != ErrorCode::kInvalidArgument) throw;
      out.skipped.push_back(label);
    }
  }
  if (embedded.empty()) throw Error(ErrorCode::kOutOfVocabulary, "no embeddable entity label");

  // Sum in sorted label order so any permutation of the input gives a
  // bit-identical mean.
  std::sort(embedded.begin(), embedded.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  out.vector.assign(table.dim(), 0.0);
  for (const auto& [label, vec] : embedded) {
    for (std::size_t i = 0; i < vec.size(); ++i) out.vector[i] += vec[i];
  }
  for (double& x : out.vector) x /= static_cast<double>(embedded.size());
  return out;
}

}  // namespace semlink

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace semlink {

/// A directed fact (head, relation, tail).
struct Triple {
  std::string head;
  std::string relation;
  std::string tail;

  bool operator==(const Triple&) const = default;
};

struct TripleHash {
  std::size_t operator()(const Triple& t) const noexcept;
};

/// Closed-world knowledge base: entity set E, relation set R and triple set H,
/// each kept in first-occurrence order. Anything not in H is false.
class KnowledgeBase {
 public:
  KnowledgeBase() = default;

  /// Reads the TSV format: `head<TAB>relation<TAB>tail` per line, `#` comments,
  /// blank lines skipped, labels whitespace-trimmed.
  static KnowledgeBase load(const std::filesystem::path& path);
  static KnowledgeBase parse(std::istream& in);

  void save(const std::filesystem::path& path) const;
  void write(std::ostream& out) const;

  /// Returns false when the triple was already present.
  bool add(Triple triple);

  bool contains(const Triple& t) const { return triple_set_.contains(t); }

  const std::vector<std::string>& entities() const { return entities_; }
  const std::vector<std::string>& relations() const { return relations_; }
  const std::vector<Triple>& triples() const { return triples_; }

  std::optional<std::size_t> entity_index(std::string_view label) const;
  std::optional<std::size_t> relation_index(std::string_view label) const;

  std::vector<Triple> triples_with_relation(std::string_view relation) const;

 private:
  static void intern(std::vector<std::string>& order,
                     std::unordered_map<std::string, std::size_t>& index,
                     const std::string& label);

  std::vector<std::string> entities_;
  std::vector<std::string> relations_;
  std::vector<Triple> triples_;
  std::unordered_map<std::string, std::size_t> entity_index_;
  std::unordered_map<std::string, std::size_t> relation_index_;
  std::unordered_set<Triple, TripleHash> triple_set_;
};

inline bool contains_triple(const KnowledgeBase& kb, const Triple& t) { return kb.contains(t); }

struct KbSplit {
  std::vector<Triple> kept;
  std::vector<Triple> held_out;
};

/// Seeded permutation of H; the first round(keep_fraction * |H|) triples are
/// kept, the rest held out. Both halves stay in permutation order.
KbSplit split_kb(const KnowledgeBase& kb, double keep_fraction, std::uint64_t seed);

}  // namespace semlink

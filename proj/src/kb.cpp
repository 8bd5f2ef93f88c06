#include "semlink/kb.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include "semlink/error.hpp"
#include "semlink/rng.hpp"
#include "text_util.hpp"

namespace semlink {

std::size_t TripleHash::operator()(const Triple& t) const noexcept {
  std::hash<std::string> h;
  std::size_t seed = h(t.head);
  seed ^= h(t.relation) + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2);
  seed ^= h(t.tail) + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2);
  return seed;
}

KnowledgeBase KnowledgeBase::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kFileMissing, "cannot open knowledge base " + path.string());
  return parse(in);
}

KnowledgeBase KnowledgeBase::parse(std::istream& in) {
  KnowledgeBase kb;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view trimmed = detail::trim(line);
    if (trimmed.empty() || trimmed.front() == '#') continue;

    std::vector<std::string_view> fields = detail::split(line, '\t');
    if (fields.size() != 3) {
      throw Error(ErrorCode::kMalformedLine,
                  "expected 3 tab-separated fields, found " + std::to_string(fields.size()),
                  line_no);
    }
    Triple t;
    t.head = std::string(detail::trim(fields[0]));
    t.relation = std::string(detail::trim(fields[1]));
    t.tail = std::string(detail::trim(fields[2]));
    if (t.head.empty() || t.relation.empty() || t.tail.empty()) {
      throw Error(ErrorCode::kEmptyField, "empty head, relation or tail", line_no);
    }
    kb.add(std::move(t));
  }
  return kb;
}

void KnowledgeBase::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kFileMissing, "cannot write " + path.string());
  write(out);
}

void KnowledgeBase::write(std::ostream& out) const {
  for (const Triple& t : triples_) out << t.head << '\t' << t.relation << '\t' << t.tail << '\n';
}

void KnowledgeBase::intern(std::vector<std::string>& order,
                           std::unordered_map<std::string, std::size_t>& index,
                           const std::string& label) {
  if (index.emplace(label, order.size()).second) order.push_back(label);
}

bool KnowledgeBase::add(Triple triple) {
  if (triple_set_.contains(triple)) return false;
  intern(entities_, entity_index_, triple.head);
  intern(relations_, relation_index_, triple.relation);
  intern(entities_, entity_index_, triple.tail);
  triple_set_.insert(triple);
  triples_.push_back(std::move(triple));
  return true;
}

std::optional<std::size_t> KnowledgeBase::entity_index(std::string_view label) const {
  auto it = entity_index_.find(std::string(label));
  if (it == entity_index_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::size_t> KnowledgeBase::relation_index(std::string_view label) const {
  auto it = relation_index_.find(std::string(label));
  if (it == relation_index_.end()) return std::nullopt;
  return it->second;
}

std::vector<Triple> KnowledgeBase::triples_with_relation(std::string_view relation) const {
  std::vector<Triple> out;
  for (const Triple& t : triples_) {
    if (t.relation == relation) out.push_back(t);
  }
  return out;
}

KbSplit split_kb(const KnowledgeBase& kb, double keep_fraction, std::uint64_t seed) {
  if (!(keep_fraction >= 0.0 && keep_fraction <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "keep_fraction must lie in [0, 1]");
  }
  const auto& triples = kb.triples();
  const auto n_keep = static_cast<std::size_t>(std::llround(keep_fraction * static_cast<double>(triples.size())));
  const auto order = permutation(triples.size(), derive_seed(seed, Stream::kKbSplit));

  KbSplit split;
  split.kept.reserve(n_keep);
  split.held_out.reserve(triples.size() - n_keep);
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < n_keep ? split.kept : split.held_out).push_back(triples[order[i]]);
  }
  return split;
}

}  // namespace semlink

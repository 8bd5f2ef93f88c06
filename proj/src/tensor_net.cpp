#include "semlink/tensor_net.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "semlink/error.hpp"
#include "semlink/nn.hpp"
#include "semlink/rng.hpp"

namespace semlink {

namespace {

void check_inputs(const NtlRelationParams& p, std::span<const double> h, std::span<const double> t) {
  p.validate();
  if (h.size() != p.d || t.size() != p.d) {
    throw Error(ErrorCode::kShapeMismatch, "entity vectors must have length " + std::to_string(p.d));
  }
  for (std::size_t i = 0; i < p.d; ++i) {
    if (!std::isfinite(h[i]) || !std::isfinite(t[i])) {
      throw Error(ErrorCode::kNonFinite, "entity vector entry is not finite");
    }
  }
}

// Pre-activations z_i = h^T W_i t + V_i [h; t] + b_i.
std::vector<double> pre_activations(const NtlRelationParams& p, std::span<const double> h,
                                    std::span<const double> t) {
  const std::size_t d = p.d;
  std::vector<double> z(p.k);
  for (std::size_t i = 0; i < p.k; ++i) {
    const double* slice = p.weights.data() + i * d * d;
    double bilinear = 0.0;
    for (std::size_t a = 0; a < d; ++a) {
      double row = 0.0;
      for (std::size_t b = 0; b < d; ++b) row += slice[a * d + b] * t[b];
      bilinear += h[a] * row;
    }
    const double* v = p.linear.data() + i * 2 * d;
    double linear = 0.0;
    for (std::size_t a = 0; a < d; ++a) linear += v[a] * h[a] + v[d + a] * t[a];
    z[i] = bilinear + linear + p.bias[i];
  }
  return z;
}

void fill_uniform(std::vector<double>& values, Rng& rng, double limit) {
  for (double& v : values) v = rng.uniform(-limit, limit);
}

std::string in_quotes(std::string_view s) { return "'" + std::string(s) + "'"; }

}  // namespace

NtlRelationParams::NtlRelationParams(std::size_t d_, std::size_t k_)
    : d(d_), k(k_), weights(k_ * d_ * d_, 0.0), linear(k_ * 2 * d_, 0.0), bias(k_, 0.0) {}

void NtlRelationParams::validate() const {
  if (d == 0 || k == 0 || weights.size() != k * d * d || linear.size() != k * 2 * d || bias.size() != k) {
    throw Error(ErrorCode::kShapeMismatch, "tensor layer parameters do not match (d, k) = (" +
                                               std::to_string(d) + ", " + std::to_string(k) + ")");
  }
  auto finite = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
  };
  if (!finite(weights) || !finite(linear) || !finite(bias)) {
    throw Error(ErrorCode::kNonFinite, "tensor layer parameter is not finite");
  }
}

std::vector<double> ntl_score_vector(const NtlRelationParams& p, std::span<const double> h,
                                     std::span<const double> t) {
  check_inputs(p, h, t);
  std::vector<double> s = pre_activations(p, h, t);
  for (double& v : s) v = std::tanh(v);
  return s;
}

double ntl_score(const NtlRelationParams& p, std::span<const double> h, std::span<const double> t) {
  double total = 0.0;
  for (double v : ntl_score_vector(p, h, t)) total += v;
  return total;
}

NtlGradients ntl_gradients(const NtlRelationParams& p, std::span<const double> h, std::span<const double> t) {
  check_inputs(p, h, t);
  const std::size_t d = p.d;
  const std::vector<double> z = pre_activations(p, h, t);

  NtlGradients g;
  g.weights.assign(p.weights.size(), 0.0);
  g.linear.assign(p.linear.size(), 0.0);
  g.bias.assign(p.k, 0.0);
  g.head.assign(d, 0.0);
  g.tail.assign(d, 0.0);
  for (std::size_t i = 0; i < p.k; ++i) {
    const double s = std::tanh(z[i]);
    const double dz = 1.0 - s * s;
    g.bias[i] = dz;

    const double* slice = p.weights.data() + i * d * d;
    double* gslice = g.weights.data() + i * d * d;
    for (std::size_t a = 0; a < d; ++a) {
      for (std::size_t b = 0; b < d; ++b) {
        gslice[a * d + b] = dz * h[a] * t[b];
        g.head[a] += dz * slice[a * d + b] * t[b];
        g.tail[b] += dz * slice[a * d + b] * h[a];
      }
    }
    const double* v = p.linear.data() + i * 2 * d;
    double* gv = g.linear.data() + i * 2 * d;
    for (std::size_t a = 0; a < d; ++a) {
      gv[a] = dz * h[a];
      gv[d + a] = dz * t[a];
      g.head[a] += dz * v[a];
      g.tail[a] += dz * v[d + a];
    }
  }
  return g;
}

// ---------------------------------------------------------------------------

NtlModel::NtlModel(std::size_t d, std::size_t k) : d_(d), k_(k) {
  if (d == 0 || k == 0) throw Error(ErrorCode::kInvalidArgument, "d and k must be positive");
}

void NtlModel::add_entity(const std::string& label, std::vector<double> vector) {
  if (vector.size() != d_) {
    throw Error(ErrorCode::kShapeMismatch, "entity " + in_quotes(label) + " vector has length " +
                                               std::to_string(vector.size()));
  }
  if (!entity_vectors_.contains(label)) entities_.push_back(label);
  entity_vectors_.insert_or_assign(label, std::move(vector));
}

void NtlModel::add_relation(const std::string& label, NtlRelationParams params) {
  if (params.d != d_ || params.k != k_) {
    throw Error(ErrorCode::kShapeMismatch, "relation " + in_quotes(label) + " has mismatched (d, k)");
  }
  params.validate();
  if (!params_.contains(label)) relations_.push_back(label);
  params_.insert_or_assign(label, std::move(params));
}

const std::vector<double>& NtlModel::entity_vector(std::string_view label) const {
  auto it = entity_vectors_.find(std::string(label));
  if (it == entity_vectors_.end()) throw Error(ErrorCode::kUnknownEntity, "unknown entity " + in_quotes(label));
  return it->second;
}

const NtlRelationParams& NtlModel::relation_params(std::string_view label) const {
  auto it = params_.find(std::string(label));
  if (it == params_.end()) throw Error(ErrorCode::kUnknownLabel, "unknown relation " + in_quotes(label));
  return it->second;
}

NtlRelationParams& NtlModel::relation_params(std::string_view label) {
  auto it = params_.find(std::string(label));
  if (it == params_.end()) throw Error(ErrorCode::kUnknownLabel, "unknown relation " + in_quotes(label));
  return it->second;
}

double NtlModel::raw_score(std::string_view head, std::string_view relation, std::string_view tail) const {
  return ntl_score(relation_params(relation), entity_vector(head), entity_vector(tail));
}

std::vector<RankedEntity> NtlModel::rank_tails(std::string_view head, std::string_view relation) const {
  const auto& params = relation_params(relation);
  const auto& h = entity_vector(head);
  std::vector<RankedEntity> ranked;
  ranked.reserve(entities_.size());
  for (const std::string& e : entities_) {
    ranked.push_back({e, -ntl_score(params, h, entity_vector(e))});
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const RankedEntity& a, const RankedEntity& b) { return a.plausibility > b.plausibility; });
  return ranked;
}

nlohmann::ordered_json NtlModel::to_json() const {
  using json = nlohmann::ordered_json;
  json doc;
  doc["format_version"] = kCheckpointFormatVersion;
  doc["kind"] = "ntl";
  doc["d"] = d_;
  doc["k"] = k_;
  json relations = json::object();
  for (const std::string& r : relations_) {
    const auto& p = params_.at(r);
    json w = json::array();
    for (std::size_t i = 0; i < k_; ++i) {
      json slice = json::array();
      for (std::size_t a = 0; a < d_; ++a) {
        auto begin = p.weights.begin() + static_cast<std::ptrdiff_t>((i * d_ + a) * d_);
        slice.push_back(std::vector<double>(begin, begin + static_cast<std::ptrdiff_t>(d_)));
      }
      w.push_back(std::move(slice));
    }
    json v = json::array();
    for (std::size_t i = 0; i < k_; ++i) {
      auto begin = p.linear.begin() + static_cast<std::ptrdiff_t>(i * 2 * d_);
      v.push_back(std::vector<double>(begin, begin + static_cast<std::ptrdiff_t>(2 * d_)));
    }
    relations[r] = json{{"W", std::move(w)}, {"V", std::move(v)}, {"b", p.bias}};
  }
  doc["relations"] = std::move(relations);
  json entities = json::object();
  for (const std::string& e : entities_) entities[e] = entity_vectors_.at(e);
  doc["entities"] = std::move(entities);
  return doc;
}

NtlModel NtlModel::from_json(const nlohmann::ordered_json& doc) {
  try {
    if (doc.at("format_version").get<int>() != kCheckpointFormatVersion) {
      throw Error(ErrorCode::kParse, "unsupported checkpoint format_version");
    }
    if (doc.contains("kind") && doc.at("kind") != "ntl") {
      throw Error(ErrorCode::kParse, "checkpoint is not a tensor-layer model");
    }
    NtlModel model(doc.at("d").get<std::size_t>(), doc.at("k").get<std::size_t>());
    const std::size_t d = model.d_;
    const std::size_t k = model.k_;
    for (const auto& [label, rel] : doc.at("relations").items()) {
      NtlRelationParams p(d, k);
      const auto& w = rel.at("W");
      const auto& v = rel.at("V");
      if (w.size() != k || v.size() != k) throw Error(ErrorCode::kShapeMismatch, "relation " + in_quotes(label));
      for (std::size_t i = 0; i < k; ++i) {
        if (w[i].size() != d || v[i].size() != 2 * d) {
          throw Error(ErrorCode::kShapeMismatch, "relation " + in_quotes(label));
        }
        for (std::size_t a = 0; a < d; ++a) {
          auto row = w[i][a].get<std::vector<double>>();
          if (row.size() != d) throw Error(ErrorCode::kShapeMismatch, "relation " + in_quotes(label));
          std::copy(row.begin(), row.end(), p.weights.begin() + static_cast<std::ptrdiff_t>((i * d + a) * d));
        }
        auto vrow = v[i].get<std::vector<double>>();
        std::copy(vrow.begin(), vrow.end(), p.linear.begin() + static_cast<std::ptrdiff_t>(i * 2 * d));
      }
      p.bias = rel.at("b").get<std::vector<double>>();
      model.add_relation(label, std::move(p));
    }
    for (const auto& [label, vec] : doc.at("entities").items()) {
      model.add_entity(label, vec.get<std::vector<double>>());
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("malformed tensor-layer checkpoint: ") + e.what());
  }
}

void NtlModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kFileMissing, "cannot write " + path.string());
  out << to_json().dump(1) << '\n';
}

NtlModel NtlModel::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kFileMissing, "cannot open checkpoint " + path.string());
  nlohmann::ordered_json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("checkpoint is not valid JSON: ") + e.what());
  }
  return from_json(doc);
}

// ---------------------------------------------------------------------------

NtlTrainResult train_ntl(const KnowledgeBase& kb, const EntityVectors& entity_vectors,
                         const NtlTrainConfig& config) {
  if (kb.triples().empty()) throw Error(ErrorCode::kEmpty, "knowledge base has no triples");
  if (kb.entities().size() < 2) throw Error(ErrorCode::kInvalidArgument, "need at least two entities");
  if (config.k == 0) throw Error(ErrorCode::kInvalidArgument, "k must be positive");
  if (config.negatives_per_positive == 0) {
    throw Error(ErrorCode::kInvalidArgument, "negatives_per_positive must be positive");
  }

  const auto first = entity_vectors.find(kb.entities().front());
  if (first == entity_vectors.end()) {
    throw Error(ErrorCode::kMissingVector, "no vector for entity " + in_quotes(kb.entities().front()));
  }
  const std::size_t d = first->second.size();
  NtlModel model(d, config.k);
  for (const std::string& e : kb.entities()) {
    auto it = entity_vectors.find(e);
    if (it == entity_vectors.end()) throw Error(ErrorCode::kMissingVector, "no vector for entity " + in_quotes(e));
    model.add_entity(e, it->second);
  }

  // Parameters live in nn::Parameter buffers during training so Adam can
  // drive them; copied into the model at the end.
  struct RelationState {
    nn::Parameter weights, linear, bias;
    nn::Adam adam;
    std::vector<nn::Parameter*> list() { return {&weights, &linear, &bias}; }
  };
  std::vector<RelationState> states;
  states.reserve(kb.relations().size());
  for (std::size_t r = 0; r < kb.relations().size(); ++r) {
    RelationState s{nn::Parameter("W", {config.k, d, d}), nn::Parameter("V", {config.k, 2 * d}),
                    nn::Parameter("b", {config.k}), nn::Adam(config.lr)};
    Rng rng(derive_seed(config.seed, Stream::kInit, r));
    fill_uniform(s.weights.value, rng, 0.1);
    fill_uniform(s.linear.value, rng, 0.1);
    fill_uniform(s.bias.value, rng, 0.1);
    states.push_back(std::move(s));
  }

  // Filtered corruption candidates per positive triple.
  const auto& triples = kb.triples();
  std::vector<std::vector<std::size_t>> candidates(triples.size());
  for (std::size_t i = 0; i < triples.size(); ++i) {
    for (std::size_t e = 0; e < kb.entities().size(); ++e) {
      if (!kb.contains({triples[i].head, triples[i].relation, kb.entities()[e]})) candidates[i].push_back(e);
    }
  }

  auto params_of = [d, k = config.k](RelationState& s) {
    NtlRelationParams p;
    p.d = d;
    p.k = k;
    p.weights = s.weights.value;
    p.linear = s.linear.value;
    p.bias = s.bias.value;
    return p;
  };
  auto accumulate = [](RelationState& s, const NtlGradients& g, double sign) {
    for (std::size_t i = 0; i < g.weights.size(); ++i) s.weights.grad[i] += sign * g.weights[i];
    for (std::size_t i = 0; i < g.linear.size(); ++i) s.linear.grad[i] += sign * g.linear[i];
    for (std::size_t i = 0; i < g.bias.size(); ++i) s.bias.grad[i] += sign * g.bias[i];
  };

  NtlTrainResult result;
  const double n_neg = static_cast<double>(config.negatives_per_positive);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto order = permutation(triples.size(), derive_seed(config.seed, Stream::kEpoch, epoch));
    Rng negatives(derive_seed(config.seed, Stream::kNegatives, epoch));
    double total = 0.0;
    std::size_t pairs = 0;
    for (std::size_t idx : order) {
      if (candidates[idx].empty()) continue;
      const Triple& pos = triples[idx];
      RelationState& state = states[*kb.relation_index(pos.relation)];
      const NtlRelationParams p = params_of(state);
      const auto& h = model.entity_vector(pos.head);
      const auto& t = model.entity_vector(pos.tail);
      const double raw_pos = ntl_score(p, h, t);

      nn::zero_grad(state.list());
      bool active = false;
      for (std::size_t j = 0; j < config.negatives_per_positive; ++j) {
        const std::size_t neg = candidates[idx][negatives.below(candidates[idx].size())];
        const auto& t_neg = model.entity_vector(kb.entities()[neg]);
        // Plausibility is the negated raw score, so the hinge
        // max(0, margin - P(pos) + P(neg)) equals max(0, margin + S(pos) - S(neg)).
        const double loss = std::max(0.0, config.margin + raw_pos - ntl_score(p, h, t_neg));
        total += loss;
        ++pairs;
        if (loss > 0.0) {
          active = true;
          accumulate(state, ntl_gradients(p, h, t), 1.0 / n_neg);
          accumulate(state, ntl_gradients(p, h, t_neg), -1.0 / n_neg);
        }
      }
      if (active) state.adam.step(state.list());
    }
    result.epoch_loss.push_back(pairs == 0 ? 0.0 : total / static_cast<double>(pairs));
  }

  for (std::size_t r = 0; r < kb.relations().size(); ++r) {
    model.add_relation(kb.relations()[r], params_of(states[r]));
  }
  result.model = std::move(model);
  return result;
}

double hits_at_n(const NtlModel& model, std::span<const Triple> test_triples, std::size_t n) {
  if (n == 0) throw Error(ErrorCode::kInvalidArgument, "n must be at least 1");
  if (test_triples.empty()) throw Error(ErrorCode::kEmpty, "empty test set");
  std::size_t hits = 0;
  for (const Triple& t : test_triples) {
    model.entity_vector(t.tail);
    const auto ranked = model.rank_tails(t.head, t.relation);
    const std::size_t limit = std::min(n, ranked.size());
    for (std::size_t i = 0; i < limit; ++i) {
      if (ranked[i].entity == t.tail) {
        ++hits;
        break;
      }
    }
  }
  return static_cast<double>(hits) / static_cast<double>(test_triples.size());
}

}  // namespace semlink

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "semlink/kb.hpp"

namespace semlink {

/// Per-relation parameters of the neural tensor layer.
///   weights: k slices of d x d, slice-major (weights[(i*d + a)*d + b])
///   linear:  k x 2d, applied to the concatenation [h; t]
///   bias:    k
struct NtlRelationParams {
  std::size_t d = 0;
  std::size_t k = 0;
  std::vector<double> weights;
  std::vector<double> linear;
  std::vector<double> bias;

  NtlRelationParams() = default;
  NtlRelationParams(std::size_t d_, std::size_t k_);

  /// Throws kShapeMismatch / kNonFinite.
  void validate() const;
};

/// Component i: tanh(h^T W_i t + V_i [h; t] + b_i).
std::vector<double> ntl_score_vector(const NtlRelationParams& p, std::span<const double> h,
                                     std::span<const double> t);

/// Raw score: the sum of the slice activations, in (-k, k).
double ntl_score(const NtlRelationParams& p, std::span<const double> h, std::span<const double> t);

struct NtlGradients {
  std::vector<double> weights;
  std::vector<double> linear;
  std::vector<double> bias;
  std::vector<double> head;
  std::vector<double> tail;
};

/// Closed-form gradient of ntl_score w.r.t. every argument.
NtlGradients ntl_gradients(const NtlRelationParams& p, std::span<const double> h, std::span<const double> t);

struct RankedEntity {
  std::string entity;
  double plausibility;
};

/// Trained scorer over a fixed entity vocabulary. The raw score follows the
/// "low for true triples" polarity; plausibility is its negation and is what
/// ranking and the hinge loss use.
class NtlModel {
 public:
  NtlModel() = default;
  NtlModel(std::size_t d, std::size_t k);

  std::size_t d() const { return d_; }
  std::size_t k() const { return k_; }

  void add_entity(const std::string& label, std::vector<double> vector);
  void add_relation(const std::string& label, NtlRelationParams params);

  const std::vector<std::string>& entities() const { return entities_; }
  const std::vector<std::string>& relations() const { return relations_; }
  const std::vector<double>& entity_vector(std::string_view label) const;
  const NtlRelationParams& relation_params(std::string_view label) const;
  NtlRelationParams& relation_params(std::string_view label);

  double raw_score(std::string_view head, std::string_view relation, std::string_view tail) const;
  double plausibility(std::string_view head, std::string_view relation, std::string_view tail) const {
    return -raw_score(head, relation, tail);
  }

  /// All entities, most plausible first; ties keep entity order.
  std::vector<RankedEntity> rank_tails(std::string_view head, std::string_view relation) const;

  nlohmann::ordered_json to_json() const;
  static NtlModel from_json(const nlohmann::ordered_json& doc);
  void save(const std::filesystem::path& path) const;
  static NtlModel load(const std::filesystem::path& path);

 private:
  std::size_t d_ = 0;
  std::size_t k_ = 0;
  std::vector<std::string> entities_;
  std::vector<std::string> relations_;
  std::unordered_map<std::string, std::vector<double>> entity_vectors_;
  std::unordered_map<std::string, NtlRelationParams> params_;
};

using EntityVectors = std::unordered_map<std::string, std::vector<double>>;

struct NtlTrainConfig {
  std::size_t k = 4;
  double margin = 1.0;
  double lr = 0.01;
  std::size_t epochs = 200;
  std::size_t negatives_per_positive = 1;
  std::uint64_t seed = 0;
};

struct NtlTrainResult {
  NtlModel model;
  /// Mean hinge loss max(0, margin - P(true) + P(corrupt)) per epoch.
  std::vector<double> epoch_loss;
};

/// Margin ranking with filtered tail corruption and Adam, one step per
/// positive triple. Entity vectors are frozen.
NtlTrainResult train_ntl(const KnowledgeBase& kb, const EntityVectors& entity_vectors,
                         const NtlTrainConfig& config);

/// Fraction of triples whose true tail is in the top n of rank_tails.
double hits_at_n(const NtlModel& model, std::span<const Triple> test_triples, std::size_t n);

inline constexpr int kCheckpointFormatVersion = 1;

}  // namespace semlink

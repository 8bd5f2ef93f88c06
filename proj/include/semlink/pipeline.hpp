#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "semlink/detect.hpp"
#include "semlink/embeddings.hpp"
#include "semlink/models.hpp"

namespace semlink {

/// The 12 image classes; position = one-hot index.
class LabelVocabulary {
 public:
  explicit LabelVocabulary(std::vector<std::string> labels);

  /// One label per line; blank lines ignored; exactly 12 unique labels.
  static LabelVocabulary load(const std::filesystem::path& path);
  static LabelVocabulary parse(std::istream& in);
  /// The class list of the original image collection.
  static LabelVocabulary defaults();

  std::optional<std::size_t> index_of(std::string_view label) const;
  const std::string& label(std::size_t index) const { return labels_.at(index); }
  const std::vector<std::string>& labels() const { return labels_; }
  std::size_t size() const { return labels_.size(); }

 private:
  std::vector<std::string> labels_;
};

struct FeatureRecord {
  std::string image_id;
  std::size_t label = 0;
  std::vector<std::string> entity_labels;
  std::vector<double> image_feature;
};

struct Dataset {
  std::vector<FeatureRecord> records;
  LabelVocabulary vocabulary = LabelVocabulary::defaults();
};

/// JSON Lines: {"image_id", "label", "entities", "vgg"} per line.
Dataset read_features(const std::filesystem::path& path, const LabelVocabulary& vocabulary,
                      std::size_t feature_dim = kImageFeatureDim);
Dataset parse_features(std::istream& in, const LabelVocabulary& vocabulary,
                       std::size_t feature_dim = kImageFeatureDim);

struct ImageDetections {
  std::string image_id;
  std::vector<DetBox> boxes;
};

/// JSON Lines: {"image_id", "boxes": [{x_min, y_min, x_max, y_max, score, label}]}.
/// File order is preserved.
std::vector<ImageDetections> read_detections(const std::filesystem::path& path);
std::vector<ImageDetections> parse_detections(std::istream& in);
void write_detections(std::ostream& out, std::span<const ImageDetections> images);

/// Averaged entity embedding for a record; the zero vector when no entity is
/// embeddable (a warning is appended to `warnings` if given).
std::vector<double> record_embedding(const FeatureRecord& record, const WordVectorTable& table,
                                     std::vector<std::string>* warnings = nullptr);

std::vector<Sample> to_samples(const Dataset& dataset, const WordVectorTable& table, bool include_image,
                               std::vector<std::string>* warnings = nullptr);

/// Fraction of samples whose prediction matches the label.
double evaluate(Classifier& model, std::span<const Sample> samples);

}  // namespace semlink

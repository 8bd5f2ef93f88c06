#include "semlink/pipeline.hpp"

#include <fstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "semlink/error.hpp"
#include "text_util.hpp"

namespace semlink {

namespace {

using json = nlohmann::json;

json parse_line(const std::string& line, std::size_t line_no) {
  try {
    json doc = json::parse(line);
    if (!doc.is_object()) throw Error(ErrorCode::kParse, "line is not a JSON object", line_no);
    return doc;
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kParse, std::string("malformed JSON: ") + e.what(), line_no);
  }
}

const json& field(const json& doc, const char* name, std::size_t line_no) {
  auto it = doc.find(name);
  if (it == doc.end()) throw Error(ErrorCode::kParse, std::string("missing field '") + name + "'", line_no);
  return *it;
}

std::string string_field(const json& doc, const char* name, std::size_t line_no) {
  const json& v = field(doc, name, line_no);
  if (!v.is_string()) throw Error(ErrorCode::kParse, std::string("field '") + name + "' must be a string", line_no);
  return v.get<std::string>();
}

double number_field(const json& doc, const char* name, std::size_t line_no) {
  const json& v = field(doc, name, line_no);
  if (!v.is_number()) throw Error(ErrorCode::kParse, std::string("field '") + name + "' must be a number", line_no);
  return v.get<double>();
}

std::ifstream open(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kFileMissing, "cannot open " + path.string());
  return in;
}

}  // namespace

LabelVocabulary::LabelVocabulary(std::vector<std::string> labels) : labels_(std::move(labels)) {
  if (labels_.size() != kNumClasses) {
    throw Error(ErrorCode::kInvalidArgument, "label vocabulary needs exactly " + std::to_string(kNumClasses) +
                                                 " labels, found " + std::to_string(labels_.size()));
  }
  std::unordered_set<std::string> seen;
  for (const auto& l : labels_) {
    if (l.empty()) throw Error(ErrorCode::kEmptyField, "empty class label");
    if (!seen.insert(l).second) throw Error(ErrorCode::kDuplicateId, "duplicate class label '" + l + "'");
  }
}

LabelVocabulary LabelVocabulary::load(const std::filesystem::path& path) {
  auto in = open(path);
  return parse(in);
}

LabelVocabulary LabelVocabulary::parse(std::istream& in) {
  std::vector<std::string> labels;
  std::string line;
  while (std::getline(in, line)) {
    auto t = detail::trim(line);
    if (!t.empty()) labels.emplace_back(t);
  }
  return LabelVocabulary(std::move(labels));
}

LabelVocabulary LabelVocabulary::defaults() {
  return LabelVocabulary({"Human with animals", "Tennis racket", "Baseball", "Sportsball", "Person snowboarding",
                          "Kitchen electronics", "Living room", "Traffic", "Utencils", "Person with bags", "Animals",
                          "Human with Umbrella"});
}

std::optional<std::size_t> LabelVocabulary::index_of(std::string_view label) const {
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i] == label) return i;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------

Dataset read_features(const std::filesystem::path& path, const LabelVocabulary& vocabulary, std::size_t feature_dim) {
  auto in = open(path);
  return parse_features(in, vocabulary, feature_dim);
}

Dataset parse_features(std::istream& in, const LabelVocabulary& vocabulary, std::size_t feature_dim) {
  Dataset ds{{}, vocabulary};
  std::unordered_set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const json doc = parse_line(line, line_no);

    FeatureRecord rec;
    rec.image_id = string_field(doc, "image_id", line_no);
    if (!ids.insert(rec.image_id).second) {
      throw Error(ErrorCode::kDuplicateId, "duplicate image_id '" + rec.image_id + "'", line_no);
    }
    const std::string label = string_field(doc, "label", line_no);
    auto idx = vocabulary.index_of(label);
    if (!idx) throw Error(ErrorCode::kUnknownLabel, "label '" + label + "' is not in the vocabulary", line_no);
    rec.label = *idx;

    const json& entities = field(doc, "entities", line_no);
    if (!entities.is_array()) throw Error(ErrorCode::kParse, "field 'entities' must be an array", line_no);
    for (const json& e : entities) {
      if (!e.is_string()) throw Error(ErrorCode::kParse, "entity labels must be strings", line_no);
      rec.entity_labels.push_back(e.get<std::string>());
    }

    const json& vgg = field(doc, "vgg", line_no);
    if (!vgg.is_array()) throw Error(ErrorCode::kParse, "field 'vgg' must be an array", line_no);
    if (vgg.size() != feature_dim) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "vgg has " + std::to_string(vgg.size()) + " values, expected " + std::to_string(feature_dim),
                  line_no);
    }
    rec.image_feature.reserve(feature_dim);
    for (const json& v : vgg) {
      if (!v.is_number()) throw Error(ErrorCode::kParse, "vgg entries must be numbers", line_no);
      rec.image_feature.push_back(v.get<double>());
    }
    ds.records.push_back(std::move(rec));
  }
  return ds;
}

std::vector<ImageDetections> read_detections(const std::filesystem::path& path) {
  auto in = open(path);
  return parse_detections(in);
}

std::vector<ImageDetections> parse_detections(std::istream& in) {
  std::vector<ImageDetections> out;
  std::unordered_set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const json doc = parse_line(line, line_no);
    ImageDetections img;
    img.image_id = string_field(doc, "image_id", line_no);
    if (!ids.insert(img.image_id).second) {
      throw Error(ErrorCode::kDuplicateId, "duplicate image_id '" + img.image_id + "'", line_no);
    }
    const json& boxes = field(doc, "boxes", line_no);
    if (!boxes.is_array()) throw Error(ErrorCode::kParse, "field 'boxes' must be an array", line_no);
    for (const json& b : boxes) {
      if (!b.is_object()) throw Error(ErrorCode::kParse, "each box must be an object", line_no);
      DetBox box;
      box.x_min = number_field(b, "x_min", line_no);
      box.y_min = number_field(b, "y_min", line_no);
      box.x_max = number_field(b, "x_max", line_no);
      box.y_max = number_field(b, "y_max", line_no);
      box.score = number_field(b, "score", line_no);
      box.class_label = string_field(b, "label", line_no);
      try {
        validate_box(box);
      } catch (const Error& e) {
        throw Error(ErrorCode::kInvalidBox, e.what(), line_no);
      }
      img.boxes.push_back(std::move(box));
    }
    out.push_back(std::move(img));
  }
  return out;
}

void write_detections(std::ostream& out, std::span<const ImageDetections> images) {
  using ojson = nlohmann::ordered_json;
  for (const ImageDetections& img : images) {
    ojson boxes = ojson::array();
    for (const DetBox& b : img.boxes) {
      boxes.push_back(ojson{{"x_min", b.x_min}, {"y_min", b.y_min}, {"x_max", b.x_max},
                            {"y_max", b.y_max}, {"score", b.score}, {"label", b.class_label}});
    }
    out << ojson{{"image_id", img.image_id}, {"boxes", std::move(boxes)}}.dump() << '\n';
  }
}

// ---------------------------------------------------------------------------

std::vector<double> record_embedding(const FeatureRecord& record, const WordVectorTable& table,
                                     std::vector<std::string>* warnings) {
  if (!record.entity_labels.empty()) {
    try {
      return embed_entity_set(table, record.entity_labels).vector;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kOutOfVocabulary) throw;
    }
  }
  if (warnings != nullptr) {
    warnings->push_back("image '" + record.image_id + "': no embeddable entity, using the zero vector");
  }
  return std::vector<double>(table.dim(), 0.0);
}

std::vector<Sample> to_samples(const Dataset& dataset, const WordVectorTable& table, bool include_image,
                               std::vector<std::string>* warnings) {
  std::vector<Sample> out;
  out.reserve(dataset.records.size());
  for (const FeatureRecord& r : dataset.records) {
    Sample s;
    s.embedding = record_embedding(r, table, warnings);
    if (include_image) s.image = r.image_feature;
    s.label = r.label;
    out.push_back(std::move(s));
  }
  return out;
}

double evaluate(Classifier& model, std::span<const Sample> samples) { return accuracy(model, samples); }

}  // namespace semlink

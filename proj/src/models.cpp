#include "semlink/models.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>

#include "semlink/error.hpp"
#include "semlink/rng.hpp"

namespace semlink {

namespace {

using json = nlohmann::ordered_json;

// Seed index offset for the fusion head so its layers never share an init
// stream with the image branch.
constexpr std::uint64_t kHeadLayerOffset = 100;

void prefix_parameter_names(nn::Sequential& net, const std::string& prefix) {
  for (std::size_t i = 0; i < net.size(); ++i) {
    for (nn::Parameter* p : net.layer(i).parameters()) p->name = prefix + std::to_string(i) + "." + p->name;
  }
}

std::vector<std::string> layer_names(nn::Sequential& net) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < net.size(); ++i) out.push_back(net.layer(i).name());
  return out;
}

void check_label(const Sample& s) {
  if (s.label >= kNumClasses) {
    throw Error(ErrorCode::kUnknownLabel, "class index " + std::to_string(s.label) + " outside the " +
                                              std::to_string(kNumClasses) + "-label vocabulary");
  }
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

struct EvalStats {
  double loss = 0.0;
  double accuracy = 0.0;
};

EvalStats evaluate_split(Classifier& model, std::span<const Sample> samples) {
  EvalStats stats;
  if (samples.empty()) return stats;
  std::size_t correct = 0;
  for (const Sample& s : samples) {
    const auto probs = model.forward(s, nn::Mode::kEval);
    stats.loss += nn::cross_entropy(s.label, probs);
    if (nn::argmax(probs) == s.label) ++correct;
  }
  stats.loss /= static_cast<double>(samples.size());
  stats.accuracy = static_cast<double>(correct) / static_cast<double>(samples.size());
  return stats;
}

json config_json(const TrainConfig& c) {
  return json{{"epochs", c.epochs}, {"lr", c.lr}, {"val_split", c.val_split}, {"batch", c.batch}, {"seed", c.seed}};
}

}  // namespace

double Classifier::accumulate_gradients(std::span<const Sample* const> batch, nn::Mode mode, std::size_t* correct) {
  if (batch.empty()) throw Error(ErrorCode::kEmpty, "empty minibatch");
  auto params = parameters();
  nn::zero_grad(params);
  const double scale = 1.0 / static_cast<double>(batch.size());
  double loss = 0.0;
  for (const Sample* s : batch) {
    check_label(*s);
    std::vector<double> grad = forward(*s, mode);
    loss += nn::cross_entropy(s->label, grad);
    if (correct != nullptr && nn::argmax(grad) == s->label) ++*correct;
    // Fused softmax + cross-entropy: d(loss)/d(logits) = p - one_hot.
    grad[s->label] -= 1.0;
    for (double& g : grad) g *= scale;
    backward_logits(grad);
  }
  return loss * scale;
}

// ---------------------------------------------------------------------------

BaselineModel::BaselineModel(std::uint64_t seed, std::size_t input_dim) : input_dim_(input_dim) {
  using namespace nn;
  const std::vector<LayerSpec> specs = {
      DenseSpec{input_dim, 128, Activation::kRelu}, DropoutSpec{0.5},
      DenseSpec{128, 64, Activation::kRelu},        DropoutSpec{0.5},
      DenseSpec{64, 64, Activation::kRelu},         DropoutSpec{0.5},
      DenseSpec{64, kNumClasses, Activation::kLinear}, SoftmaxSpec{},
  };
  net_ = Sequential(specs, seed);
  prefix_parameter_names(net_, "layer");
}

void BaselineModel::check_sample(const Sample& sample) const {
  if (sample.embedding.size() != input_dim_) {
    throw Error(ErrorCode::kShapeMismatch, "baseline expects a " + std::to_string(input_dim_) +
                                               "-d embedding, got " + std::to_string(sample.embedding.size()));
  }
}

std::vector<double> BaselineModel::forward(const Sample& sample, nn::Mode mode) {
  check_sample(sample);
  return net_.forward(nn::Tensor::vector(sample.embedding), mode).data;
}

void BaselineModel::backward_logits(std::span<const double> grad_logits) {
  net_.backward(nn::Tensor::vector({grad_logits.begin(), grad_logits.end()}), 1);
}

std::vector<std::string> BaselineModel::describe() { return layer_names(net_); }

FusionModel::FusionModel(std::uint64_t seed, FusionConfig config) : config_(config) {
  using namespace nn;
  if (config_.conv_blocks == 0 || (config_.image_dim >> config_.conv_blocks) == 0) {
    throw Error(ErrorCode::kInvalidArgument, "image too short for the requested number of pooling blocks");
  }
  std::vector<LayerSpec> branch;
  for (std::size_t b = 0; b < config_.conv_blocks; ++b) {
    branch.push_back(Conv1dSpec{b == 0 ? 1 : config_.filters, config_.filters, config_.kernel, Activation::kRelu});
    branch.push_back(MaxPool1dSpec{});
  }
  branch.push_back(FlattenSpec{});
  image_branch_ = Sequential(branch, seed);
  prefix_parameter_names(image_branch_, "image.layer");

  const std::vector<LayerSpec> head = {
      DenseSpec{concat_width(), config_.hidden, Activation::kRelu},
      DenseSpec{config_.hidden, kNumClasses, Activation::kLinear},
      SoftmaxSpec{},
  };
  head_ = Sequential(head, seed, kHeadLayerOffset);
  prefix_parameter_names(head_, "head.layer");
}

std::size_t FusionModel::image_branch_length() const {
  std::size_t len = config_.image_dim;
  for (std::size_t b = 0; b < config_.conv_blocks; ++b) len /= 2;
  return len;
}

void FusionModel::check_sample(const Sample& sample) const {
  if (sample.image.size() != config_.image_dim || sample.embedding.size() != config_.embedding_dim) {
    throw Error(ErrorCode::kShapeMismatch,
                "fusion expects a " + std::to_string(config_.image_dim) + "-d image and a " +
                    std::to_string(config_.embedding_dim) + "-d embedding, got " +
                    std::to_string(sample.image.size()) + " and " + std::to_string(sample.embedding.size()));
  }
}

std::vector<double> FusionModel::forward(const Sample& sample, nn::Mode mode) {
  check_sample(sample);
  image_embedding_ = image_branch_.forward(nn::Tensor({1, config_.image_dim}, sample.image), mode).data;
  std::vector<double> joined = image_embedding_;
  joined.insert(joined.end(), sample.embedding.begin(), sample.embedding.end());
  return head_.forward(nn::Tensor::vector(std::move(joined)), mode).data;
}

std::vector<double> FusionModel::image_embedding(const std::vector<double>& image) {
  if (image.size() != config_.image_dim) throw Error(ErrorCode::kShapeMismatch, "wrong image feature length");
  return image_branch_.forward(nn::Tensor({1, config_.image_dim}, image), nn::Mode::kEval).data;
}

void FusionModel::backward_logits(std::span<const double> grad_logits) {
  const nn::Tensor g = head_.backward(nn::Tensor::vector({grad_logits.begin(), grad_logits.end()}), 1);
  const std::size_t flat = image_embedding_.size();
  image_branch_.backward(nn::Tensor::vector({g.data.begin(), g.data.begin() + static_cast<std::ptrdiff_t>(flat)}));
}

std::vector<nn::Parameter*> FusionModel::parameters() {
  auto out = image_branch_.parameters();
  for (nn::Parameter* p : head_.parameters()) out.push_back(p);
  return out;
}

std::vector<std::string> FusionModel::describe() {
  auto out = layer_names(image_branch_);
  out.push_back("concat(image " + std::to_string(image_branch_length() * config_.filters) + " + embedding " +
                std::to_string(config_.embedding_dim) + " -> " + std::to_string(concat_width()) + ")");
  for (auto& n : layer_names(head_)) out.push_back(std::move(n));
  return out;
}

std::unique_ptr<BaselineModel> build_baseline(std::uint64_t seed, std::size_t input_dim) {
  return std::make_unique<BaselineModel>(seed, input_dim);
}

std::unique_ptr<FusionModel> build_fusion(std::uint64_t seed, FusionConfig config) {
  return std::make_unique<FusionModel>(seed, config);
}

// ---------------------------------------------------------------------------

Prediction predict(Classifier& model, const Sample& sample) {
  Prediction p;
  p.probabilities = model.forward(sample, nn::Mode::kEval);
  p.label = nn::argmax(p.probabilities);
  return p;
}

double accuracy(Classifier& model, std::span<const Sample> samples) {
  if (samples.empty()) throw Error(ErrorCode::kEmpty, "cannot evaluate on an empty dataset");
  return evaluate_split(model, samples).accuracy;
}

TrainReport fit(Classifier& model, std::span<const Sample> train_set, std::span<const Sample> val_set,
                const TrainConfig& config) {
  if (train_set.empty()) throw Error(ErrorCode::kEmpty, "empty training set");
  if (config.batch == 0) throw Error(ErrorCode::kInvalidArgument, "batch size must be positive");
  for (const Sample& s : train_set) {
    check_label(s);
    model.check_sample(s);
  }
  for (const Sample& s : val_set) {
    check_label(s);
    model.check_sample(s);
  }

  TrainReport report;
  report.model = model.kind();
  report.config = config;
  report.train_size = train_set.size();
  report.val_size = val_set.size();

  auto params = model.parameters();
  nn::Adam adam(config.lr);
  std::vector<const Sample*> batch;
  batch.reserve(config.batch);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto order = permutation(train_set.size(), derive_seed(config.seed, Stream::kShuffle, epoch));
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch) {
      batch.clear();
      const std::size_t stop = std::min(order.size(), start + config.batch);
      for (std::size_t i = start; i < stop; ++i) batch.push_back(&train_set[order[i]]);
      loss_sum += model.accumulate_gradients(batch, nn::Mode::kTrain, &correct) * static_cast<double>(batch.size());
      adam.step(params);
    }
    EpochStats stats;
    stats.train_loss = loss_sum / static_cast<double>(train_set.size());
    stats.train_accuracy = static_cast<double>(correct) / static_cast<double>(train_set.size());
    const EvalStats val = evaluate_split(model, val_set);
    stats.val_loss = val.loss;
    stats.val_accuracy = val.accuracy;
    report.epochs.push_back(stats);
  }
  report.final_val_accuracy = evaluate_split(model, val_set).accuracy;
  return report;
}

TrainReport train(Classifier& model, std::span<const Sample> dataset, const TrainConfig& config) {
  if (dataset.empty()) throw Error(ErrorCode::kEmpty, "empty dataset");
  if (!(config.val_split >= 0.0 && config.val_split < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "val_split must lie in [0, 1)");
  }
  const auto order = permutation(dataset.size(), derive_seed(config.seed, Stream::kValidationSplit));
  const auto n_val = static_cast<std::size_t>(std::llround(config.val_split * static_cast<double>(dataset.size())));
  const std::size_t n_train = dataset.size() - n_val;
  std::vector<Sample> train_set, val_set;
  train_set.reserve(n_train);
  val_set.reserve(n_val);
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < n_train ? train_set : val_set).push_back(dataset[order[i]]);
  }
  return fit(model, train_set, val_set, config);
}

json TrainReport::to_json() const {
  json curves{{"train_loss", json::array()}, {"train_acc", json::array()},
              {"val_loss", json::array()},   {"val_acc", json::array()}};
  for (const EpochStats& e : epochs) {
    curves["train_loss"].push_back(e.train_loss);
    curves["train_acc"].push_back(e.train_accuracy);
    curves["val_loss"].push_back(e.val_loss);
    curves["val_acc"].push_back(e.val_accuracy);
  }
  return json{{"model", model},
              {"seed", config.seed},
              {"config", config_json(config)},
              {"train_size", train_size},
              {"val_size", val_size},
              {"final_val_accuracy", final_val_accuracy},
              {"curves", std::move(curves)}};
}

std::string TrainReport::curves_csv() const {
  std::string out = "epoch,train_loss,train_acc,val_loss,val_acc\n";
  for (std::size_t i = 0; i < epochs.size(); ++i) {
    const EpochStats& e = epochs[i];
    out += std::to_string(i + 1) + "," + format_double(e.train_loss) + "," + format_double(e.train_accuracy) + "," +
           format_double(e.val_loss) + "," + format_double(e.val_accuracy) + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------

std::vector<std::vector<std::size_t>> kfold_indices(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw Error(ErrorCode::kInvalidArgument, "k-fold needs k >= 2");
  if (k > n) {
    throw Error(ErrorCode::kInvalidArgument,
                "k = " + std::to_string(k) + " exceeds dataset size " + std::to_string(n));
  }
  const auto order = permutation(n, derive_seed(seed, Stream::kFold));
  std::vector<std::vector<std::size_t>> folds(k);
  const std::size_t base = n / k;
  const std::size_t extra = n % k;
  std::size_t pos = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t size = base + (f < extra ? 1 : 0);
    folds[f].assign(order.begin() + static_cast<std::ptrdiff_t>(pos),
                    order.begin() + static_cast<std::ptrdiff_t>(pos + size));
    pos += size;
  }
  return folds;
}

CvReport kfold_cv(const ModelBuilder& builder, std::span<const Sample> dataset, std::size_t k,
                  const TrainConfig& config) {
  const auto folds = kfold_indices(dataset.size(), k, config.seed);
  CvReport report;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    std::vector<Sample> train_set, val_set;
    for (std::size_t g = 0; g < folds.size(); ++g) {
      for (std::size_t idx : folds[g]) (g == f ? val_set : train_set).push_back(dataset[idx]);
    }
    const std::uint64_t fold_seed = derive_seed(config.seed, Stream::kFold, f + 1);
    auto model = builder(fold_seed);
    if (report.model.empty()) report.model = model->kind();
    TrainConfig fold_config = config;
    fold_config.seed = fold_seed;
    const TrainReport r = fit(*model, train_set, val_set, fold_config);
    report.fold_sizes.push_back(val_set.size());
    report.fold_accuracy.push_back(r.final_val_accuracy);
  }
  const double n = static_cast<double>(report.fold_accuracy.size());
  report.mean = std::accumulate(report.fold_accuracy.begin(), report.fold_accuracy.end(), 0.0) / n;
  double var = 0.0;
  for (double a : report.fold_accuracy) var += (a - report.mean) * (a - report.mean);
  report.stddev = std::sqrt(var / n);
  return report;
}

json CvReport::to_json() const {
  return json{{"model", model},
              {"folds", fold_accuracy.size()},
              {"fold_sizes", fold_sizes},
              {"fold_accuracy", fold_accuracy},
              {"mean", mean},
              {"stddev", stddev}};
}

// ---------------------------------------------------------------------------

json classifier_to_json(Classifier& model, std::span<const std::string> labels) {
  json doc;
  doc["format_version"] = kClassifierFormatVersion;
  doc["kind"] = "classifier";
  doc["model"] = model.kind();
  if (auto* b = dynamic_cast<BaselineModel*>(&model)) {
    doc["config"] = json{{"input_dim", b->input_dim()}};
  } else if (auto* f = dynamic_cast<FusionModel*>(&model)) {
    const FusionConfig& c = f->config();
    doc["config"] = json{{"image_dim", c.image_dim}, {"embedding_dim", c.embedding_dim},
                         {"conv_blocks", c.conv_blocks}, {"filters", c.filters},
                         {"kernel", c.kernel},       {"hidden", c.hidden}};
  }
  doc["labels"] = std::vector<std::string>(labels.begin(), labels.end());
  json params = json::array();
  for (const nn::Parameter* p : model.parameters()) {
    params.push_back(json{{"name", p->name}, {"shape", p->shape}, {"values", p->value}});
  }
  doc["parameters"] = std::move(params);
  return doc;
}

std::unique_ptr<Classifier> classifier_from_json(const json& doc) {
  try {
    if (doc.at("format_version").get<int>() != kClassifierFormatVersion) {
      throw Error(ErrorCode::kParse, "unsupported checkpoint format_version");
    }
    const std::string kind = doc.at("model").get<std::string>();
    const json& c = doc.at("config");
    std::unique_ptr<Classifier> model;
    if (kind == "baseline") {
      model = build_baseline(0, c.at("input_dim").get<std::size_t>());
    } else if (kind == "fusion") {
      FusionConfig fc;
      fc.image_dim = c.at("image_dim").get<std::size_t>();
      fc.embedding_dim = c.at("embedding_dim").get<std::size_t>();
      fc.conv_blocks = c.at("conv_blocks").get<std::size_t>();
      fc.filters = c.at("filters").get<std::size_t>();
      fc.kernel = c.at("kernel").get<std::size_t>();
      fc.hidden = c.at("hidden").get<std::size_t>();
      model = build_fusion(0, fc);
    } else {
      throw Error(ErrorCode::kParse, "unknown model kind '" + kind + "'");
    }
    const json& params = doc.at("parameters");
    auto targets = model->parameters();
    if (params.size() != targets.size()) throw Error(ErrorCode::kShapeMismatch, "parameter count mismatch");
    for (std::size_t i = 0; i < targets.size(); ++i) {
      const json& p = params[i];
      if (p.at("name").get<std::string>() != targets[i]->name ||
          p.at("shape").get<std::vector<std::size_t>>() != targets[i]->shape) {
        throw Error(ErrorCode::kShapeMismatch, "parameter " + targets[i]->name + " does not match checkpoint");
      }
      auto values = p.at("values").get<std::vector<double>>();
      if (values.size() != targets[i]->value.size()) {
        throw Error(ErrorCode::kShapeMismatch, "parameter " + targets[i]->name + " has the wrong length");
      }
      targets[i]->value = std::move(values);
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("malformed classifier checkpoint: ") + e.what());
  }
}

void save_classifier(Classifier& model, std::span<const std::string> labels, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kFileMissing, "cannot write " + path.string());
  out << classifier_to_json(model, labels).dump(1) << '\n';
}

std::unique_ptr<Classifier> load_classifier(const std::filesystem::path& path, std::vector<std::string>* labels) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kFileMissing, "cannot open checkpoint " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("checkpoint is not valid JSON: ") + e.what());
  }
  if (labels != nullptr) *labels = doc.value("labels", std::vector<std::string>{});
  return classifier_from_json(doc);
}

}  // namespace semlink

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "semlink/nn.hpp"

namespace semlink {

inline constexpr std::size_t kNumClasses = 12;
inline constexpr std::size_t kImageFeatureDim = 4096;

/// One training/evaluation example. `image` is empty for the baseline.
struct Sample {
  std::vector<double> embedding;
  std::vector<double> image;
  std::size_t label = 0;
};

/// A 12-way softmax classifier trained with fused softmax/cross-entropy.
class Classifier {
 public:
  virtual ~Classifier() = default;

  virtual std::string kind() const = 0;
  /// Class probabilities for one sample.
  virtual std::vector<double> forward(const Sample& sample, nn::Mode mode) = 0;
  /// Backpropagates d(loss)/d(logits) for the most recent forward call.
  virtual void backward_logits(std::span<const double> grad_logits) = 0;
  virtual std::vector<nn::Parameter*> parameters() = 0;
  /// Human-readable layer listing.
  virtual std::vector<std::string> describe() = 0;
  /// Throws kShapeMismatch when the sample cannot be fed.
  virtual void check_sample(const Sample& sample) const = 0;
  /// Relu signs and pool winners of the most recent forward call.
  virtual void append_pattern(std::vector<std::uint8_t>& out) const = 0;

  std::size_t parameter_count() { return nn::parameter_count(parameters()); }

  /// Zeroes gradients, then leaves d(mean loss)/d(param) over `batch` in
  /// every grad buffer. Returns the mean categorical cross-entropy.
  double accumulate_gradients(std::span<const Sample* const> batch, nn::Mode mode,
                              std::size_t* correct = nullptr);
};

struct FusionConfig {
  std::size_t image_dim = kImageFeatureDim;
  std::size_t embedding_dim = 100;
  std::size_t conv_blocks = 5;
  std::size_t filters = 8;
  std::size_t kernel = 4;
  std::size_t hidden = 64;
};

/// Dense 100-128-64-64-12 with dropout 0.5 after each hidden layer.
class BaselineModel final : public Classifier {
 public:
  explicit BaselineModel(std::uint64_t seed, std::size_t input_dim = 100);

  std::string kind() const override { return "baseline"; }
  std::vector<double> forward(const Sample& sample, nn::Mode mode) override;
  void backward_logits(std::span<const double> grad_logits) override;
  std::vector<nn::Parameter*> parameters() override { return net_.parameters(); }
  std::vector<std::string> describe() override;
  void check_sample(const Sample& sample) const override;
  void append_pattern(std::vector<std::uint8_t>& out) const override { net_.append_pattern(out); }

  std::size_t input_dim() const { return input_dim_; }

 private:
  std::size_t input_dim_;
  nn::Sequential net_;
};

/// conv/pool image branch -> flatten -> concat(image, embedding) -> dense -> softmax.
class FusionModel final : public Classifier {
 public:
  explicit FusionModel(std::uint64_t seed, FusionConfig config = {});

  std::string kind() const override { return "fusion"; }
  std::vector<double> forward(const Sample& sample, nn::Mode mode) override;
  void backward_logits(std::span<const double> grad_logits) override;
  std::vector<nn::Parameter*> parameters() override;
  std::vector<std::string> describe() override;
  void check_sample(const Sample& sample) const override;
  void append_pattern(std::vector<std::uint8_t>& out) const override {
    image_branch_.append_pattern(out);
    head_.append_pattern(out);
  }

  const FusionConfig& config() const { return config_; }
  /// Per-channel length after every pool.
  std::size_t image_branch_length() const;
  std::size_t concat_width() const { return image_branch_length() * config_.filters + config_.embedding_dim; }
  std::size_t output_width() const { return kNumClasses; }
  /// The image embedding g(image) of the most recent forward call.
  const std::vector<double>& last_image_embedding() const { return image_embedding_; }
  std::vector<double> image_embedding(const std::vector<double>& image);

 private:
  FusionConfig config_;
  nn::Sequential image_branch_;
  nn::Sequential head_;
  std::vector<double> image_embedding_;
};

std::unique_ptr<BaselineModel> build_baseline(std::uint64_t seed, std::size_t input_dim = 100);
std::unique_ptr<FusionModel> build_fusion(std::uint64_t seed, FusionConfig config = {});

using ModelBuilder = std::function<std::unique_ptr<Classifier>(std::uint64_t seed)>;

struct Prediction {
  std::size_t label = 0;
  std::vector<double> probabilities;
};

/// Eval-mode forward; argmax with lowest-index tie-break.
Prediction predict(Classifier& model, const Sample& sample);

double accuracy(Classifier& model, std::span<const Sample> samples);

struct TrainConfig {
  std::size_t epochs = 200;
  double lr = 0.01;
  double val_split = 0.2;
  std::size_t batch = 32;
  std::uint64_t seed = 0;
};

struct EpochStats {
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
};

struct TrainReport {
  std::string model;
  TrainConfig config;
  std::size_t train_size = 0;
  std::size_t val_size = 0;
  std::vector<EpochStats> epochs;
  /// Eval-mode accuracy on the validation set after training (0 when the
  /// validation set is empty).
  double final_val_accuracy = 0.0;

  nlohmann::ordered_json to_json() const;
  /// `epoch,train_loss,train_acc,val_loss,val_acc`
  std::string curves_csv() const;
};

/// Adam + categorical cross-entropy on `train_set`; validation metrics are
/// eval-mode. Training loss/accuracy are the running train-mode values.
TrainReport fit(Classifier& model, std::span<const Sample> train_set, std::span<const Sample> val_set,
                const TrainConfig& config);

/// Seeded shuffle; the last round(val_split * n) samples validate.
TrainReport train(Classifier& model, std::span<const Sample> dataset, const TrainConfig& config);

struct CvReport {
  std::string model;
  std::vector<std::size_t> fold_sizes;
  std::vector<double> fold_accuracy;
  double mean = 0.0;
  double stddev = 0.0;

  nlohmann::ordered_json to_json() const;
};

/// Seeded shuffle cut into k contiguous folds whose sizes differ by at most
/// one (the first n mod k folds are one larger).
std::vector<std::vector<std::size_t>> kfold_indices(std::size_t n, std::size_t k, std::uint64_t seed);

/// Each fold validates once; the model is rebuilt per fold from a derived
/// seed and trained on the remaining folds with `config` (val_split unused).
CvReport kfold_cv(const ModelBuilder& builder, std::span<const Sample> dataset, std::size_t k,
                  const TrainConfig& config);

// Checkpoints --------------------------------------------------------------

inline constexpr int kClassifierFormatVersion = 1;

nlohmann::ordered_json classifier_to_json(Classifier& model, std::span<const std::string> labels);
/// Rebuilds the architecture named in the document and loads its parameters.
std::unique_ptr<Classifier> classifier_from_json(const nlohmann::ordered_json& doc);
void save_classifier(Classifier& model, std::span<const std::string> labels, const std::filesystem::path& path);
std::unique_ptr<Classifier> load_classifier(const std::filesystem::path& path,
                                            std::vector<std::string>* labels = nullptr);

}  // namespace semlink

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace semlink::nn {

enum class Mode { kTrain, kEval };
enum class Activation { kLinear, kRelu };

/// Row-major fp64 buffer. Conv/pool layers use shape {channels, length}.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::vector<std::size_t> shape_, std::vector<double> data_);

  static Tensor zeros(std::vector<std::size_t> shape);
  static Tensor vector(std::vector<double> values);

  std::size_t size() const { return data.size(); }
};

std::size_t shape_size(std::span<const std::size_t> shape);

/// Trainable parameter with its gradient accumulator.
struct Parameter {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> value;
  std::vector<double> grad;

  Parameter() = default;
  Parameter(std::string name_, std::vector<std::size_t> shape_);

  void zero_grad();
};

// ---------------------------------------------------------------------------
// Pure kernels.

/// activation(W x + b), W is out x in row-major.
std::vector<double> dense_forward(std::span<const double> x, std::span<const double> weights,
                                  std::span<const double> bias, Activation activation);

/// Stride-1 "same" cross-correlation: output j reads inputs
/// j - (kernel-1)/2 .. j + kernel/2, zero outside. For kernel 4 that is
/// j-1..j+2 (pad 1 left, 2 right). kernels are filters x channels x kernel.
Tensor conv1d_forward(const Tensor& x, std::span<const double> kernels, std::span<const double> bias,
                      std::size_t kernel_size, Activation activation);

/// Window 2, stride 2; a trailing odd element is dropped.
Tensor maxpool1d_forward(const Tensor& x);

/// Inverted-dropout scale factors (0 or 1/(1-rate)) for one call.
std::vector<double> dropout_mask(std::size_t n, double rate, std::uint64_t seed, std::uint64_t call_index);

std::vector<double> dropout_forward(std::span<const double> x, double rate, Mode mode, std::uint64_t seed,
                                    std::uint64_t call_index);

/// Max-subtracted softmax.
std::vector<double> softmax(std::span<const double> z);

/// -log(max(predicted[target], 1e-12)) where target is the hot index.
double cross_entropy(std::span<const double> one_hot_target, std::span<const double> predicted);
double cross_entropy(std::size_t target, std::span<const double> predicted);

inline constexpr double kProbabilityFloor = 1e-12;

/// Index of the largest entry; ties go to the lowest index.
std::size_t argmax(std::span<const double> values);

// ---------------------------------------------------------------------------
// Layers.

class Layer {
 public:
  virtual ~Layer() = default;

  virtual Tensor forward(const Tensor& x, Mode mode) = 0;
  /// Gradient w.r.t. the input of the most recent forward call. Parameter
  /// gradients are accumulated, not overwritten.
  virtual Tensor backward(const Tensor& grad_out) = 0;
  virtual std::vector<Parameter*> parameters() { return {}; }
  virtual std::string name() const = 0;
  /// Appends the piecewise-linear decisions (relu signs, pool winners) of the
  /// most recent forward call.
  virtual void append_pattern(std::vector<std::uint8_t>&) const {}
};

class Dense final : public Layer {
 public:
  Dense(std::size_t in, std::size_t out, Activation activation, std::uint64_t init_seed);

  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& grad_out) override;
  std::vector<Parameter*> parameters() override { return {&weights_, &bias_}; }
  std::string name() const override;
  void append_pattern(std::vector<std::uint8_t>& out) const override;

  Parameter& weights() { return weights_; }
  Parameter& bias() { return bias_; }

 private:
  std::size_t in_, out_;
  Activation activation_;
  Parameter weights_, bias_;
  Tensor input_, output_;
};

class Conv1d final : public Layer {
 public:
  Conv1d(std::size_t in_channels, std::size_t filters, std::size_t kernel_size, Activation activation,
         std::uint64_t init_seed);

  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& grad_out) override;
  std::vector<Parameter*> parameters() override { return {&kernels_, &bias_}; }
  std::string name() const override;
  void append_pattern(std::vector<std::uint8_t>& out) const override;

  Parameter& kernels() { return kernels_; }
  Parameter& bias() { return bias_; }

 private:
  std::size_t in_channels_, filters_, kernel_size_;
  Activation activation_;
  Parameter kernels_, bias_;
  Tensor input_, output_;
};

class MaxPool1d final : public Layer {
 public:
  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& grad_out) override;
  std::string name() const override { return "maxpool1d(2)"; }
  void append_pattern(std::vector<std::uint8_t>& out) const override;

 private:
  std::vector<std::size_t> input_shape_;
  std::vector<std::size_t> winners_;
};

class Dropout final : public Layer {
 public:
  Dropout(double rate, std::uint64_t seed);

  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& grad_out) override;
  std::string name() const override;

  double rate() const { return rate_; }
  std::uint64_t calls() const { return calls_; }

 private:
  double rate_;
  std::uint64_t seed_;
  std::uint64_t calls_ = 0;
  std::vector<double> mask_;
};

class Flatten final : public Layer {
 public:
  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& grad_out) override;
  std::string name() const override { return "flatten"; }

 private:
  std::vector<std::size_t> input_shape_;
};

class Softmax final : public Layer {
 public:
  Tensor forward(const Tensor& x, Mode mode) override;
  /// Full Jacobian-vector product. Training uses the fused
  /// softmax/cross-entropy gradient instead.
  Tensor backward(const Tensor& grad_out) override;
  std::string name() const override { return "softmax"; }

 private:
  std::vector<double> output_;
};

// ---------------------------------------------------------------------------
// Declarative layer specs.

struct DenseSpec {
  std::size_t in = 0;
  std::size_t out = 0;
  Activation activation = Activation::kRelu;
};
struct DropoutSpec {
  double rate = 0.5;
};
struct Conv1dSpec {
  std::size_t in_channels = 1;
  std::size_t filters = 8;
  std::size_t kernel = 4;
  Activation activation = Activation::kRelu;
};
struct MaxPool1dSpec {};
struct FlattenSpec {};
struct SoftmaxSpec {};

using LayerSpec = std::variant<DenseSpec, DropoutSpec, Conv1dSpec, MaxPool1dSpec, FlattenSpec, SoftmaxSpec>;

class Sequential {
 public:
  Sequential() = default;
  /// Layer i is initialised from derive_seed(seed, kInit, first_index + i);
  /// dropout layers use the kDropout stream with the same index.
  Sequential(std::span<const LayerSpec> specs, std::uint64_t seed, std::uint64_t first_index = 0);

  void add(std::unique_ptr<Layer> layer) { layers_.push_back(std::move(layer)); }

  Tensor forward(const Tensor& x, Mode mode);
  /// Backpropagates through all layers except the last `skip_last`.
  Tensor backward(const Tensor& grad_out, std::size_t skip_last = 0);

  std::vector<Parameter*> parameters();
  void append_pattern(std::vector<std::uint8_t>& out) const;
  std::size_t size() const { return layers_.size(); }
  Layer& layer(std::size_t i) { return *layers_.at(i); }

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
};

// ---------------------------------------------------------------------------
// Optimisation.

struct AdamState {
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t t = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
};

class Adam {
 public:
  explicit Adam(double lr = 0.01);

  /// One bias-corrected update over `params` using their `grad` buffers.
  /// The parameter list must be the same (same order, same shapes) on every call.
  void step(std::span<Parameter* const> params);

  const AdamState& state() const { return state_; }

 private:
  AdamState state_;
};

void zero_grad(std::span<Parameter* const> params);

std::size_t parameter_count(std::span<Parameter* const> params);

// ---------------------------------------------------------------------------
// Finite-difference gradient check.

struct GradCheckOptions {
  double step = 1e-6;
  /// 0 checks every coordinate; otherwise this many seeded random
  /// coordinates per parameter tensor (all of them if the tensor is smaller).
  std::size_t max_coords_per_param = 0;
  std::uint64_t seed = 0;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t coords_checked = 0;
  /// Coordinates left out because the +/- step changed the activation pattern.
  std::size_t kinks_skipped = 0;
  std::string worst_parameter;
};

/// `loss` evaluates the scalar objective at the current parameter values;
/// `compute_gradients` must leave d(loss)/d(param) in every `grad` buffer.
/// Error per coordinate is |analytic - numeric| / max(1, |analytic|, |numeric|)
/// with central differences. When `pattern` is given it must return the
/// activation pattern of the latest `loss` call; a coordinate whose +/- step
/// changes that pattern straddles a kink and is skipped.
GradCheckResult grad_check(std::span<Parameter* const> params, const std::function<double()>& loss,
                           const std::function<void()>& compute_gradients, const GradCheckOptions& options = {},
                           const std::function<std::vector<std::uint8_t>()>& pattern = {});

}  // namespace semlink::nn

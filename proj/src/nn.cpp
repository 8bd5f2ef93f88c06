#include "semlink/nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "semlink/error.hpp"
#include "semlink/rng.hpp"

namespace semlink::nn {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::kShapeMismatch, what);
}

void glorot_uniform(std::vector<double>& values, std::size_t fan_in, std::size_t fan_out, std::uint64_t seed) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Rng rng(seed);
  for (double& v : values) v = rng.uniform(-limit, limit);
}

std::string activation_name(Activation a) { return a == Activation::kRelu ? "relu" : "linear"; }

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape_, std::vector<double> data_)
    : shape(std::move(shape_)), data(std::move(data_)) {
  require(shape_size(shape) == data.size(), "tensor data does not match its shape");
}

Tensor Tensor::zeros(std::vector<std::size_t> shape) {
  const std::size_t n = shape_size(shape);
  return Tensor(std::move(shape), std::vector<double>(n, 0.0));
}

Tensor Tensor::vector(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor({n}, std::move(values));
}

std::size_t shape_size(std::span<const std::size_t> shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

Parameter::Parameter(std::string name_, std::vector<std::size_t> shape_)
    : name(std::move(name_)), shape(std::move(shape_)) {
  value.assign(shape_size(shape), 0.0);
  grad.assign(value.size(), 0.0);
}

void Parameter::zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }

// ---------------------------------------------------------------------------

std::vector<double> dense_forward(std::span<const double> x, std::span<const double> weights,
                                  std::span<const double> bias, Activation activation) {
  const std::size_t out = bias.size();
  const std::size_t in = x.size();
  require(weights.size() == out * in, "dense weights must be out x in");
  std::vector<double> y(out);
  for (std::size_t i = 0; i < out; ++i) {
    const double* row = weights.data() + i * in;
    double acc = bias[i];
    for (std::size_t j = 0; j < in; ++j) acc += row[j] * x[j];
    y[i] = (activation == Activation::kRelu && acc < 0.0) ? 0.0 : acc;
  }
  return y;
}

Tensor conv1d_forward(const Tensor& x, std::span<const double> kernels, std::span<const double> bias,
                      std::size_t kernel_size, Activation activation) {
  require(x.shape.size() == 2, "conv1d input must be channels x length");
  require(kernel_size > 0, "conv1d kernel size must be positive");
  const std::size_t channels = x.shape[0];
  const std::size_t length = x.shape[1];
  const std::size_t filters = bias.size();
  require(kernels.size() == filters * channels * kernel_size, "conv1d kernels must be filters x channels x kernel");

  const auto pad_left = static_cast<std::ptrdiff_t>((kernel_size - 1) / 2);
  const auto len = static_cast<std::ptrdiff_t>(length);
  Tensor y = Tensor::zeros({filters, length});
  for (std::size_t f = 0; f < filters; ++f) {
    double* out = y.data.data() + f * length;
    std::fill(out, out + length, bias[f]);
    for (std::size_t c = 0; c < channels; ++c) {
      const double* in = x.data.data() + c * length;
      for (std::size_t k = 0; k < kernel_size; ++k) {
        const double w = kernels[(f * channels + c) * kernel_size + k];
        const std::ptrdiff_t offset = static_cast<std::ptrdiff_t>(k) - pad_left;
        const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, -offset);
        const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(len, len - offset);
        for (std::ptrdiff_t j = lo; j < hi; ++j) out[j] += w * in[j + offset];
      }
    }
    if (activation == Activation::kRelu) {
      for (std::size_t j = 0; j < length; ++j) out[j] = out[j] < 0.0 ? 0.0 : out[j];
    }
  }
  return y;
}

Tensor maxpool1d_forward(const Tensor& x) {
  require(x.shape.size() == 2, "maxpool1d input must be channels x length");
  const std::size_t channels = x.shape[0];
  const std::size_t length = x.shape[1];
  if (length < 2) throw Error(ErrorCode::kShapeMismatch, "maxpool1d needs length >= 2");
  const std::size_t out_len = length / 2;
  Tensor y = Tensor::zeros({channels, out_len});
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t j = 0; j < out_len; ++j) {
      y.data[c * out_len + j] = std::max(x.data[c * length + 2 * j], x.data[c * length + 2 * j + 1]);
    }
  }
  return y;
}

std::vector<double> dropout_mask(std::size_t n, double rate, std::uint64_t seed, std::uint64_t call_index) {
  if (!(rate >= 0.0 && rate < 1.0)) throw Error(ErrorCode::kInvalidArgument, "dropout rate must lie in [0, 1)");
  std::vector<double> mask(n, 1.0);
  if (rate == 0.0) return mask;
  const double keep_scale = 1.0 / (1.0 - rate);
  Rng rng(derive_seed(seed, Stream::kDropout, call_index));
  for (double& m : mask) m = rng.uniform() < rate ? 0.0 : keep_scale;
  return mask;
}

std::vector<double> dropout_forward(std::span<const double> x, double rate, Mode mode, std::uint64_t seed,
                                    std::uint64_t call_index) {
  if (!(rate >= 0.0 && rate < 1.0)) throw Error(ErrorCode::kInvalidArgument, "dropout rate must lie in [0, 1)");
  std::vector<double> y(x.begin(), x.end());
  if (mode == Mode::kEval || rate == 0.0) return y;
  const auto mask = dropout_mask(x.size(), rate, seed, call_index);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= mask[i];
  return y;
}

std::vector<double> softmax(std::span<const double> z) {
  if (z.empty()) throw Error(ErrorCode::kShapeMismatch, "softmax of an empty vector");
  for (double v : z) {
    if (!std::isfinite(v)) throw Error(ErrorCode::kNonFinite, "softmax input is not finite");
  }
  const double top = *std::max_element(z.begin(), z.end());
  std::vector<double> p(z.size());
  double total = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    p[i] = std::exp(z[i] - top);
    total += p[i];
  }
  for (double& v : p) v /= total;
  return p;
}

double cross_entropy(std::size_t target, std::span<const double> predicted) {
  require(target < predicted.size(), "cross-entropy target out of range");
  return std::max(0.0, -std::log(std::max(predicted[target], kProbabilityFloor)));
}

double cross_entropy(std::span<const double> one_hot_target, std::span<const double> predicted) {
  require(one_hot_target.size() == predicted.size(), "cross-entropy target and prediction differ in length");
  return cross_entropy(argmax(one_hot_target), predicted);
}

std::size_t argmax(std::span<const double> values) {
  require(!values.empty(), "argmax of an empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

// ---------------------------------------------------------------------------

Dense::Dense(std::size_t in, std::size_t out, Activation activation, std::uint64_t init_seed)
    : in_(in), out_(out), activation_(activation), weights_("weights", {out, in}), bias_("bias", {out}) {
  require(in > 0 && out > 0, "dense dimensions must be positive");
  glorot_uniform(weights_.value, in, out, init_seed);
}

Tensor Dense::forward(const Tensor& x, Mode) {
  require(x.size() == in_, "dense input has length " + std::to_string(x.size()) + ", expected " +
                               std::to_string(in_));
  input_ = x;
  output_ = Tensor::vector(dense_forward(x.data, weights_.value, bias_.value, activation_));
  return output_;
}

void Dense::append_pattern(std::vector<std::uint8_t>& out) const {
  if (activation_ != Activation::kRelu) return;
  for (double v : output_.data) out.push_back(v > 0.0);
}

Tensor Dense::backward(const Tensor& grad_out) {
  require(grad_out.size() == out_, "dense gradient has the wrong length");
  std::vector<double> g = grad_out.data;
  if (activation_ == Activation::kRelu) {
    for (std::size_t i = 0; i < out_; ++i) {
      if (output_.data[i] <= 0.0) g[i] = 0.0;
    }
  }
  Tensor grad_in = Tensor::zeros(input_.shape);
  for (std::size_t i = 0; i < out_; ++i) {
    const double gi = g[i];
    bias_.grad[i] += gi;
    if (gi == 0.0) continue;
    double* grow = weights_.grad.data() + i * in_;
    const double* wrow = weights_.value.data() + i * in_;
    for (std::size_t j = 0; j < in_; ++j) {
      grow[j] += gi * input_.data[j];
      grad_in.data[j] += gi * wrow[j];
    }
  }
  return grad_in;
}

std::string Dense::name() const {
  return "dense(" + std::to_string(in_) + "->" + std::to_string(out_) + ", " + activation_name(activation_) + ")";
}

Conv1d::Conv1d(std::size_t in_channels, std::size_t filters, std::size_t kernel_size, Activation activation,
               std::uint64_t init_seed)
    : in_channels_(in_channels),
      filters_(filters),
      kernel_size_(kernel_size),
      activation_(activation),
      kernels_("kernels", {filters, in_channels, kernel_size}),
      bias_("bias", {filters}) {
  require(in_channels > 0 && filters > 0 && kernel_size > 0, "conv1d dimensions must be positive");
  glorot_uniform(kernels_.value, in_channels * kernel_size, filters * kernel_size, init_seed);
}

Tensor Conv1d::forward(const Tensor& x, Mode) {
  require(x.shape.size() == 2 && x.shape[0] == in_channels_, "conv1d input channel count mismatch");
  input_ = x;
  output_ = conv1d_forward(x, kernels_.value, bias_.value, kernel_size_, activation_);
  return output_;
}

void Conv1d::append_pattern(std::vector<std::uint8_t>& out) const {
  if (activation_ != Activation::kRelu) return;
  for (double v : output_.data) out.push_back(v > 0.0);
}

Tensor Conv1d::backward(const Tensor& grad_out) {
  require(grad_out.shape == output_.shape, "conv1d gradient has the wrong shape");
  const std::size_t length = input_.shape[1];
  const auto len = static_cast<std::ptrdiff_t>(length);
  const auto pad_left = static_cast<std::ptrdiff_t>((kernel_size_ - 1) / 2);

  std::vector<double> g = grad_out.data;
  if (activation_ == Activation::kRelu) {
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (output_.data[i] <= 0.0) g[i] = 0.0;
    }
  }

  Tensor grad_in = Tensor::zeros(input_.shape);
  for (std::size_t f = 0; f < filters_; ++f) {
    const double* gf = g.data() + f * length;
    double bsum = 0.0;
    for (std::size_t j = 0; j < length; ++j) bsum += gf[j];
    bias_.grad[f] += bsum;
    for (std::size_t c = 0; c < in_channels_; ++c) {
      const double* in = input_.data.data() + c * length;
      double* din = grad_in.data.data() + c * length;
      for (std::size_t k = 0; k < kernel_size_; ++k) {
        const std::size_t widx = (f * in_channels_ + c) * kernel_size_ + k;
        const double w = kernels_.value[widx];
        const std::ptrdiff_t offset = static_cast<std::ptrdiff_t>(k) - pad_left;
        const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, -offset);
        const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(len, len - offset);
        double wsum = 0.0;
        for (std::ptrdiff_t j = lo; j < hi; ++j) {
          wsum += gf[j] * in[j + offset];
          din[j + offset] += gf[j] * w;
        }
        kernels_.grad[widx] += wsum;
      }
    }
  }
  return grad_in;
}

std::string Conv1d::name() const {
  return "conv1d(" + std::to_string(in_channels_) + "->" + std::to_string(filters_) + ", kernel " +
         std::to_string(kernel_size_) + ", " + activation_name(activation_) + ")";
}

Tensor MaxPool1d::forward(const Tensor& x, Mode) {
  Tensor y = maxpool1d_forward(x);
  const std::size_t length = x.shape[1];
  const std::size_t out_len = y.shape[1];
  input_shape_ = x.shape;
  winners_.resize(y.size());
  for (std::size_t c = 0; c < x.shape[0]; ++c) {
    for (std::size_t j = 0; j < out_len; ++j) {
      const std::size_t a = c * length + 2 * j;
      winners_[c * out_len + j] = x.data[a + 1] > x.data[a] ? a + 1 : a;
    }
  }
  return y;
}

void MaxPool1d::append_pattern(std::vector<std::uint8_t>& out) const {
  for (std::size_t w : winners_) out.push_back(w & 1);
}

Tensor MaxPool1d::backward(const Tensor& grad_out) {
  require(grad_out.size() == winners_.size(), "maxpool1d gradient has the wrong length");
  Tensor grad_in = Tensor::zeros(input_shape_);
  for (std::size_t i = 0; i < winners_.size(); ++i) grad_in.data[winners_[i]] += grad_out.data[i];
  return grad_in;
}

Dropout::Dropout(double rate, std::uint64_t seed) : rate_(rate), seed_(seed) {
  if (!(rate >= 0.0 && rate < 1.0)) throw Error(ErrorCode::kInvalidArgument, "dropout rate must lie in [0, 1)");
}

Tensor Dropout::forward(const Tensor& x, Mode mode) {
  if (mode == Mode::kEval || rate_ == 0.0) {
    mask_.assign(x.size(), 1.0);
    return x;
  }
  mask_ = dropout_mask(x.size(), rate_, seed_, calls_++);
  Tensor y = x;
  for (std::size_t i = 0; i < y.size(); ++i) y.data[i] *= mask_[i];
  return y;
}

Tensor Dropout::backward(const Tensor& grad_out) {
  require(grad_out.size() == mask_.size(), "dropout gradient has the wrong length");
  Tensor g = grad_out;
  for (std::size_t i = 0; i < g.size(); ++i) g.data[i] *= mask_[i];
  return g;
}

std::string Dropout::name() const {
  std::string r = std::to_string(rate_);
  return "dropout(" + r.substr(0, r.find_last_not_of('0') + 1) + ")";
}

Tensor Flatten::forward(const Tensor& x, Mode) {
  input_shape_ = x.shape;
  return Tensor::vector(x.data);
}

Tensor Flatten::backward(const Tensor& grad_out) { return Tensor(input_shape_, grad_out.data); }

Tensor Softmax::forward(const Tensor& x, Mode) {
  output_ = softmax(x.data);
  return Tensor(x.shape, output_);
}

Tensor Softmax::backward(const Tensor& grad_out) {
  require(grad_out.size() == output_.size(), "softmax gradient has the wrong length");
  double dot = 0.0;
  for (std::size_t i = 0; i < output_.size(); ++i) dot += grad_out.data[i] * output_[i];
  Tensor g = grad_out;
  for (std::size_t i = 0; i < output_.size(); ++i) g.data[i] = output_[i] * (grad_out.data[i] - dot);
  return g;
}

// ---------------------------------------------------------------------------

Sequential::Sequential(std::span<const LayerSpec> specs, std::uint64_t seed, std::uint64_t first_index) {
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const std::uint64_t index = first_index + i;
    const std::uint64_t init_seed = derive_seed(seed, Stream::kInit, index);
    std::visit(
        [&](const auto& spec) {
          using T = std::decay_t<decltype(spec)>;
          if constexpr (std::is_same_v<T, DenseSpec>) {
            add(std::make_unique<Dense>(spec.in, spec.out, spec.activation, init_seed));
          } else if constexpr (std::is_same_v<T, DropoutSpec>) {
            add(std::make_unique<Dropout>(spec.rate, derive_seed(seed, Stream::kDropout, index)));
          } else if constexpr (std::is_same_v<T, Conv1dSpec>) {
            add(std::make_unique<Conv1d>(spec.in_channels, spec.filters, spec.kernel, spec.activation, init_seed));
          } else if constexpr (std::is_same_v<T, MaxPool1dSpec>) {
            add(std::make_unique<MaxPool1d>());
          } else if constexpr (std::is_same_v<T, FlattenSpec>) {
            add(std::make_unique<Flatten>());
          } else {
            add(std::make_unique<Softmax>());
          }
        },
        specs[i]);
  }
}

Tensor Sequential::forward(const Tensor& x, Mode mode) {
  Tensor h = x;
  for (auto& layer : layers_) h = layer->forward(h, mode);
  return h;
}

Tensor Sequential::backward(const Tensor& grad_out, std::size_t skip_last) {
  require(skip_last <= layers_.size(), "cannot skip more layers than the network has");
  Tensor g = grad_out;
  for (std::size_t i = layers_.size() - skip_last; i-- > 0;) g = layers_[i]->backward(g);
  return g;
}

void Sequential::append_pattern(std::vector<std::uint8_t>& out) const {
  for (const auto& layer : layers_) layer->append_pattern(out);
}

std::vector<Parameter*> Sequential::parameters() {
  std::vector<Parameter*> out;
  for (auto& layer : layers_) {
    for (Parameter* p : layer->parameters()) out.push_back(p);
  }
  return out;
}

// ---------------------------------------------------------------------------

Adam::Adam(double lr) { state_.lr = lr; }

void Adam::step(std::span<Parameter* const> params) {
  if (state_.m.empty()) {
    for (const Parameter* p : params) {
      state_.m.emplace_back(p->value.size(), 0.0);
      state_.v.emplace_back(p->value.size(), 0.0);
    }
  }
  require(state_.m.size() == params.size(), "Adam parameter list changed between steps");
  ++state_.t;
  const double t = static_cast<double>(state_.t);
  const double correction1 = 1.0 - std::pow(state_.beta1, t);
  const double correction2 = 1.0 - std::pow(state_.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = *params[k];
    auto& m = state_.m[k];
    auto& v = state_.v[k];
    require(m.size() == p.value.size(), "Adam moment shape does not mirror parameter " + p.name);
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i];
      m[i] = state_.beta1 * m[i] + (1.0 - state_.beta1) * g;
      v[i] = state_.beta2 * v[i] + (1.0 - state_.beta2) * g * g;
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      p.value[i] -= state_.lr * m_hat / (std::sqrt(v_hat) + state_.epsilon);
    }
  }
}

void zero_grad(std::span<Parameter* const> params) {
  for (Parameter* p : params) p->zero_grad();
}

std::size_t parameter_count(std::span<Parameter* const> params) {
  std::size_t n = 0;
  for (const Parameter* p : params) n += p->value.size();
  return n;
}

// ---------------------------------------------------------------------------

GradCheckResult grad_check(std::span<Parameter* const> params, const std::function<double()>& loss,
                           const std::function<void()>& compute_gradients, const GradCheckOptions& options,
                           const std::function<std::vector<std::uint8_t>()>& pattern) {
  std::vector<std::uint8_t> base;
  if (pattern) {
    loss();
    base = pattern();
  }
  compute_gradients();
  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (const Parameter* p : params) analytic.push_back(p->grad);

  GradCheckResult result;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = *params[k];
    std::vector<std::size_t> coords;
    if (options.max_coords_per_param == 0 || options.max_coords_per_param >= p.value.size()) {
      coords.resize(p.value.size());
      std::iota(coords.begin(), coords.end(), std::size_t{0});
    } else {
      coords = permutation(p.value.size(), derive_seed(options.seed, Stream::kGradCheck, k));
      coords.resize(options.max_coords_per_param);
    }
    for (std::size_t i : coords) {
      const double saved = p.value[i];
      p.value[i] = saved + options.step;
      const double up = loss();
      const bool kink_up = pattern && pattern() != base;
      p.value[i] = saved - options.step;
      const double down = loss();
      const bool kink_down = pattern && pattern() != base;
      p.value[i] = saved;
      if (kink_up || kink_down) {
        ++result.kinks_skipped;
        continue;
      }
      const double numeric = (up - down) / (2.0 * options.step);
      const double a = analytic[k][i];
      const double err = std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
      ++result.coords_checked;
      if (err > result.max_rel_error || !std::isfinite(err)) {
        result.max_rel_error = std::isfinite(err) ? err : std::numeric_limits<double>::infinity();
        result.worst_parameter = p.name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return result;
}

}  // namespace semlink::nn

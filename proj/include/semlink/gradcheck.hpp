#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>

#include "semlink/models.hpp"
#include "semlink/nn.hpp"
#include "semlink/tensor_net.hpp"

namespace semlink {

/// Eval-mode mean cross-entropy over `batch` against every parameter.
/// Coordinates whose step crosses a relu or pool switch are skipped.
nn::GradCheckResult grad_check_classifier(Classifier& model, std::span<const Sample> batch,
                                          const nn::GradCheckOptions& options = {});

/// Raw tensor-layer score against W, V, b and both entity vectors.
nn::GradCheckResult grad_check_ntl(const NtlRelationParams& params, std::span<const double> head,
                                   std::span<const double> tail, const nn::GradCheckOptions& options = {});

enum class GradCheckTarget { kBaseline, kFusion, kTensorLayer };

GradCheckTarget parse_grad_check_target(const std::string& name);

struct GradCheckSweep {
  std::size_t draws = 0;
  std::size_t coords_checked = 0;
  std::size_t kinks_skipped = 0;
  double max_rel_error = 0.0;
  std::string worst;
};

/// `draws` independent random draws. Each draw reseeds the network (with
/// biases drawn from [-0.1, 0.1]) and the input sample; tensor-layer draws
/// take every entry from [-1, 1] with d = 5, k = 3.
/// `coords_per_param` = 0 checks every coordinate.
GradCheckSweep grad_check_sweep(GradCheckTarget target, std::size_t draws, std::uint64_t seed,
                                std::size_t coords_per_param, double step = 1e-6);

}  // namespace semlink

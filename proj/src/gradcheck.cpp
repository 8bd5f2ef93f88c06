#include "semlink/gradcheck.hpp"

#include <vector>

#include "semlink/error.hpp"
#include "semlink/rng.hpp"

namespace semlink {

nn::GradCheckResult grad_check_classifier(Classifier& model, std::span<const Sample> batch,
                                          const nn::GradCheckOptions& options) {
  std::vector<const Sample*> ptrs;
  for (const Sample& s : batch) ptrs.push_back(&s);
  auto params = model.parameters();
  std::vector<std::uint8_t> pattern;
  auto loss = [&] {
    pattern.clear();
    double total = 0.0;
    for (const Sample& s : batch) {
      total += nn::cross_entropy(s.label, model.forward(s, nn::Mode::kEval));
      model.append_pattern(pattern);
    }
    return total / static_cast<double>(batch.size());
  };
  auto gradients = [&] { model.accumulate_gradients(ptrs, nn::Mode::kEval); };
  return nn::grad_check(params, loss, gradients, options, [&] { return pattern; });
}

nn::GradCheckResult grad_check_ntl(const NtlRelationParams& params, std::span<const double> head,
                                   std::span<const double> tail, const nn::GradCheckOptions& options) {
  const std::size_t d = params.d;
  const std::size_t k = params.k;
  nn::Parameter w("W", {k, d, d}), v("V", {k, 2 * d}), b("b", {k}), h("head", {d}), t("tail", {d});
  w.value = params.weights;
  v.value = params.linear;
  b.value = params.bias;
  h.value.assign(head.begin(), head.end());
  t.value.assign(tail.begin(), tail.end());
  std::vector<nn::Parameter*> list = {&w, &v, &b, &h, &t};

  auto current = [&] {
    NtlRelationParams p(d, k);
    p.weights = w.value;
    p.linear = v.value;
    p.bias = b.value;
    return p;
  };
  auto loss = [&] { return ntl_score(current(), h.value, t.value); };
  auto gradients = [&] {
    NtlGradients g = ntl_gradients(current(), h.value, t.value);
    w.grad = std::move(g.weights);
    v.grad = std::move(g.linear);
    b.grad = std::move(g.bias);
    h.grad = std::move(g.head);
    t.grad = std::move(g.tail);
  };
  return nn::grad_check(list, loss, gradients, options);
}

GradCheckTarget parse_grad_check_target(const std::string& name) {
  if (name == "baseline") return GradCheckTarget::kBaseline;
  if (name == "fusion") return GradCheckTarget::kFusion;
  if (name == "ntl") return GradCheckTarget::kTensorLayer;
  throw Error(ErrorCode::kInvalidArgument, "unknown grad-check target '" + name + "'");
}

GradCheckSweep grad_check_sweep(GradCheckTarget target, std::size_t draws, std::uint64_t seed,
                                std::size_t coords_per_param, double step) {
  GradCheckSweep sweep;
  for (std::size_t draw = 0; draw < draws; ++draw) {
    const std::uint64_t draw_seed = derive_seed(seed, Stream::kGradCheck, draw);
    Rng rng(derive_seed(draw_seed, Stream::kSynthetic));
    nn::GradCheckOptions options{step, coords_per_param, draw_seed};
    nn::GradCheckResult r;

    if (target == GradCheckTarget::kTensorLayer) {
      constexpr std::size_t d = 5, k = 3;
      NtlRelationParams p(d, k);
      for (double& x : p.weights) x = rng.uniform(-1.0, 1.0);
      for (double& x : p.linear) x = rng.uniform(-1.0, 1.0);
      for (double& x : p.bias) x = rng.uniform(-1.0, 1.0);
      std::vector<double> h(d), t(d);
      for (double& x : h) x = rng.uniform(-1.0, 1.0);
      for (double& x : t) x = rng.uniform(-1.0, 1.0);
      r = grad_check_ntl(p, h, t, options);
    } else {
      std::unique_ptr<Classifier> model;
      Sample sample;
      sample.embedding.resize(100);
      for (double& x : sample.embedding) x = rng.uniform(-1.0, 1.0);
      if (target == GradCheckTarget::kBaseline) {
        model = build_baseline(draw_seed);
      } else {
        model = build_fusion(draw_seed);
        sample.image.resize(kImageFeatureDim);
        for (double& x : sample.image) x = rng.uniform(0.0, 1.0);
      }
      sample.label = static_cast<std::size_t>(rng.below(kNumClasses));
      for (nn::Parameter* p : model->parameters()) {
        if (p->shape.size() == 1) {
          for (double& x : p->value) x = rng.uniform(-0.1, 0.1);
        }
      }
      r = grad_check_classifier(*model, std::span<const Sample>(&sample, 1), options);
    }

    ++sweep.draws;
    sweep.coords_checked += r.coords_checked;
    sweep.kinks_skipped += r.kinks_skipped;
    if (r.max_rel_error >= sweep.max_rel_error) {
      sweep.max_rel_error = r.max_rel_error;
      sweep.worst = "draw " + std::to_string(draw) + " " + r.worst_parameter;
    }
  }
  return sweep;
}

}  // namespace semlink

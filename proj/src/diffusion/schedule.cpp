#include <cmath>

#include "seamless/diffusion.hpp"
#include "seamless/error.hpp"
#include "seamless/tensor.hpp"

namespace seamless {
namespace {

void check_step(int t, const NoiseSchedule& s) {
  if (t < 0 || t >= s.steps) {
    throw InvalidArgument("diffusion step " + std::to_string(t) + " outside [0, " + std::to_string(s.steps) + ")");
  }
}

void check_same_shape(const torch::Tensor& a, const torch::Tensor& b, const char* who) {
  if (a.sizes() != b.sizes()) throw ShapeError(std::string(who) + ": shape mismatch");
}

// Per-item coefficient shaped to broadcast against y ([B, ...]).
torch::Tensor per_item(const std::vector<double>& table, const torch::Tensor& t, const torch::Tensor& like) {
  auto values = torch::tensor(table, torch::kFloat64).index_select(0, t.to(torch::kInt64)).to(like.dtype());
  std::vector<std::int64_t> shape(static_cast<std::size_t>(like.dim()), 1);
  shape[0] = like.size(0);
  return values.reshape(shape);
}

}  // namespace

NoiseSchedule make_schedule(int steps, ScheduleKind kind, double beta_min, double beta_max) {
  if (steps < 1) throw InvalidArgument("noise schedule needs at least one step");
  if (!(beta_min > 0.0 && beta_min <= beta_max && beta_max < 1.0)) {
    throw InvalidArgument("beta range must satisfy 0 < min <= max < 1");
  }
  NoiseSchedule s;
  s.steps = steps;
  double bar = 1.0;
  for (int t = 0; t < steps; ++t) {
    double beta = beta_min;
    if (kind == ScheduleKind::Linear && steps > 1) beta = beta_min + (beta_max - beta_min) * t / (steps - 1);
    const double prev_bar = bar;
    bar *= 1.0 - beta;
    s.beta.push_back(beta);
    s.alpha.push_back(1.0 - beta);
    s.alpha_bar.push_back(bar);
    s.coef_y0.push_back(beta * std::sqrt(prev_bar) / (1.0 - bar));
    s.coef_yt.push_back((1.0 - prev_bar) * std::sqrt(1.0 - beta) / (1.0 - bar));
    s.posterior_variance.push_back(beta * (1.0 - prev_bar) / (1.0 - bar));
  }
  return s;
}

torch::Tensor forward_diffuse(const torch::Tensor& y0, int t, const torch::Tensor& noise, const NoiseSchedule& s) {
  check_step(t, s);
  check_same_shape(y0, noise, "forward_diffuse");
  return std::sqrt(s.alpha_bar[t]) * y0 + std::sqrt(1.0 - s.alpha_bar[t]) * noise;
}

torch::Tensor forward_diffuse(const torch::Tensor& y0, const torch::Tensor& t, const torch::Tensor& noise,
                              const NoiseSchedule& s) {
  check_same_shape(y0, noise, "forward_diffuse");
  if (t.dim() != 1 || t.size(0) != y0.size(0)) throw ShapeError("forward_diffuse: one step per batch item");
  if ((t < 0).any().item<bool>() || (t >= s.steps).any().item<bool>()) {
    throw InvalidArgument("forward_diffuse: step out of range");
  }
  std::vector<double> root_bar, root_rest;
  for (double b : s.alpha_bar) {
    root_bar.push_back(std::sqrt(b));
    root_rest.push_back(std::sqrt(1.0 - b));
  }
  return per_item(root_bar, t, y0) * y0 + per_item(root_rest, t, y0) * noise;
}

torch::Tensor posterior_mean(const torch::Tensor& y_t, const torch::Tensor& y0_pred, int t, const NoiseSchedule& s) {
  check_step(t, s);
  check_same_shape(y_t, y0_pred, "posterior_mean");
  return s.coef_y0[t] * y0_pred + s.coef_yt[t] * y_t;
}

torch::Tensor posterior_sample(const torch::Tensor& y_t, const torch::Tensor& y0_pred, int t, const NoiseSchedule& s,
                               const torch::Tensor& noise) {
  check_step(t, s);
  check_same_shape(y_t, y0_pred, "posterior_sample");
  if (t == 0) return y0_pred;
  check_same_shape(y_t, noise, "posterior_sample");
  return posterior_mean(y_t, y0_pred, t, s) + std::sqrt(s.posterior_variance[t]) * noise;
}

torch::Tensor posterior_sample(const torch::Tensor& y_t, const torch::Tensor& y0_pred, int t, const NoiseSchedule& s,
                               Rng& rng) {
  check_step(t, s);
  if (t == 0) return posterior_sample(y_t, y0_pred, t, s, torch::Tensor());
  return posterior_sample(y_t, y0_pred, t, s, normal_tensor(rng, y_t.sizes(), y_t.scalar_type()));
}

torch::Tensor run_reverse_chain(const torch::Tensor& context, const torch::Tensor& region, const NoiseSchedule& s,
                                const DenoiseFn& denoise, Rng& rng) {
  auto inside = region.to(torch::kBool);
  while (inside.dim() < context.dim()) inside = inside.unsqueeze(-1);
  inside = inside.expand(context.sizes());
  auto y = normal_tensor(rng, context.sizes(), context.scalar_type());
  for (int t = s.steps - 1; t >= 0; --t) {
    auto pinned = forward_diffuse(context, t, normal_tensor(rng, context.sizes(), context.scalar_type()), s);
    auto y_in = torch::where(inside, y, pinned);
    auto y0 = denoise(y_in, t);
    check_same_shape(y0, context, "denoiser output");
    y = t > 0 ? posterior_sample(y_in, y0, t, s, rng) : y0;
  }
  return torch::where(inside, y, context);
}

std::vector<torch::Tensor> generate_regions(const torch::Tensor& context, const MaskSpec& spec, const NoiseSchedule& s,
                                            const DenoiseFn& denoise, Rng& rng) {
  if (spec.regions.empty()) return {};
  if (context.dim() != 2) throw ShapeError("generate_regions: context must be [frames, mels]");
  spec.validate(static_cast<std::size_t>(context.size(0)));
  auto flags = spec.frame_flags(static_cast<std::size_t>(context.size(0)));
  auto region = torch::from_blob(flags.data(), {static_cast<std::int64_t>(flags.size())}, torch::kUInt8).to(torch::kBool);
  auto full = run_reverse_chain(context, region, s, denoise, rng);
  std::vector<torch::Tensor> out;
  for (const auto& r : spec.regions) {
    out.push_back(full.slice(0, static_cast<std::int64_t>(r.start_frame), static_cast<std::int64_t>(r.end_frame)).clone());
  }
  return out;
}

}  // namespace seamless

#pragma once

#include <functional>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "seamless/masking.hpp"
#include "seamless/rng.hpp"

namespace seamless {

enum class ScheduleKind { Linear };

struct NoiseSchedule {
  int steps = 0;
  std::vector<double> beta;
  std::vector<double> alpha;
  std::vector<double> alpha_bar;
  // Posterior q(y_{t-1} | y_t, y0) mean = coef_y0[t] * y0 + coef_yt[t] * y_t.
  std::vector<double> coef_y0;
  std::vector<double> coef_yt;
  std::vector<double> posterior_variance;
};

// Throws InvalidArgument unless steps >= 1 and 0 < beta_min <= beta_max < 1.
NoiseSchedule make_schedule(int steps, ScheduleKind kind, double beta_min, double beta_max);

// sqrt(alpha_bar[t]) * y0 + sqrt(1 - alpha_bar[t]) * noise.
torch::Tensor forward_diffuse(const torch::Tensor& y0, int t, const torch::Tensor& noise,
                              const NoiseSchedule& schedule);
// Per-item steps: y0 [B, ...], t [B].
torch::Tensor forward_diffuse(const torch::Tensor& y0, const torch::Tensor& t, const torch::Tensor& noise,
                              const NoiseSchedule& schedule);

torch::Tensor posterior_mean(const torch::Tensor& y_t, const torch::Tensor& y0_pred, int t,
                             const NoiseSchedule& schedule);
// Mean plus sqrt(posterior_variance[t]) * noise; t == 0 returns y0_pred.
torch::Tensor posterior_sample(const torch::Tensor& y_t, const torch::Tensor& y0_pred, int t,
                               const NoiseSchedule& schedule, const torch::Tensor& noise);
torch::Tensor posterior_sample(const torch::Tensor& y_t, const torch::Tensor& y0_pred, int t,
                               const NoiseSchedule& schedule, Rng& rng);

// Predicts y0 from the current chain state at step t.
using DenoiseFn = std::function<torch::Tensor(const torch::Tensor& y_t, int t)>;

// Reverse chain over a whole [F, M] (or [B, F, M]) tensor. Frames where
// `region` is false are pinned to forward_diffuse(context, t) before every
// denoiser call; region frames start from unit noise. Returns the final
// y0 estimate with context frames copied from `context`.
torch::Tensor run_reverse_chain(const torch::Tensor& context, const torch::Tensor& region,
                                const NoiseSchedule& schedule, const DenoiseFn& denoise, Rng& rng);

// Generated frames for each region of `spec`, in region order; empty spec gives {}.
std::vector<torch::Tensor> generate_regions(const torch::Tensor& context, const MaskSpec& spec,
                                            const NoiseSchedule& schedule, const DenoiseFn& denoise, Rng& rng);

}  // namespace seamless

#include <cmath>

#include "seamless/error.hpp"
#include "seamless/fluency.hpp"
#include "seamless/tensor.hpp"

namespace seamless {
namespace {

// Boundary statistic between an edge frame and its outside neighbour.
torch::Tensor edge_delta(const torch::Tensor& edge, const torch::Tensor& neighbour, SmoothnessStatistic statistic) {
  if (statistic == SmoothnessStatistic::AdjacentEuclidean) {
    return torch::sqrt((edge - neighbour).pow(2).sum() + 1e-12);
  }
  return frame_variance(edge) - frame_variance(neighbour);
}

double edge_delta(std::span<const float> edge, std::span<const float> neighbour, SmoothnessStatistic statistic) {
  if (statistic == SmoothnessStatistic::AdjacentEuclidean) {
    double sum = 0.0;
    for (std::size_t i = 0; i < edge.size(); ++i) sum += (edge[i] - neighbour[i]) * static_cast<double>(edge[i] - neighbour[i]);
    return std::sqrt(sum + 1e-12);
  }
  return frame_variance(edge) - frame_variance(neighbour);
}

}  // namespace

SmoothnessStatistic smoothness_from_string(const std::string& name) {
  if (name == "variance") return SmoothnessStatistic::Variance;
  if (name == "adjacent_euclidean") return SmoothnessStatistic::AdjacentEuclidean;
  throw InvalidArgument("unknown smoothness statistic '" + name + "'");
}

const char* to_string(SmoothnessStatistic statistic) {
  return statistic == SmoothnessStatistic::Variance ? "variance" : "adjacent_euclidean";
}

double frame_variance(std::span<const float> frame) {
  if (frame.empty()) throw InvalidArgument("frame_variance: empty frame");
  double mean = 0.0;
  for (float v : frame) mean += v;
  mean /= static_cast<double>(frame.size());
  double var = 0.0;
  for (float v : frame) var += (v - mean) * (v - mean);
  return var / static_cast<double>(frame.size());
}

torch::Tensor frame_variance(const torch::Tensor& frames) {
  return frames.var(-1, /*unbiased=*/false);
}

BoundaryStats boundary_deltas(const MelSpectrogram& mel, const MaskRegion& region, SmoothnessStatistic statistic) {
  MaskSpec{{region}, 0.0}.validate(mel.num_frames());
  BoundaryStats stats;
  if (region.start_frame > 0) {
    stats.left_present = true;
    stats.delta_left = edge_delta(mel.frame(region.start_frame), mel.frame(region.start_frame - 1), statistic);
  }
  if (region.end_frame < mel.num_frames()) {
    stats.right_present = true;
    stats.delta_right = edge_delta(mel.frame(region.end_frame - 1), mel.frame(region.end_frame), statistic);
  }
  return stats;
}

torch::Tensor acoustic_consistency_loss(const torch::Tensor& pred_region, const torch::Tensor& gt_mel,
                                        const MaskRegion& region, SmoothnessStatistic statistic) {
  if (gt_mel.dim() != 2 || pred_region.dim() != 2 || pred_region.size(1) != gt_mel.size(1)) {
    throw ShapeError("acoustic_consistency_loss: expected [frames, mels] tensors with equal band counts");
  }
  if (pred_region.size(0) != static_cast<std::int64_t>(region.length())) {
    throw ShapeError("acoustic_consistency_loss: predicted region has " + std::to_string(pred_region.size(0)) +
                     " frames, region spans " + std::to_string(region.length()));
  }
  MaskSpec{{region}, 0.0}.validate(static_cast<std::size_t>(gt_mel.size(0)));
  auto gt = gt_mel.to(pred_region.dtype());
  const auto start = static_cast<std::int64_t>(region.start_frame);
  const auto end = static_cast<std::int64_t>(region.end_frame);
  auto loss = torch::zeros({}, pred_region.options());
  if (start > 0) {
    auto target = edge_delta(gt[start], gt[start - 1], statistic).detach();
    loss = loss + (edge_delta(pred_region[0], gt[start - 1], statistic) - target).pow(2);
  }
  if (end < gt.size(0)) {
    auto target = edge_delta(gt[end - 1], gt[end], statistic).detach();
    loss = loss + (edge_delta(pred_region[-1], gt[end], statistic) - target).pow(2);
  }
  return loss;
}

torch::Tensor acoustic_consistency_loss(const std::vector<torch::Tensor>& pred_regions, const torch::Tensor& gt_mel,
                                        const MaskSpec& spec, SmoothnessStatistic statistic) {
  if (pred_regions.size() != spec.regions.size()) throw ShapeError("acoustic_consistency_loss: one tensor per region");
  auto total = torch::zeros({}, gt_mel.options());
  for (std::size_t i = 0; i < pred_regions.size(); ++i) {
    total = total + acoustic_consistency_loss(pred_regions[i], gt_mel, spec.regions[i], statistic);
  }
  return total;
}

torch::Tensor mae_loss(const torch::Tensor& pred, const torch::Tensor& gt) {
  if (pred.sizes() != gt.sizes()) throw ShapeError("mae_loss: shape mismatch");
  return (pred - gt.to(pred.dtype())).abs().mean();
}

torch::Tensor ssim(const torch::Tensor& pred, const torch::Tensor& gt, std::optional<double> lo, std::optional<double> hi,
                   const SsimOptions& o) {
  if (pred.sizes() != gt.sizes() || pred.dim() != 2) throw ShapeError("ssim: expected equal [frames, mels] shapes");
  if (pred.numel() == 0) throw InvalidArgument("ssim: empty input");
  auto target = gt.to(pred.dtype());
  const double low = lo ? *lo : target.min().item<double>();
  const double high = hi ? *hi : target.max().item<double>();
  const double range = std::max(high - low, 1e-6);
  auto x = ((pred - low) / range).unsqueeze(0).unsqueeze(0);
  auto y = ((target - low) / range).unsqueeze(0).unsqueeze(0);
  const auto wh = std::min<std::int64_t>(o.window, pred.size(0));
  const auto ww = std::min<std::int64_t>(o.window, pred.size(1));
  auto pool = [&](const torch::Tensor& t) { return torch::avg_pool2d(t, {wh, ww}, {1, 1}); };
  auto mx = pool(x), my = pool(y);
  auto vx = pool(x * x) - mx * mx;
  auto vy = pool(y * y) - my * my;
  auto cxy = pool(x * y) - mx * my;
  auto map = ((2 * mx * my + o.c1) * (2 * cxy + o.c2)) / ((mx * mx + my * my + o.c1) * (vx + vy + o.c2));
  return map.mean().clamp(0.0, 1.0);
}

torch::Tensor reconstruction_loss(const torch::Tensor& pred, const torch::Tensor& gt, std::optional<double> lo,
                                  std::optional<double> hi, const SsimOptions& options) {
  return mae_loss(pred, gt) + (1.0 - ssim(pred, gt, lo, hi, options));
}

}  // namespace seamless

#include "seamless/tensor.hpp"

#include <cstring>

#include "seamless/error.hpp"

namespace seamless {

torch::Tensor to_tensor(const MelSpectrogram& mel) {
  auto t = torch::empty({static_cast<long>(mel.num_frames()), static_cast<long>(mel.num_mels())},
                        torch::kFloat32);
  std::memcpy(t.data_ptr<float>(), mel.values().data(), mel.values().size() * sizeof(float));
  return t;
}

MelSpectrogram to_mel(const torch::Tensor& frames, int hop_length, int win_length) {
  if (frames.dim() != 2) throw ShapeError("to_mel: expected a [frames, mels] tensor");
  auto t = frames.detach().to(torch::kCPU, torch::kFloat32).contiguous();
  std::vector<float> values(t.data_ptr<float>(), t.data_ptr<float>() + t.numel());
  return MelSpectrogram(static_cast<std::size_t>(t.size(0)), static_cast<std::size_t>(t.size(1)),
                        std::move(values), hop_length, win_length);
}

MelSpectrogram to_mel(const torch::Tensor& frames, const MelSpectrogram& like) {
  return to_mel(frames, like.hop_length(), like.win_length());
}

torch::Tensor to_tensor(std::span<const float> values) {
  auto t = torch::empty({static_cast<long>(values.size())}, torch::kFloat32);
  if (!values.empty()) std::memcpy(t.data_ptr<float>(), values.data(), values.size() * sizeof(float));
  return t;
}

std::vector<float> to_vector(const torch::Tensor& t) {
  auto c = t.detach().to(torch::kCPU, torch::kFloat32).contiguous();
  return {c.data_ptr<float>(), c.data_ptr<float>() + c.numel()};
}

torch::Tensor normal_tensor(Rng& rng, torch::IntArrayRef sizes, torch::Dtype dtype) {
  auto t = torch::empty(sizes, torch::kFloat32);
  rng.fill_normal({t.data_ptr<float>(), static_cast<std::size_t>(t.numel())});
  return dtype == torch::kFloat32 ? t : t.to(dtype);
}

}  // namespace seamless

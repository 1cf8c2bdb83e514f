#pragma once

#include <span>
#include <vector>

#include <torch/torch.h>

#include "seamless/mel.hpp"
#include "seamless/rng.hpp"

namespace seamless {

// [num_frames, num_mels] float32 copy of a spectrogram.
torch::Tensor to_tensor(const MelSpectrogram& mel);
// Inverse of to_tensor; `like` supplies hop/window metadata.
MelSpectrogram to_mel(const torch::Tensor& frames, const MelSpectrogram& like);
MelSpectrogram to_mel(const torch::Tensor& frames, int hop_length, int win_length);

torch::Tensor to_tensor(std::span<const float> values);
std::vector<float> to_vector(const torch::Tensor& t);

// Unit Gaussian tensor whose values come from `rng`, so results do not depend
// on the global torch generator.
torch::Tensor normal_tensor(Rng& rng, torch::IntArrayRef sizes,
                            torch::Dtype dtype = torch::kFloat32);

}  // namespace seamless

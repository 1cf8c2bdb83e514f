#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

namespace seamless {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Binary layout: "SMCK", u32 version, u64 meta length, meta JSON, u32 tensor
// count, then per tensor: u32 name length, name, u32 ndim, u64 dims, float32 LE.
struct Checkpoint {
  nlohmann::json meta;
  std::vector<std::pair<std::string, torch::Tensor>> tensors;

  const torch::Tensor& tensor(const std::string& name) const;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
// Throws IoError if unreadable, FormatError on bad magic or version mismatch.
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Parameters and buffers of `module`, each name prefixed by `prefix`.
std::vector<std::pair<std::string, torch::Tensor>> module_tensors(const torch::nn::Module& module,
                                                                  const std::string& prefix);
// Copies tensors named prefix+<name> into the module; every module tensor must be present.
void assign_module_tensors(torch::nn::Module& module, const Checkpoint& checkpoint,
                           const std::string& prefix);

}  // namespace seamless

#include "seamless/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "seamless/error.hpp"

namespace seamless {
namespace {

constexpr char kMagic[4] = {'S', 'M', 'C', 'K'};

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in, const std::string& path) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw FormatError("truncated checkpoint " + path);
  return v;
}

}  // namespace

const torch::Tensor& Checkpoint::tensor(const std::string& name) const {
  for (const auto& [key, value] : tensors) {
    if (key == name) return value;
  }
  throw FormatError("checkpoint has no tensor '" + name + "'");
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(kMagic, 4);
  put<std::uint32_t>(out, kCheckpointVersion);
  const auto meta = checkpoint.meta.dump();
  put<std::uint64_t>(out, meta.size());
  out.write(meta.data(), static_cast<std::streamsize>(meta.size()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(checkpoint.tensors.size()));
  for (const auto& [name, tensor] : checkpoint.tensors) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    auto t = tensor.detach().to(torch::kCPU, torch::kFloat32).contiguous();
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.dim()));
    for (auto d : t.sizes()) put<std::uint64_t>(out, static_cast<std::uint64_t>(d));
    out.write(reinterpret_cast<const char*>(t.data_ptr<float>()),
              static_cast<std::streamsize>(t.numel() * sizeof(float)));
  }
  if (!out) throw IoError("short write to " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  const auto name = path.string();
  char magic[4] = {};
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) throw FormatError(name + " is not a checkpoint");
  const auto version = get<std::uint32_t>(in, name);
  if (version != kCheckpointVersion) {
    throw FormatError(name + ": checkpoint version " + std::to_string(version) + ", expected " +
                      std::to_string(kCheckpointVersion));
  }
  Checkpoint ck;
  std::string meta(get<std::uint64_t>(in, name), '\0');
  in.read(meta.data(), static_cast<std::streamsize>(meta.size()));
  try {
    ck.meta = nlohmann::json::parse(meta);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(name + ": bad metadata: " + e.what());
  }
  const auto count = get<std::uint32_t>(in, name);
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string key(get<std::uint32_t>(in, name), '\0');
    in.read(key.data(), static_cast<std::streamsize>(key.size()));
    const auto ndim = get<std::uint32_t>(in, name);
    std::vector<std::int64_t> dims;
    for (std::uint32_t d = 0; d < ndim; ++d) dims.push_back(static_cast<std::int64_t>(get<std::uint64_t>(in, name)));
    auto t = torch::empty(dims, torch::kFloat32);
    in.read(reinterpret_cast<char*>(t.data_ptr<float>()), static_cast<std::streamsize>(t.numel() * sizeof(float)));
    if (!in) throw FormatError("truncated checkpoint " + name);
    ck.tensors.emplace_back(std::move(key), std::move(t));
  }
  return ck;
}

std::vector<std::pair<std::string, torch::Tensor>> module_tensors(const torch::nn::Module& module,
                                                                  const std::string& prefix) {
  std::vector<std::pair<std::string, torch::Tensor>> out;
  for (const auto& p : module.named_parameters()) out.emplace_back(prefix + p.key(), p.value());
  for (const auto& b : module.named_buffers()) out.emplace_back(prefix + b.key(), b.value());
  return out;
}

void assign_module_tensors(torch::nn::Module& module, const Checkpoint& checkpoint,
                           const std::string& prefix) {
  torch::NoGradGuard no_grad;
  auto copy = [&](const std::string& key, torch::Tensor& target) {
    const auto& source = checkpoint.tensor(prefix + key);
    if (source.sizes() != target.sizes()) {
      throw FormatError("checkpoint tensor '" + prefix + key + "' has the wrong shape");
    }
    target.copy_(source);
  };
  for (auto& p : module.named_parameters()) copy(p.key(), p.value());
  for (auto& b : module.named_buffers()) copy(b.key(), b.value());
}

}  // namespace seamless

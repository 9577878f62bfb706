#include "petprior/nn/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

namespace petprior::nn {
namespace {
constexpr char kMagic[8] = {'P', 'R', 'N', 'C', 'K', 'P', 'T', '1'};
}

const Tensor<float>& Checkpoint::get(const std::string& name) const {
  for (const auto& [n, t] : tensors) {
    if (n == name) return t;
  }
  fail(ErrorCode::kCorruptHeader, "checkpoint has no tensor '" + name + "'");
}

bool Checkpoint::has(const std::string& name) const {
  for (const auto& entry : tensors) {
    if (entry.first == name) return true;
  }
  return false;
}

void Checkpoint::put(const std::string& name, Tensor<float> t) {
  for (auto& [n, existing] : tensors) {
    if (n == name) {
      existing = std::move(t);
      return;
    }
  }
  tensors.emplace_back(name, std::move(t));
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  nlohmann::json header;
  header["meta"] = ckpt.meta;
  header["tensors"] = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, t] : ckpt.tensors) {
    const Shape s = t.shape();
    header["tensors"].push_back({{"name", name}, {"shape", {s.n, s.c, s.d, s.h, s.w}}, {"offset", offset}});
    offset += static_cast<std::uint64_t>(t.numel());
  }
  const std::string text = header.dump();
  const std::uint64_t len = text.size();

  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    require(out.good(), ErrorCode::kIo, "cannot write checkpoint " + path.string());
    out.write(kMagic, sizeof(kMagic));
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& entry : ckpt.tensors) {
      const auto& data = entry.second.data();
      out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(float)));
    }
    require(out.good(), ErrorCode::kIo, "write failed for checkpoint " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCode::kMissingFile, "checkpoint not found: " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  require(in.good() && std::memcmp(magic, kMagic, sizeof(kMagic)) == 0, ErrorCode::kCorruptHeader,
          "not a checkpoint file: " + path.string());
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  require(in.good() && len < (1u << 30), ErrorCode::kCorruptHeader, "corrupt checkpoint header: " + path.string());
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kCorruptHeader, "corrupt checkpoint header: " + path.string());
  }
  Checkpoint ckpt;
  ckpt.meta = header.at("meta");
  for (const auto& entry : header.at("tensors")) {
    const auto dims = entry.at("shape").get<std::vector<Index>>();
    require(dims.size() == 5, ErrorCode::kCorruptHeader, "corrupt tensor shape in " + path.string());
    const Shape s{dims[0], dims[1], dims[2], dims[3], dims[4]};
    Tensor<float> t(s);
    in.read(reinterpret_cast<char*>(t.data().data()), static_cast<std::streamsize>(t.numel() * sizeof(float)));
    require(in.good(), ErrorCode::kCorruptHeader, "truncated checkpoint: " + path.string());
    ckpt.tensors.emplace_back(entry.at("name").get<std::string>(), std::move(t));
  }
  return ckpt;
}

}  // namespace petprior::nn

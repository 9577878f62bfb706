#ifndef PETPRIOR_NN_CHECKPOINT_HPP
#define PETPRIOR_NN_CHECKPOINT_HPP

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "petprior/nn/tensor.hpp"

namespace petprior::nn {

/// Self-describing weight container.
///
/// Layout: 8-byte magic "PRNCKPT1", little-endian uint64 header length, a
/// JSON header ({"meta": ..., "tensors": [{"name", "shape", "offset"}]}),
/// then raw little-endian float32 tensor data.
struct Checkpoint {
  nlohmann::json meta = nlohmann::json::object();
  std::vector<std::pair<std::string, Tensor<float>>> tensors;

  const Tensor<float>& get(const std::string& name) const;
  bool has(const std::string& name) const;
  void put(const std::string& name, Tensor<float> t);
};

/// Writes to a temporary file and renames it into place.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

inline void store_parameters(Checkpoint& ckpt, const std::vector<Parameter<float>*>& params,
                             const std::string& prefix = {}) {
  for (const auto* p : params) ckpt.put(prefix + p->name, p->value);
}

inline void restore_parameters(const Checkpoint& ckpt, const std::vector<Parameter<float>*>& params,
                               const std::string& prefix = {}) {
  for (auto* p : params) {
    const Tensor<float>& t = ckpt.get(prefix + p->name);
    require(t.shape() == p->value.shape(), ErrorCode::kShapeMismatch,
            "checkpoint tensor " + p->name + " has shape " + to_string(t.shape()) + ", expected " +
                to_string(p->value.shape()));
    p->value = t;
  }
}

}  // namespace petprior::nn

#endif  // PETPRIOR_NN_CHECKPOINT_HPP

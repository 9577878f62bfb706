#include "petprior/hash.hpp"

#include <openssl/evp.h>

#include <array>
#include <fstream>
#include <memory>
#include <vector>

namespace petprior {
namespace {

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new(), &EVP_MD_CTX_free) {
    require(ctx_ && EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) == 1, ErrorCode::kIo,
            "sha256: digest init failed");
  }

  void update(const void* data, std::size_t size) {
    EVP_DigestUpdate(ctx_.get(), data, size);
  }

  std::array<unsigned char, 32> digest() {
    std::array<unsigned char, 32> out{};
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx_.get(), out.data(), &len);
    return out;
  }

  std::string hex() {
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string s;
    for (unsigned char b : digest()) {
      s.push_back(kDigits[b >> 4]);
      s.push_back(kDigits[b & 0xF]);
    }
    return s;
  }

 private:
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx_;
};

}  // namespace

std::string sha256_hex(std::span<const std::byte> bytes) {
  Sha256 h;
  h.update(bytes.data(), bytes.size());
  return h.hex();
}

std::string sha256_hex(std::string_view text) {
  Sha256 h;
  h.update(text.data(), text.size());
  return h.hex();
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCode::kMissingFile, "cannot open " + path.string());
  Sha256 h;
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    h.update(buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  return h.hex();
}

std::string volume_hash(const Volume3D& vol) {
  Sha256 h;
  const std::array<std::int64_t, 3> dims{vol.grid().nx, vol.grid().ny, vol.grid().nz};
  h.update(dims.data(), sizeof(dims));
  h.update(vol.spacing().data(), 3 * sizeof(double));
  h.update(vol.origin().data(), 3 * sizeof(double));
  const auto modality = to_string(vol.modality());
  h.update(modality.data(), modality.size());
  h.update(vol.data().data(), static_cast<std::size_t>(vol.data().size()) * sizeof(float));
  return h.hex();
}

std::uint64_t derive_seed(std::uint64_t parent, std::string_view label) {
  Sha256 h;
  const std::string text = std::to_string(parent) + "/" + std::string(label);
  h.update(text.data(), text.size());
  const auto d = h.digest();
  std::uint64_t seed = 0;
  for (int i = 7; i >= 0; --i) seed = (seed << 8) | d[static_cast<std::size_t>(i)];
  return seed;
}

}  // namespace petprior

#ifndef PETPRIOR_HASH_HPP
#define PETPRIOR_HASH_HPP

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>

#include "petprior/volume.hpp"

namespace petprior {

/// Lowercase hex SHA-256.
std::string sha256_hex(std::span<const std::byte> bytes);
std::string sha256_hex(std::string_view text);
std::string sha256_file(const std::filesystem::path& path);

/// Hash of grid, spacing, origin, modality and raw values.
std::string volume_hash(const Volume3D& vol);

/// Stage seeds: seed_child = first 8 bytes (little-endian) of
/// SHA-256("<parent seed decimal>/<label>").
std::uint64_t derive_seed(std::uint64_t parent, std::string_view label);

}  // namespace petprior

#endif  // PETPRIOR_HASH_HPP

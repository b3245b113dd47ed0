#pragma once

// Binary network checkpoint, little-endian throughout:
//
//   "SFEU"                 magic
//   u32                    version (= 1)
//   u8                     network count
//   per network:
//     u32                  layer count
//     per layer:
//       u32 in_dim, u32 out_dim
//       f64[out_dim*in_dim] row-major weights
//       f64[out_dim]        biases

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sfeuot/nets.hpp"

namespace sfeuot {

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> encode_checkpoint(const std::vector<NetworkParams>& nets);
std::vector<NetworkParams> decode_checkpoint(const std::vector<std::uint8_t>& bytes);

/// Writes to a temporary sibling and renames over the target.
void write_checkpoint(const std::filesystem::path& path, const std::vector<NetworkParams>& nets);
std::vector<NetworkParams> read_checkpoint(const std::filesystem::path& path);

/// Atomic text write (temp file + rename). Throws std::runtime_error naming the
/// path on failure.
void write_text_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace sfeuot

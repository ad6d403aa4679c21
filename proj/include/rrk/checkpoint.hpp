#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "rrk/transformer.hpp"

namespace rrk {

/// RRKCKPT1 layout, little-endian:
///   "RRKCKPT1"
///   u32 length + UTF-8 text block of "key=value" lines: model.* config
///     entries followed by meta.* provenance entries
///   u32 tensor count, then per tensor (sorted by name):
///     u32 name length, name, u8 dtype (1 = f64), u32 ndim, u64 dims[ndim],
///     row-major payload
inline constexpr char kCheckpointMagic[8] = {'R', 'R', 'K', 'C', 'K', 'P', 'T', '1'};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Flat key=value rendering of a model config (model.* keys).
std::map<std::string, std::string> config_entries(const ModelConfig& config);
ModelConfig config_from_entries(const std::map<std::string, std::string>& entries);

/// 64-bit FNV-1a, rendered as 16 hex digits.
std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t seed = 0xcbf29ce484222325ull);
std::string hex64(std::uint64_t value);

/// Hash over config and parameter bytes (metadata excluded).
std::string checkpoint_hash(const Checkpoint& ckpt);

}  // namespace rrk

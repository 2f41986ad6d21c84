#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "rnf/cells.h"

namespace rnf {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Named tensors plus string metadata, stored as a binary container.
///
/// Layout (all integers little-endian):
///   magic     8 bytes  "RNFCKPT\0"
///   version   u32
///   sections  u32
///   then per section:
///     name_len u32, name bytes, payload_len u64, payload bytes
///
/// Section "meta" holds "key=value\n" lines. Sections named "param/<name>"
/// hold a tensor: rank u32, rank x u64 dims, then float64 values row-major.
struct Checkpoint {
  std::map<std::string, std::string> meta;
  NamedTensors params;

  const std::string& require(const std::string& key) const;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);

/// Throws LoadError naming the offending field on a bad magic, version,
/// truncated section or malformed tensor.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace rnf

#pragma once

#include <map>
#include <string>

#include "bigcf/training.hpp"

namespace bigcf {

// Binary checkpoint layout (all integers and floats little-endian):
//   magic "BIGCFCKP" (8 bytes), version u32,
//   M, N, d, K, L as u64,
//   E0 then table_users then table_items, row-major float32,
//   u64 byte length + UTF-8 key=value config echo (one pair per line).
// Arrays round-trip bit-exactly; magic and version are checked before any
// array is read. Optimizer moments are not persisted.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ModelParams params;
  TrainConfig config;
  std::map<std::string, std::string> config_echo;
};

// Serializes `cfg` to the key=value form used in checkpoints and config
// files (keys match the CLI flag names).
std::map<std::string, std::string> config_to_map(const TrainConfig& cfg);
TrainConfig config_from_map(const std::map<std::string, std::string>& kv);

void save_checkpoint(const std::string& path, const ModelParams& params,
                     const TrainConfig& cfg);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace bigcf

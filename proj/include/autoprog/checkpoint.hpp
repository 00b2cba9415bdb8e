// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>

#include "autoprog/param_store.hpp"

namespace autoprog {

// Versioned little-endian container: magic "APCK", u32 version, u64 optimizer
// step count, a config snapshot (u32 length + text), then u32 tensor count
// and per tensor (u32 name length, name, u32 ndim, u32 dims..., fp32 data).
struct Checkpoint {
  std::string config_text;
  std::uint64_t optimizer_step = 0;
  ParamStore params;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace autoprog

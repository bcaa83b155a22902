#pragma once

#include <string>

#include "amsrn/training.hpp"

namespace amsrn {

inline constexpr int kCheckpointFormatVersion = 1;

// Structured-text checkpoint: config, vocabulary hash, and every parameter
// matrix as nested row arrays, serialized at full round-trip precision so
// load(save(x)) reproduces forward outputs bitwise. A format_version field
// gates loading.
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace amsrn

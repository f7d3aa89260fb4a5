// SPDX-License-Identifier: Apache-2.0

// Checkpoints: <prefix>.bin holds, per layer in order, the parameters then
// the momentum as little-endian float32; <prefix>.json lists layer names and
// shapes, the iteration and the hyperparameters. Values are narrowed to
// float32 on save.

#pragma once

#include <filesystem>

#include "lioncub/optimizer.hpp"

namespace lioncub {

void save_checkpoint(const std::filesystem::path& prefix,
                     const WorkerState& state, const LionHyper& hyper);

struct Checkpoint {
  WorkerState state;
  LionHyper hyper;
};

// Throws FormatError on a malformed or inconsistent checkpoint.
Checkpoint load_checkpoint(const std::filesystem::path& prefix);

}  // namespace lioncub

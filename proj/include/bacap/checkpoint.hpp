#pragma once

#include <filesystem>
#include <optional>

#include "bacap/data.hpp"
#include "bacap/model.hpp"

namespace bacap {

// Everything needed to resume or evaluate a trained model. The optimizer
// accumulators are the Adadelta running averages, present only when training
// state was saved.
struct Checkpoint {
  ModelParams model;
  Vocabulary vocab;
  std::optional<ModelParams> opt_grad_sq;    // E[g^2]
  std::optional<ModelParams> opt_update_sq;  // E[dx^2]
};

// Binary format: "BACAPCKPT1" magic, u32 version, u32 flags, the vocabulary
// as length-prefixed tokens, the four model dimensions as u64, then one named
// tensor section for the model and, when present, one each for the optimizer
// accumulators (row-major float64, little-endian). Saving the same checkpoint
// twice produces identical bytes.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace bacap

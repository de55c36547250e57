#pragma once

#include <vector>

namespace bacap {

// Reserved vocabulary slots, fixed across every model and checkpoint.
inline constexpr int kBosId = 0;
inline constexpr int kEosId = 1;
inline constexpr int kUnkId = 2;
inline constexpr int kNumReservedTokens = 3;

// A caption as vocabulary ids. Encoded training captions take the form
// BOS, w_1..w_k, EOS; greedy decodes may end without EOS when truncated.
struct CaptionTokens {
  std::vector<int> ids;

  // Number of prediction steps when teacher forcing: every id after BOS is a
  // target exactly once.
  int prediction_steps() const { return static_cast<int>(ids.size()) - 1; }
};

}  // namespace bacap

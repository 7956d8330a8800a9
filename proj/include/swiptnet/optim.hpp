#pragma once

#include <cstdint>
#include <vector>

#include "swiptnet/types.hpp"

namespace swiptnet {

/// Adam accumulator state. Moments are kept per real component: the real part
/// of an entry in `m`/`v` tracks the real channel of the parameter entry, the
/// imaginary part the imaginary channel.
struct AdamState {
  uint64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::vector<CMatrix> m;
  std::vector<CMatrix> v;

  void reset(const std::vector<CMatrix>& params);
  bool initialized() const { return !m.empty(); }
};

/// One Adam update with bias correction. Throws on NaN/Inf gradients and on
/// shape mismatches; increments the step counter.
void adam_step(std::vector<CMatrix>& params, const std::vector<CMatrix>& grads,
               AdamState& state, double lr);

/// Xavier/Glorot uniform initialization: real and imaginary parts drawn
/// independently from +-sqrt(6 / (fan_in + fan_out)). Deterministic in seed.
CMatrix xavier_init(Index rows, Index cols, Index fan_in, Index fan_out, uint64_t seed);

}  // namespace swiptnet

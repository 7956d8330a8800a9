#pragma once

#include <vector>

#include "swiptnet/types.hpp"

namespace swiptnet {

/// A transmit design: beamforming matrix W (row n holds w_n) plus the per-UE
/// splitting ratios (rho for PS, alpha for TS).
struct Solution {
  CMatrix w;          // n_ue x n_tx
  RVector ratios;     // n_ue
  Receiver receiver = Receiver::PS;
};

/// Per-constraint feasibility breakdown of a Solution.
struct FeasibilityReport {
  std::vector<bool> rate_ok;    // per UE
  std::vector<bool> eh_ok;      // per UE
  std::vector<bool> ratio_ok;   // per UE, ratio in [0,1]
  bool power_ok = false;
  bool feasible = false;        // conjunction of everything above
  RVector rate_slack;           // rate_n - requirement_n
  RVector eh_slack;             // harvested_n - requirement_n
  double power_slack = 0.0;     // p_max - total power
};

/// Reference result attached to validation/test samples by the oracle solver.
struct OracleLabel {
  double sum_rate = 0.0;
  Solution solution;
  bool converged = false;
  uint32_t restarts_used = 0;
};

}  // namespace swiptnet

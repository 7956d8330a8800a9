#pragma once

#include "swiptnet/solution.hpp"
#include "swiptnet/system.hpp"
#include "swiptnet/types.hpp"

namespace swiptnet {

/// Penalty weights of the multi-objective training losses.
struct LossWeights {
  double lambda0 = 1.0;  // sum-rate weight, must be positive
  double lambda1 = 5.0;  // rate-requirement penalty
  double lambda2 = 5.0;  // harvested-power penalty

  void validate() const {
    if (lambda0 <= 0.0 || lambda1 < 0.0 || lambda2 < 0.0)
      throw std::invalid_argument("LossWeights: lambda0 > 0 and lambda1/2 >= 0 required");
  }
};

// Clamp bounds for the recovered splitting ratios.
constexpr double kRhoEps = 1e-9;     // PS: rho in [kRhoEps, 1]
constexpr double kAlphaEps = 1e-6;   // TS: alpha in [kAlphaEps, 1 - kAlphaEps]
constexpr double kFeasTol = 1e-6;    // relative feasibility tolerance

/// Total power received at a UE with channel row h: sum_i |h^H w_i|^2.
double received_power(const CVector& h, const CMatrix& w);

/// PS achievable rate: log2(1 + rho*S / (rho*I + sigma^2)).
double rate_ps(const CVector& h, const CMatrix& w, Index n, double rho, double sigma_s2);

/// PS harvested power: (1 - rho) * received_power.
double eh_ps(const CVector& h, const CMatrix& w, double rho);

/// TS achievable rate: log2(1 + S / (I + sigma^2)).
double rate_ts(const CVector& h, const CMatrix& w, Index n, double sigma_s2);

/// Power projection: scales all rows by sqrt(p_max / max(p_max, total)).
CMatrix scale_power(const CMatrix& w, double p_max);

/// Splitting ratio that makes the harvested-power constraint bind:
/// 1 - gamma_req / received. `feasible` is false when the value is negative
/// (received power below the requirement); the raw value is still returned.
struct RatioRecovery {
  double value = 0.0;
  bool feasible = false;
};
RatioRecovery recover_ratio(double received_power_w, double gamma_req_w);

/// PS rate with the recovered (clamped) ratio substituted in; the training
/// losses differentiate through this substitution.
double rate_ps_substituted(const CVector& h, const CMatrix& w, Index n, const SystemConfig& cfg);

/// Objective value of a solution: PS sum of rates, TS sum of alpha_n * rate_n.
double solution_sum_rate(const Solution& sol, const CMatrix& h, const SystemConfig& cfg);

/// Builds the full solution (recovered clamped ratios) from a beamformer.
Solution recover_solution(const CMatrix& w, const CMatrix& h, const SystemConfig& cfg,
                          Receiver receiver);

// Reference (non-differentiated) loss values; these must agree with the tape
// builders in loss.hpp to rounding.
double loss_ps_value(const CMatrix& w, const CMatrix& h, const SystemConfig& cfg,
                     const LossWeights& lw);
double loss_ts_value(const CMatrix& w, const CMatrix& h, const SystemConfig& cfg,
                     const LossWeights& lw);
double loss_two_output_value(const CMatrix& w, const RVector& ratios, const CMatrix& h,
                             const SystemConfig& cfg, const LossWeights& lw, Receiver receiver);

FeasibilityReport check_feasibility(const Solution& sol, const CMatrix& h,
                                    const SystemConfig& cfg, double eps_feas = kFeasTol);

}  // namespace swiptnet

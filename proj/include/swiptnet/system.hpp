#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "swiptnet/types.hpp"

namespace swiptnet {

inline double dbm_to_watt(double x_dbm) { return std::pow(10.0, (x_dbm - 30.0) / 10.0); }
inline double watt_to_dbm(double x_w) { return 10.0 * std::log10(x_w) + 30.0; }
inline double db_to_linear(double x_db) { return std::pow(10.0, x_db / 10.0); }

/// Physical constants of the downlink, all in SI units. dBm/dB only appear at
/// configuration boundaries (CLI flags, config files).
struct SystemConfig {
  int n_tx = 16;               // transmit antennas N_T
  int n_ue = 12;               // user equipments N
  double p_max_w = 1.0;        // transmit power budget (30 dBm)
  double r_req = 0.1;          // per-UE rate requirement, bit/s/Hz
  double gamma_req_w = 1e-6;   // per-UE harvested-power requirement (-30 dBm)
  double sigma_s2_w = 1e-6;    // baseband processing noise power (-30 dBm)
  double pl_db = 40.0;         // path-loss attenuation

  void validate() const {
    if (n_tx < 1 || n_ue < 1)
      throw std::invalid_argument("SystemConfig: antenna and UE counts must be >= 1");
    if (p_max_w <= 0.0 || gamma_req_w <= 0.0 || sigma_s2_w <= 0.0)
      throw std::invalid_argument("SystemConfig: powers must be positive");
    if (r_req < 0.0) throw std::invalid_argument("SystemConfig: rate requirement must be >= 0");
  }

  /// Per-entry channel variance implied by the path loss.
  double channel_variance() const { return std::pow(10.0, -pl_db / 10.0); }

  uint64_t fingerprint() const;
};

}  // namespace swiptnet

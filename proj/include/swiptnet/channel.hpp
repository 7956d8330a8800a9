#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "swiptnet/solution.hpp"
#include "swiptnet/system.hpp"
#include "swiptnet/types.hpp"

namespace swiptnet {

/// One CSI realisation: row n is the channel vector h_n of UE n.
using ChannelSample = CMatrix;

/// A set of channel samples with an optional oracle label per sample.
/// Binary file layout (little endian):
///   magic "SWPT", u32 version=1, u32 n_tx, u32 n_ue, u64 count, u8 labels_flag,
///   count samples of n_ue*n_tx complex entries (re f64, im f64) row-major;
///   if labels_flag=1: u8 receiver, then per sample
///     f64 sum_rate, u8 converged, u32 restarts_used,
///     n_ue*n_tx complex beamforming entries, n_ue f64 ratios.
struct Dataset {
  int n_tx = 0;
  int n_ue = 0;
  std::vector<ChannelSample> samples;
  std::vector<OracleLabel> labels;  // empty or aligned 1:1 with samples
  Receiver label_receiver = Receiver::PS;

  bool labeled() const { return !labels.empty(); }
  size_t size() const { return samples.size(); }
  void validate() const;
};

/// I.i.d. circularly-symmetric complex Gaussian entries with per-entry
/// variance 10^(-PL/10); a pure function of (cfg, seed, index).
ChannelSample generate_sample(const SystemConfig& cfg, uint64_t seed, uint64_t index);

/// Generates `count` samples keyed by (seed, 0..count-1).
Dataset generate_dataset(const SystemConfig& cfg, uint64_t seed, size_t count);

void write_dataset(const std::string& path, const Dataset& ds);
Dataset read_dataset(const std::string& path);

/// First floor(ratio*count) samples become the test split, the rest the
/// validation split.
std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, double ratio);

/// FNV-1a hash of a dataset file's bytes (for run manifests).
uint64_t file_fingerprint(const std::string& path);

}  // namespace swiptnet

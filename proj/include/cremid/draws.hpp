#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cremid/linalg.hpp"
#include "cremid/model.hpp"

namespace cremid {

struct MoveCounter {
  long proposed = 0;
  long accepted = 0;
  double rate() const { return proposed == 0 ? 0.0 : static_cast<double>(accepted) / proposed; }
  bool operator==(const MoveCounter&) const = default;
};

struct AcceptanceCounters {
  MoveCounter swap;
  MoveCounter alpha;
  MoveCounter epsilon;
  bool operator==(const AcceptanceCounters&) const = default;
};

/// Scalar summary of one retained draw.
struct ScalarDraw {
  long sweep = 0;
  double rho = 0.0;
  double epsilon = 0.0;
  double alpha = 0.0;
  double varphi = 0.0;
  double k0 = 0.0;
  double log_density = 0.0;
  AcceptanceCounters counters;
  bool operator==(const ScalarDraw&) const = default;
};

/// Cluster-level parameters of one retained draw.
struct ClusterDraw {
  std::vector<std::uint8_t> perturbed;
  Matrix pi;                              // J x K
  std::vector<Vector> mu0;                // K
  std::vector<SpdMatrix> sigma;           // K
  std::vector<std::vector<Vector>> mu;    // [j][k], empty unless saved
  std::vector<std::vector<int>> z;        // empty unless saved

  bool has_group_means() const { return !mu.empty(); }
};

/// Running sum over retained draws of Delta_{j, Z_ij} = mu_{j,Z} - mu0_Z for
/// every observation.
struct CalibrationAccumulator {
  long draws = 0;
  std::vector<Matrix> delta_sum;  // n_j x p per sample

  void add(const ModelState& state);
  std::vector<Matrix> mean_delta() const;
};

struct RunInfo {
  int format_version = 1;
  std::uint64_t seed = 0;
  std::uint64_t stream_id = 0;
  std::string data_hash;
  bool paper_literal = false;
  int J = 0;
  int p = 0;
  int K0 = 0;
  int K1 = 0;
  std::vector<std::string> labels;
  std::vector<int> sample_sizes;
  /// Fully resolved configuration as ordered key/value pairs.
  std::vector<std::pair<std::string, std::string>> config;
};

struct ChainDraws {
  RunInfo info;
  std::vector<ScalarDraw> scalars;
  std::vector<ClusterDraw> clusters;
  std::optional<CalibrationAccumulator> calibration;

  std::size_t size() const { return scalars.size(); }
  bool empty() const { return scalars.empty(); }
};

/// FNV-1a over labels, sample sizes and the raw bits of every value.
std::string dataset_hash(const MultiSampleDataset& data);

/// Concatenates the draws of several chains fit to the same data. The
/// calibration sums are added, so the mean is over all pooled draws.
ChainDraws merge_chains(const std::vector<ChainDraws>& chains);

}  // namespace cremid

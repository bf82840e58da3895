#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cremid/linalg.hpp"
#include "cremid/model.hpp"

namespace cremid {

enum class ScenarioKind { local_shift, global_shift, local_weight, global_weight, calibration_demo };

ScenarioKind parse_scenario_kind(const std::string& name);
std::string to_string(ScenarioKind kind);

/// Fully resolved synthetic mixture: sample j draws from
/// sum_c weights[j][c] N(means[j][c], covariances[c]).
struct ScenarioSpec {
  ScenarioKind kind = ScenarioKind::local_shift;
  std::uint64_t seed = 0;
  int J = 3;
  int p = 4;
  int n_per_sample = 100;
  std::vector<Vector> base_means;                 // per component, before shifts
  std::vector<Vector> shifts;                     // per sample (zero if unused)
  std::vector<std::vector<double>> weights;       // [j][c]
  std::vector<std::vector<Vector>> means;         // [j][c]
  std::vector<SpdMatrix> covariances;             // [c]

  int num_components() const { return static_cast<int>(covariances.size()); }

  /// Exact Gaussian-mixture marginal density of sample j along dimension d.
  double analytic_marginal(int j, int d, double x) const;
};

/// Pure function of (kind, seed).
ScenarioSpec make_scenario(ScenarioKind kind, std::uint64_t seed);

struct GeneratedData {
  MultiSampleDataset data;
  /// True component of every observation, hidden from the sampler.
  std::vector<std::vector<int>> components;
};

/// Draws n observations per sample; randomness comes from a stream derived
/// from the spec's seed, so the result is a pure function of (spec, n).
GeneratedData generate(const ScenarioSpec& spec, int n_per_sample);
GeneratedData generate(const ScenarioSpec& spec);

}  // namespace cremid

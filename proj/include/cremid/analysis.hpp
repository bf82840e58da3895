#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "cremid/draws.hpp"
#include "cremid/model.hpp"
#include "cremid/sampler.hpp"
#include "cremid/scenario.hpp"

namespace cremid {

enum class StatisticKind { rho_phi, rho };

StatisticKind parse_statistic_kind(const std::string& name);
std::string to_string(StatisticKind kind);

/// Posterior mean of rho * varphi (or of rho) over the retained draws.
double test_statistic(const ChainDraws& draws, StatisticKind kind);

/// y_ij minus the posterior-averaged displacement of its cluster.
MultiSampleDataset calibrate(const ChainDraws& draws, const MultiSampleDataset& data);

struct GridConfig {
  int points = 512;
  double pad_sd = 3.0;
};

/// Posterior predictive marginal density of each sample along each
/// dimension, averaged over draws, on a shared grid per dimension.
struct PredictiveDensity {
  std::vector<Vector> grid;                  // [d]
  std::vector<std::vector<Vector>> density;  // [j][d]

  int num_samples() const { return static_cast<int>(density.size()); }
  int dim() const { return static_cast<int>(grid.size()); }
};

/// Grid for dimension d spans [min - pad*sd, max + pad*sd] of the pooled data.
std::vector<Vector> make_grids(const MultiSampleDataset& data, const GridConfig& cfg);

PredictiveDensity predictive_marginals(const ChainDraws& draws, const MultiSampleDataset& data,
                                       const GridConfig& cfg = {});
PredictiveDensity predictive_marginals(const ChainDraws& draws, const std::vector<Vector>& grids);

double trapezoid(const Vector& x, const Vector& y);

/// Sum over samples and dimensions of the trapezoid integral of |est - truth|.
double l1_distance(const PredictiveDensity& est, const ScenarioSpec& truth);
/// Same metric between two grid densities defined on identical grids.
double l1_distance(const PredictiveDensity& a, const PredictiveDensity& b);

/// Sum over test points of log (1/B) sum_b f_j^{(b)}(y). Test samples are
/// matched to training samples by label (or by position when the test data
/// are unlabelled).
double log_predictive_score(const ChainDraws& draws, const MultiSampleDataset& test);

struct RocPoint {
  double threshold = 0.0;
  double false_positive_rate = 0.0;
  double true_positive_rate = 0.0;
};

struct RocCurve {
  std::vector<RocPoint> points;
  double auc = 0.0;
};

/// ROC for "positives score higher": thresholds sweep every distinct score.
RocCurve roc_curve(std::span<const double> positive_scores, std::span<const double> negative_scores);

/// Pools all observations and reassigns them to samples uniformly at random,
/// preserving every n_j.
MultiSampleDataset permute_sample_labels(const MultiSampleDataset& data, RngStream& rng);

struct RocHarnessOptions {
  ScenarioKind kind = ScenarioKind::local_weight;
  int n_reps = 20;
  int n_per_sample = 100;
  int K0 = 10;
  int K1 = 10;
  std::uint64_t seed = 1;
  SamplerConfig sampler;
  StatisticKind statistic = StatisticKind::rho;
  /// Replaces the posterior statistic when set (e.g. for calibration of the
  /// harness itself).
  std::function<double(const ChainDraws&)> custom_statistic;
};

struct RocHarnessResult {
  std::vector<double> null_statistics;
  std::vector<double> alternative_statistics;
  /// Nulls as positives, larger statistic means "identical".
  RocCurve identity;
  /// Alternatives as positives, smaller statistic means "different".
  RocCurve difference;
  bool paper_literal = false;
  /// Sweeps that failed validation, summed over all fits (only counted when
  /// the sampler validates every sweep).
  long validation_failures = 0;
};

RocHarnessResult roc_harness(const RocHarnessOptions& options);

}  // namespace cremid

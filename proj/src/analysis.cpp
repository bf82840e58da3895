#include "cremid/analysis.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <map>
#include <mutex>
#include <numeric>
#include <thread>

#include "cremid/distributions.hpp"
#include "cremid/errors.hpp"

namespace cremid {

StatisticKind parse_statistic_kind(const std::string& name) {
  if (name == "rho") return StatisticKind::rho;
  if (name == "rho-phi" || name == "rho_phi") return StatisticKind::rho_phi;
  throw ValidationError("unknown statistic kind '" + name + "'");
}

std::string to_string(StatisticKind kind) { return kind == StatisticKind::rho ? "rho" : "rho-phi"; }

double test_statistic(const ChainDraws& draws, StatisticKind kind) {
  if (draws.empty()) throw ValidationError("test statistic needs at least one retained draw");
  double sum = 0.0;
  for (const ScalarDraw& s : draws.scalars) sum += kind == StatisticKind::rho ? s.rho : s.rho * s.varphi;
  return sum / static_cast<double>(draws.size());
}

MultiSampleDataset calibrate(const ChainDraws& draws, const MultiSampleDataset& data) {
  if (!draws.calibration || draws.calibration->draws == 0) {
    throw ValidationError("run has no calibration accumulator");
  }
  const std::vector<Matrix> delta = draws.calibration->mean_delta();
  if (static_cast<int>(delta.size()) != data.num_samples()) {
    throw ValidationError("calibration accumulator does not match the data");
  }
  MultiSampleDataset out = data;
  for (int j = 0; j < data.num_samples(); ++j) {
    if (delta[j].rows() != data.samples[j].rows() || delta[j].cols() != data.samples[j].cols()) {
      throw ValidationError("calibration accumulator does not match the data");
    }
    out.samples[j] = data.samples[j] - delta[j];
  }
  return out;
}

std::vector<Vector> make_grids(const MultiSampleDataset& data, const GridConfig& cfg) {
  if (cfg.points < 2) throw ValidationError("grid needs at least two points");
  const Matrix cov = pooled_covariance(data);
  std::vector<Vector> grids;
  for (int d = 0; d < data.dim; ++d) {
    double lo = INFINITY, hi = -INFINITY;
    for (const Matrix& s : data.samples) {
      if (s.rows() == 0) continue;
      lo = std::min(lo, s.col(d).minCoeff());
      hi = std::max(hi, s.col(d).maxCoeff());
    }
    const double sd = std::sqrt(std::max(cov(d, d), 0.0));
    const double pad = cfg.pad_sd * (sd > 0.0 ? sd : 1.0);
    grids.push_back(Vector::LinSpaced(cfg.points, lo - pad, hi + pad));
  }
  return grids;
}

PredictiveDensity predictive_marginals(const ChainDraws& draws, const std::vector<Vector>& grids) {
  if (draws.empty()) throw ValidationError("predictive density needs at least one draw");
  const int J = draws.info.J;
  const int p = static_cast<int>(grids.size());
  PredictiveDensity out;
  out.grid = grids;
  out.density.assign(J, {});
  for (int j = 0; j < J; ++j)
    for (int d = 0; d < p; ++d) out.density[j].push_back(Vector::Zero(grids[d].size()));

  for (const ClusterDraw& c : draws.clusters) {
    const int K = static_cast<int>(c.mu0.size());
    for (int k = 0; k < K; ++k) {
      if (c.perturbed[k] && !c.has_group_means()) {
        throw ValidationError("draws lack group means required for the predictive density");
      }
    }
    for (int j = 0; j < J; ++j) {
      for (int k = 0; k < K; ++k) {
        const double w = c.pi(j, k);
        if (w == 0.0) continue;
        const Vector& mean = c.has_group_means() ? c.mu[j][k] : c.mu0[k];
        for (int d = 0; d < p; ++d) {
          const double sd = std::sqrt(c.sigma[k](d, d));
          const Vector& g = grids[d];
          Vector& dens = out.density[j][d];
          for (Eigen::Index t = 0; t < g.size(); ++t) {
            dens(t) += w * std::exp(dist::logpdf_normal(g(t), mean(d), sd));
          }
        }
      }
    }
  }
  const double b = static_cast<double>(draws.clusters.size());
  for (auto& per_sample : out.density)
    for (Vector& v : per_sample) v /= b;
  return out;
}

PredictiveDensity predictive_marginals(const ChainDraws& draws, const MultiSampleDataset& data,
                                       const GridConfig& cfg) {
  return predictive_marginals(draws, make_grids(data, cfg));
}

double trapezoid(const Vector& x, const Vector& y) {
  double out = 0.0;
  for (Eigen::Index i = 1; i < x.size(); ++i) out += 0.5 * (x(i) - x(i - 1)) * (y(i) + y(i - 1));
  return out;
}

double l1_distance(const PredictiveDensity& est, const ScenarioSpec& truth) {
  if (est.num_samples() != truth.J || est.dim() != truth.p) {
    throw ValidationError("predictive grid does not match the scenario shape");
  }
  double out = 0.0;
  for (int j = 0; j < truth.J; ++j) {
    for (int d = 0; d < truth.p; ++d) {
      const Vector& g = est.grid[d];
      Vector diff(g.size());
      for (Eigen::Index t = 0; t < g.size(); ++t) {
        diff(t) = std::abs(est.density[j][d](t) - truth.analytic_marginal(j, d, g(t)));
      }
      out += trapezoid(g, diff);
    }
  }
  return out;
}

double l1_distance(const PredictiveDensity& a, const PredictiveDensity& b) {
  if (a.num_samples() != b.num_samples() || a.dim() != b.dim()) {
    throw ValidationError("predictive grids have different shapes");
  }
  double out = 0.0;
  for (int d = 0; d < a.dim(); ++d) {
    if (a.grid[d].size() != b.grid[d].size() || a.grid[d] != b.grid[d]) {
      throw ValidationError("predictive grids differ");
    }
    for (int j = 0; j < a.num_samples(); ++j) {
      out += trapezoid(a.grid[d], (a.density[j][d] - b.density[j][d]).cwiseAbs());
    }
  }
  return out;
}

double log_predictive_score(const ChainDraws& draws, const MultiSampleDataset& test) {
  if (draws.empty()) throw ValidationError("predictive score needs at least one draw");
  if (test.dim != draws.info.p) throw ValidationError("test data dimension differs from the fit");
  std::vector<int> map;
  for (int t = 0; t < test.num_samples(); ++t) {
    if (test.labels.empty()) {
      if (t >= draws.info.J) throw ValidationError("test sample index has no training sample");
      map.push_back(t);
      continue;
    }
    const auto it = std::find(draws.info.labels.begin(), draws.info.labels.end(), test.labels[t]);
    if (it == draws.info.labels.end()) {
      throw ValidationError("test sample label '" + test.labels[t] + "' not present in the fit");
    }
    map.push_back(static_cast<int>(it - draws.info.labels.begin()));
  }

  const double log_b = std::log(static_cast<double>(draws.size()));
  double score = 0.0;
  std::vector<double> per_draw(draws.size());
  std::vector<double> per_cluster;
  for (int t = 0; t < test.num_samples(); ++t) {
    const int j = map[t];
    for (int i = 0; i < test.size(t); ++i) {
      const Vector y = test.observation(t, i);
      for (std::size_t b = 0; b < draws.clusters.size(); ++b) {
        const ClusterDraw& c = draws.clusters[b];
        const int K = static_cast<int>(c.mu0.size());
        per_cluster.assign(K, -INFINITY);
        for (int k = 0; k < K; ++k) {
          const double w = c.pi(j, k);
          if (w <= 0.0) continue;
          if (c.perturbed[k] && !c.has_group_means()) {
            throw ValidationError("draws lack group means required for the predictive score");
          }
          const Vector& mean = c.has_group_means() ? c.mu[j][k] : c.mu0[k];
          per_cluster[k] = std::log(w) + dist::logpdf_mvn(y, mean, c.sigma[k]);
        }
        per_draw[b] = dist::log_sum_exp(per_cluster);
      }
      score += dist::log_sum_exp(per_draw) - log_b;
    }
  }
  return score;
}

RocCurve roc_curve(std::span<const double> positive_scores, std::span<const double> negative_scores) {
  if (positive_scores.empty() || negative_scores.empty()) {
    throw ValidationError("ROC needs at least one positive and one negative");
  }
  std::vector<double> thresholds(positive_scores.begin(), positive_scores.end());
  thresholds.insert(thresholds.end(), negative_scores.begin(), negative_scores.end());
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

  const double np = static_cast<double>(positive_scores.size());
  const double nn = static_cast<double>(negative_scores.size());
  RocCurve out;
  out.points.push_back({INFINITY, 0.0, 0.0});
  for (double t : thresholds) {
    const auto tp = std::count_if(positive_scores.begin(), positive_scores.end(), [t](double s) { return s >= t; });
    const auto fp = std::count_if(negative_scores.begin(), negative_scores.end(), [t](double s) { return s >= t; });
    out.points.push_back({t, fp / nn, tp / np});
  }
  for (std::size_t i = 1; i < out.points.size(); ++i) {
    const RocPoint& a = out.points[i - 1];
    const RocPoint& b = out.points[i];
    out.auc += 0.5 * (b.false_positive_rate - a.false_positive_rate) *
               (b.true_positive_rate + a.true_positive_rate);
  }
  return out;
}

MultiSampleDataset permute_sample_labels(const MultiSampleDataset& data, RngStream& rng) {
  std::vector<Vector> pool;
  for (int j = 0; j < data.num_samples(); ++j)
    for (int i = 0; i < data.size(j); ++i) pool.push_back(data.observation(j, i));
  // Fisher-Yates.
  for (std::size_t i = pool.size(); i > 1; --i) {
    const std::size_t r = std::min(i - 1, static_cast<std::size_t>(rng.uniform() * static_cast<double>(i)));
    std::swap(pool[i - 1], pool[r]);
  }
  MultiSampleDataset out = data;
  std::size_t next = 0;
  for (int j = 0; j < data.num_samples(); ++j)
    for (int i = 0; i < data.size(j); ++i) out.samples[j].row(i) = pool[next++].transpose();
  return out;
}

RocHarnessResult roc_harness(const RocHarnessOptions& options) {
  if (options.n_reps < 2) throw ValidationError("ROC harness needs at least two replicates");
  const int reps = options.n_reps;
  RocHarnessResult result;
  result.paper_literal = options.sampler.paper_literal;
  result.null_statistics.assign(reps, 0.0);
  result.alternative_statistics.assign(reps, 0.0);

  std::atomic<long> failures{0};
  auto fit = [&](int task) {
    const int rep = task / 2;
    const bool is_null = task % 2 == 1;
    const ScenarioSpec spec = make_scenario(options.kind, options.seed + static_cast<std::uint64_t>(rep));
    MultiSampleDataset data = generate(spec, options.n_per_sample).data;
    if (is_null) {
      RngStream perm(options.seed, 0xA110C000ULL + static_cast<std::uint64_t>(rep));
      data = permute_sample_labels(data, perm);
    }
    SamplerConfig cfg = options.sampler;
    cfg.seed = options.sampler.seed + static_cast<std::uint64_t>(rep);
    cfg.stream_id = static_cast<std::uint64_t>(task);
    const HyperParams hp = default_hyperparams(data, options.K0, options.K1);
    const ChainResult fitted = run_chain(data, hp, cfg);
    const ChainDraws& draws = fitted.draws;
    failures += fitted.diagnostics.validation_failures;
    const double stat = options.custom_statistic ? options.custom_statistic(draws)
                                                 : test_statistic(draws, options.statistic);
    (is_null ? result.null_statistics : result.alternative_statistics)[rep] = stat;
  };

  // Replicates are independent chains; each task writes only its own slot.
  const int tasks = 2 * reps;
  const unsigned workers = options.custom_statistic ? 1u : std::max(1u, std::thread::hardware_concurrency());
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (int t = next++; t < tasks; t = next++) {
      try {
        fit(t);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);

  result.validation_failures = failures;
  result.identity = roc_curve(result.null_statistics, result.alternative_statistics);
  std::vector<double> neg_alt, neg_null;
  for (double s : result.alternative_statistics) neg_alt.push_back(-s);
  for (double s : result.null_statistics) neg_null.push_back(-s);
  result.difference = roc_curve(neg_alt, neg_null);
  return result;
}

}  // namespace cremid

#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "cremid/model.hpp"

namespace testing {

using namespace cremid;

inline MultiSampleDataset scalar_data(const std::vector<std::vector<double>>& values) {
  MultiSampleDataset data;
  data.dim = 1;
  for (std::size_t j = 0; j < values.size(); ++j) {
    Matrix m(static_cast<Eigen::Index>(values[j].size()), 1);
    for (std::size_t i = 0; i < values[j].size(); ++i) m(static_cast<Eigen::Index>(i), 0) = values[j][i];
    data.samples.push_back(m);
    data.labels.push_back("s" + std::to_string(j + 1));
  }
  return data;
}

inline SpdMatrix scalar(double v) { return SpdMatrix(Matrix::Constant(1, 1, v)); }

/// Simple proper priors for dimension p.
inline HyperParams simple_hp(int K0, int K1, int p = 1) {
  HyperParams hp;
  hp.K0 = K0;
  hp.K1 = K1;
  hp.a_rho = 2.0;
  hp.b_rho = 2.0;
  hp.tau_alpha1 = 2.0;
  hp.tau_alpha2 = 1.0;
  hp.nu1 = p + 2.0;
  hp.Psi2 = SpdMatrix::identity(p);
  hp.nu2 = p + 2.0;
  hp.m2 = Vector::Zero(p);
  hp.S2 = SpdMatrix::identity(p);
  hp.tau1 = 2.0;
  hp.tau2 = 2.0;
  hp.a_eps = 0.0;
  hp.b_eps = 1.0;
  hp.a_phi = 1.0;
  hp.b_phi = 1.0;
  return hp;
}

/// A valid state with uniform weights, zero means, identity covariances and
/// every cluster on the spike branch.
inline ModelState hand_state(const MultiSampleDataset& data, const HyperParams& hp,
                             std::vector<std::vector<int>> labels) {
  const int J = data.num_samples();
  const int p = data.dim;
  const int K = hp.K();
  ModelState s;
  s.weights.rho = 0.5;
  s.weights.log_w0 = Vector::Constant(hp.K0, -std::log(static_cast<double>(hp.K0)));
  s.weights.log_w.assign(J, Vector::Constant(hp.K1, -std::log(static_cast<double>(hp.K1))));
  s.kernels.mu0.assign(K, Vector::Zero(p));
  s.kernels.mu.assign(J, std::vector<Vector>(K, Vector::Zero(p)));
  s.kernels.sigma.assign(K, SpdMatrix::identity(p));
  s.kernels.perturbed.assign(K, 0);
  s.globals.alpha = 1.0;
  s.globals.k0 = 1.0;
  s.globals.m1 = Vector::Zero(p);
  s.globals.psi1 = SpdMatrix::identity(p);
  s.globals.epsilon = 0.5;
  s.globals.varphi = 0.5;
  s.assign = AssignmentState(data, std::move(labels), K);
  return s;
}

inline std::vector<std::vector<int>> all_in(const MultiSampleDataset& data, int k) {
  std::vector<std::vector<int>> z;
  for (int j = 0; j < data.num_samples(); ++j) z.emplace_back(data.size(j), k);
  return z;
}

inline double mean_of(const std::vector<double>& x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

inline double var_of(const std::vector<double>& x) {
  const double m = mean_of(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size() - 1);
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// Asymptotic p-value of the two-sample Kolmogorov-Smirnov statistic.
inline double ks_two_sample_pvalue(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, k = 0;
  double d = 0.0;
  while (i < a.size() && k < b.size()) {
    const double x = std::min(a[i], b[k]);
    while (i < a.size() && a[i] <= x) ++i;
    while (k < b.size() && b[k] <= x) ++k;
    d = std::max(d, std::abs(static_cast<double>(i) / a.size() - static_cast<double>(k) / b.size()));
  }
  const double ne = static_cast<double>(a.size()) * b.size() / (a.size() + b.size());
  const double lambda = (std::sqrt(ne) + 0.12 + 0.11 / std::sqrt(ne)) * d;
  double p = 0.0;
  for (int t = 1; t <= 100; ++t) p += 2.0 * ((t % 2) ? 1.0 : -1.0) * std::exp(-2.0 * t * t * lambda * lambda);
  return std::clamp(p, 0.0, 1.0);
}

}  // namespace testing

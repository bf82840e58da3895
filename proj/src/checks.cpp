#include "cremid/checks.hpp"

#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>

#include "cremid/model.hpp"
#include "cremid/sampler.hpp"

namespace cremid {
namespace {

// The oracles below work from raw observations and std::random draws so that
// they share no code path with the sampler they check.

struct Moments {
  double mean = 0.0;
  double var = 0.0;
};

Moments moments(const std::vector<double>& x) {
  Moments m;
  for (double v : x) m.mean += v;
  m.mean /= static_cast<double>(x.size());
  for (double v : x) m.var += (v - m.mean) * (v - m.mean);
  m.var /= static_cast<double>(x.size() - 1);
  return m;
}

/// Mean and variance of an unnormalized log density on a uniform grid,
/// with the variable given by `value(u)` at grid point u.
Moments grid_moments(const std::function<double(double)>& log_density, double lo, double hi, int points,
                     const std::function<double(double)>& value = [](double u) { return u; }) {
  std::vector<double> u(points), lf(points);
  double top = -INFINITY;
  for (int i = 0; i < points; ++i) {
    u[i] = lo + (hi - lo) * i / (points - 1);
    lf[i] = log_density(u[i]);
    top = std::max(top, lf[i]);
  }
  double z = 0.0, s1 = 0.0, s2 = 0.0;
  for (int i = 0; i < points; ++i) {
    const double w = std::exp(lf[i] - top) * ((i == 0 || i == points - 1) ? 0.5 : 1.0);
    const double v = value(u[i]);
    z += w;
    s1 += w * v;
    s2 += w * v * v;
  }
  Moments m;
  m.mean = s1 / z;
  m.var = s2 / z - m.mean * m.mean;
  return m;
}

double log_normal(double x, double mean, double var) {
  return -0.5 * (std::log(2.0 * std::numbers::pi * var) + (x - mean) * (x - mean) / var);
}

double log_gamma_density(double x, double shape, double rate) {
  return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(x) - rate * x;
}

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(6);
  os << x;
  return os.str();
}

/// Compares a Monte Carlo mean to a target with a z-band.
CheckResult mean_check(const std::string& name, double estimate, double target, double se, double z) {
  CheckResult r;
  r.name = name;
  const double dev = se > 0.0 ? std::abs(estimate - target) / se : (estimate == target ? 0.0 : INFINITY);
  r.passed = dev <= z;
  r.detail = "estimate " + fmt(estimate) + ", oracle " + fmt(target) + ", |z| = " + fmt(dev);
  return r;
}

/// Sample mean and sample variance both checked against oracle moments. The
/// variance band uses the normal-theory standard error.
std::vector<CheckResult> moment_checks(const std::string& name, const std::vector<double>& draws,
                                       const Moments& oracle) {
  const Moments m = moments(draws);
  const double n = static_cast<double>(draws.size());
  return {mean_check(name + " mean", m.mean, oracle.mean, std::sqrt(oracle.var / n), 3.0),
          mean_check(name + " variance", m.var, oracle.var, oracle.var * std::sqrt(2.0 / (n - 1.0)), 3.0)};
}

MultiSampleDataset scalar_dataset(const std::vector<std::vector<double>>& values) {
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

SpdMatrix scalar(double v) { return SpdMatrix(Matrix::Constant(1, 1, v)); }

HyperParams scalar_hyperparams(int K0, int K1) {
  HyperParams hp;
  hp.K0 = K0;
  hp.K1 = K1;
  hp.a_rho = 2.0;
  hp.b_rho = 3.0;
  hp.tau_alpha1 = 2.0;
  hp.tau_alpha2 = 2.0;
  hp.nu1 = 3.0;
  hp.Psi2 = scalar(2.0);
  hp.nu2 = 4.0;
  hp.m2 = Vector::Constant(1, 0.5);
  hp.S2 = scalar(4.0);
  hp.tau1 = 3.0;
  hp.tau2 = 2.0;
  hp.a_eps = 0.05;
  hp.b_eps = 2.0;
  hp.a_phi = 2.0;
  hp.b_phi = 1.5;
  return hp;
}

/// Hand-set state for the conjugate checks: K0 = K1 = 2, two samples.
struct Frozen {
  MultiSampleDataset data;
  std::vector<std::vector<int>> z;
  HyperParams hp;
  ModelState state;
};

Frozen frozen_state() {
  Frozen f;
  f.data = scalar_dataset({{0.3, -0.5, 1.2, 0.8, 2.1, 4.0, 3.6, -2.0}, {1.5, 0.9, 2.4, 1.1, 4.4, -1.7, 5.1}});
  f.z = {{0, 0, 0, 0, 2, 1, 1, 3}, {0, 0, 0, 1, 1, 3, 2}};
  f.hp = scalar_hyperparams(2, 2);
  RngStream rng(1, 0);
  ModelState& s = f.state;
  s = init_state(f.data, f.hp, rng, InitStrategy::prior);
  s.globals.alpha = 1.3;
  s.globals.k0 = 0.7;
  s.globals.m1 = Vector::Constant(1, 0.9);
  s.globals.psi1 = scalar(0.6);
  s.globals.epsilon = 0.4;
  s.globals.varphi = 0.35;
  s.weights.rho = 0.45;
  const double mu0[] = {1.0, 3.5, 2.0, -1.5};
  const double var[] = {0.9, 1.4, 0.5, 2.2};
  const std::uint8_t pert[] = {0, 1, 0, 1};
  for (int k = 0; k < 4; ++k) {
    s.kernels.mu0[k] = Vector::Constant(1, mu0[k]);
    s.kernels.sigma[k] = scalar(var[k]);
    s.kernels.perturbed[k] = pert[k];
    for (int j = 0; j < 2; ++j) {
      s.kernels.mu[j][k] = pert[k] ? Vector::Constant(1, mu0[k] + 0.3 * (j + 1)) : s.kernels.mu0[k];
    }
  }
  s.assign = AssignmentState(f.data, f.z, 4);
  return f;
}

template <class Update>
std::vector<double> redraw(const ModelState& frozen, int n, Update update,
                           const std::function<double(const ModelState&)>& read) {
  std::vector<double> out;
  out.reserve(n);
  for (int r = 0; r < n; ++r) {
    ModelState s = frozen;
    update(s);
    out.push_back(read(s));
  }
  return out;
}

// Observations of cluster k in sample j (all samples when j < 0).
std::vector<double> members(const Frozen& f, int k, int j = -1) {
  std::vector<double> out;
  for (int jj = 0; jj < f.data.num_samples(); ++jj) {
    if (j >= 0 && jj != j) continue;
    for (int i = 0; i < f.data.size(jj); ++i)
      if (f.z[jj][i] == k) out.push_back(f.data.samples[jj](i, 0));
  }
  return out;
}

}  // namespace

std::vector<CheckResult> conjugate_oracle_checks(std::uint64_t seed, int redraws) {
  const Frozen f = frozen_state();
  const ModelState& s0 = f.state;
  const HyperParams& hp = f.hp;
  const GlobalParamState& g = s0.globals;
  std::vector<CheckResult> out;
  auto append = [&out](std::vector<CheckResult> more) { out.insert(out.end(), more.begin(), more.end()); };
  RngStream rng(seed, 0xC0);

  // Weights: Dirichlet posterior means, pooled counts for the shared block.
  {
    std::vector<double> n0(2, 0.0), n1(2, 0.0);
    for (int j = 0; j < 2; ++j)
      for (int k : f.z[j]) {
        if (k < 2) n0[k] += 1.0;
        else if (j == 1) n1[k - 2] += 1.0;
      }
    const double a = g.alpha / 2.0;
    const auto draws = redraw(s0, redraws, [&](ModelState& s) { update_weights(s, hp, rng); },
                              [](const ModelState& s) { return std::exp(s.weights.log_w0(0)); });
    const double A0 = n0[0] + n0[1] + 2 * a;
    const double m0 = (n0[0] + a) / A0;
    out.push_back(mean_check("weights: shared w0[0] mean", moments(draws).mean, m0,
                             std::sqrt(m0 * (1 - m0) / (A0 + 1) / redraws), 3.0));
    const auto draws1 = redraw(s0, redraws, [&](ModelState& s) { update_weights(s, hp, rng); },
                               [](const ModelState& s) { return std::exp(s.weights.log_w[1](1)); });
    const double A1 = n1[0] + n1[1] + 2 * a;
    const double m1 = (n1[1] + a) / A1;
    out.push_back(mean_check("weights: sample-2 w[1] mean", moments(draws1).mean, m1,
                             std::sqrt(m1 * (1 - m1) / (A1 + 1) / redraws), 3.0));
  }

  // Precision of spike cluster 0: Gamma posterior including the grand-mean
  // prior N(m1, sigma^2 / k0).
  {
    const auto ys = members(f, 0);
    const double mu0 = s0.kernels.mu0[0](0);
    double ss = 0.0;
    for (double y : ys) ss += (y - mu0) * (y - mu0);
    const double shape = 0.5 * (hp.nu1 + ys.size() + 1.0);
    const double rate = 0.5 * (1.0 / g.psi1(0, 0) + ss + g.k0 * (mu0 - g.m1(0)) * (mu0 - g.m1(0)));
    const auto draws = redraw(
        s0, redraws, [&](ModelState& s) { update_precisions(s, hp, rng, ConditionalForm::corrected); },
        [](const ModelState& s) { return 1.0 / s.kernels.sigma[0](0, 0); });
    append(moment_checks("precision (spike, p=1)", draws, {shape / rate, shape / (rate * rate)}));
  }

  // Grand mean of slab cluster 1 (members in both samples): grid posterior.
  {
    const double var = s0.kernels.sigma[1](0, 0);
    const double eps = g.epsilon;
    const auto y1 = members(f, 1, 0), y2 = members(f, 1, 1);
    auto mean_of = [](const std::vector<double>& v) {
      double s = 0;
      for (double x : v) s += x;
      return s / v.size();
    };
    const double b1 = mean_of(y1), b2 = mean_of(y2);
    auto logf = [&](double mu) {
      return log_normal(mu, g.m1(0), var / g.k0) + log_normal(b1, mu, (eps + 1.0 / y1.size()) * var) +
             log_normal(b2, mu, (eps + 1.0 / y2.size()) * var);
    };
    const Moments oracle = grid_moments(logf, -20.0, 25.0, 200001);
    const auto draws = redraw(s0, redraws, [&](ModelState& s) { update_grand_means(s, rng); },
                              [](const ModelState& s) { return s.kernels.mu0[1](0); });
    append(moment_checks("grand mean (slab, p=1)", draws, oracle));
  }

  // Group mean of slab cluster 3 in sample 2: grid posterior.
  {
    const double var = s0.kernels.sigma[3](0, 0);
    const double mu0 = s0.kernels.mu0[3](0);
    const auto ys = members(f, 3, 1);
    auto logf = [&](double mu) {
      double out = log_normal(mu, mu0, g.epsilon * var);
      for (double y : ys) out += log_normal(y, mu, var);
      return out;
    };
    const Moments oracle = grid_moments(logf, -25.0, 25.0, 200001);
    const auto draws = redraw(s0, redraws, [&](ModelState& s) { update_group_means(s, rng); },
                              [](const ModelState& s) { return s.kernels.mu[1][3](0); });
    append(moment_checks("group mean (slab, p=1)", draws, oracle));
  }

  // k0 on a log grid.
  {
    auto logf = [&](double u) {
      const double k0 = std::exp(u);
      double out = log_gamma_density(k0, 0.5 * hp.tau1, 0.5 * hp.tau2) + u;
      for (int k = 0; k < 4; ++k) {
        out += log_normal(s0.kernels.mu0[k](0), g.m1(0), s0.kernels.sigma[k](0, 0) / k0);
      }
      return out;
    };
    const Moments oracle = grid_moments(logf, std::log(1e-8), std::log(1e3), 200001,
                                        [](double u) { return std::exp(u); });
    const auto draws = redraw(s0, redraws, [&](ModelState& s) { update_k0(s, hp, rng); },
                              [](const ModelState& s) { return s.globals.k0; });
    append(moment_checks("k0", draws, oracle));
  }

  // Psi1^{-1} on a log grid: Gamma(nu2/2, Psi2/2) prior, each precision a
  // Gamma(nu1/2, x/2) draw.
  {
    auto logf = [&](double u) {
      const double x = std::exp(u);
      double out = log_gamma_density(x, 0.5 * hp.nu2, 0.5 * hp.Psi2(0, 0)) + u;
      for (int k = 0; k < 4; ++k) out += log_gamma_density(1.0 / s0.kernels.sigma[k](0, 0), 0.5 * hp.nu1, 0.5 * x);
      return out;
    };
    const Moments oracle = grid_moments(logf, std::log(1e-8), std::log(1e3), 200001,
                                        [](double u) { return std::exp(u); });
    const auto draws = redraw(s0, redraws, [&](ModelState& s) { update_psi1(s, hp, rng); },
                              [](const ModelState& s) { return 1.0 / s.globals.psi1(0, 0); });
    append(moment_checks("Psi1 inverse", draws, oracle));
  }

  // m1 on a grid.
  {
    auto logf = [&](double m) {
      double out = log_normal(m, hp.m2(0), hp.S2(0, 0));
      for (int k = 0; k < 4; ++k) out += log_normal(s0.kernels.mu0[k](0), m, s0.kernels.sigma[k](0, 0) / g.k0);
      return out;
    };
    const Moments oracle = grid_moments(logf, -20.0, 20.0, 200001);
    const auto draws = redraw(s0, redraws, [&](ModelState& s) { update_m1(s, hp, rng); },
                              [](const ModelState& s) { return s.globals.m1(0); });
    append(moment_checks("m1", draws, oracle));
  }

  // varphi: Beta(a + #perturbed, b + #unperturbed).
  {
    const double a = hp.a_phi + 2.0, b = hp.b_phi + 2.0;
    const auto draws = redraw(
        s0, redraws, [&](ModelState& s) { update_varphi(s, hp, rng, ConditionalForm::corrected); },
        [](const ModelState& s) { return s.globals.varphi; });
    append(moment_checks("varphi", draws, {a / (a + b), a * b / ((a + b) * (a + b) * (a + b + 1))}));
  }

  // rho: Beta(a + N0, b + N1).
  {
    double n_shared = 0, n_idio = 0;
    for (const auto& row : f.z)
      for (int k : row) (k < 2 ? n_shared : n_idio) += 1.0;
    const double a = hp.a_rho + n_shared, b = hp.b_rho + n_idio;
    const auto draws = redraw(
        s0, redraws, [&](ModelState& s) { update_rho(s, hp, rng, ConditionalForm::corrected); },
        [](const ModelState& s) { return s.weights.rho; });
    append(moment_checks("rho", draws, {a / (a + b), a * b / ((a + b) * (a + b) * (a + b + 1))}));
  }
  return out;
}

CheckResult bayes_factor_check(std::uint64_t seed, int redraws) {
  const std::vector<std::vector<double>> y = {{0.2, 1.1, -0.4}, {2.3, 1.7, 2.9}};
  const MultiSampleDataset data = scalar_dataset(y);
  HyperParams hp = scalar_hyperparams(1, 1);
  RngStream rng(seed, 0xBF);
  ModelState s = init_state(data, hp, rng, InitStrategy::prior);
  const double psi1 = 1.0, k0 = 0.5, m1 = 0.8, mu0 = 1.2, eps = 0.8, phi = 0.5;
  s.globals.psi1 = scalar(psi1);
  s.globals.k0 = k0;
  s.globals.m1 = Vector::Constant(1, m1);
  s.globals.epsilon = eps;
  s.globals.varphi = phi;
  s.kernels.mu0[0] = Vector::Constant(1, mu0);
  s.assign = AssignmentState(data, {{0, 0, 0}, {0, 0, 0}}, 2);

  // Nested quadrature over lambda = 1 / sigma^2 (log scale) and, for the
  // slab branch, over each group mean.
  const double nu1 = hp.nu1;
  std::vector<double> log_m0, log_m1;
  const int lambda_points = 4001;
  for (int a = 0; a < lambda_points; ++a) {
    const double u = -14.0 + 22.0 * a / (lambda_points - 1);
    const double lambda = std::exp(u);
    const double base = log_gamma_density(lambda, 0.5 * nu1, 0.5 / psi1) + u +
                        log_normal(mu0, m1, 1.0 / (k0 * lambda));
    double spike = base, slab = base;
    for (const auto& group : y) {
      for (double v : group) spike += log_normal(v, mu0, 1.0 / lambda);
      const double n = static_cast<double>(group.size());
      double sum = 0.0;
      for (double v : group) sum += v;
      const double centre = (sum + mu0 / eps) / (n + 1.0 / eps);
      const double half = 14.0 / std::sqrt(lambda * (n + 1.0 / eps));
      const int mu_points = 1601;
      std::vector<double> lv(mu_points);
      double top = -INFINITY;
      for (int b = 0; b < mu_points; ++b) {
        const double mu = centre - half + 2.0 * half * b / (mu_points - 1);
        double l = log_normal(mu, mu0, eps / lambda);
        for (double v : group) l += log_normal(v, mu, 1.0 / lambda);
        lv[b] = l;
        top = std::max(top, l);
      }
      double acc = 0.0;
      for (int b = 0; b < mu_points; ++b) acc += std::exp(lv[b] - top) * ((b == 0 || b == mu_points - 1) ? 0.5 : 1.0);
      slab += top + std::log(acc * 2.0 * half / (mu_points - 1));
    }
    log_m0.push_back(spike);
    log_m1.push_back(slab);
  }
  auto integrate = [](const std::vector<double>& lv) {
    double top = -INFINITY;
    for (double v : lv) top = std::max(top, v);
    double acc = 0.0;
    for (double v : lv) acc += std::exp(v - top);
    return top + std::log(acc);
  };
  const double lm0 = integrate(log_m0), lm1 = integrate(log_m1);
  const double oracle = 1.0 / (1.0 + (1.0 - phi) / phi * std::exp(lm0 - lm1));

  const double closed = cluster_conditional(s, hp, 0, ConditionalForm::corrected).prob_perturbed;
  long hits = 0;
  for (int r = 0; r < redraws; ++r) {
    ModelState t = s;
    update_spike_flags(t, hp, rng, ConditionalForm::corrected);
    hits += t.kernels.perturbed[0];
  }
  const double freq = static_cast<double>(hits) / redraws;
  CheckResult r;
  r.name = "spike flag inclusion probability";
  r.passed = std::abs(closed - oracle) <= 0.02 && std::abs(freq - oracle) <= 0.02;
  r.detail = "closed form " + fmt(closed) + ", sampled " + fmt(freq) + ", quadrature " + fmt(oracle);
  return r;
}

CheckResult swap_ratio_check(std::uint64_t seed, long prior_draws) {
  // Counts per sample over clusters (shared 0,1 | idiosyncratic 2,3).
  const std::vector<std::vector<int>> counts = {{2, 1, 0, 3}, {1, 0, 2, 1}};
  const int a = 0, b = 3;
  std::vector<std::vector<double>> values(2);
  std::vector<std::vector<int>> z(2);
  for (int j = 0; j < 2; ++j)
    for (int k = 0; k < 4; ++k)
      for (int c = 0; c < counts[j][k]; ++c) {
        values[j].push_back(0.1 * (k + 1) + 0.01 * c);
        z[j].push_back(k);
      }
  const MultiSampleDataset data = scalar_dataset(values);
  HyperParams hp = scalar_hyperparams(2, 2);
  hp.a_rho = 2.0;
  hp.b_rho = 1.5;
  RngStream init_rng(seed, 0x5A);
  ModelState s = init_state(data, hp, init_rng, InitStrategy::prior);
  s.globals.alpha = 1.5;
  s.assign = AssignmentState(data, z, 4);
  const double closed = std::exp(swap_log_acceptance(s, hp, a, b));

  auto swapped = counts;
  for (auto& row : swapped) std::swap(row[a], row[b]);
  std::mt19937_64 gen(seed);
  std::gamma_distribution<double> g_arho(hp.a_rho, 1.0), g_brho(hp.b_rho, 1.0), g_w(s.globals.alpha / 2.0, 1.0);
  auto log_prob = [](const std::vector<std::vector<int>>& n, double rho, const double* w0, const double w[2][2]) {
    double out = 0.0;
    for (int j = 0; j < 2; ++j) {
      for (int k = 0; k < 2; ++k) out += n[j][k] * std::log(rho * w0[k]);
      for (int k = 0; k < 2; ++k) out += n[j][k + 2] * std::log((1.0 - rho) * w[j][k]);
    }
    return out;
  };
  double s_old = 0, s_new = 0, ss_old = 0, ss_new = 0, s_cross = 0;
  for (long r = 0; r < prior_draws; ++r) {
    const double ga = g_arho(gen), gb = g_brho(gen);
    const double rho = ga / (ga + gb);
    double w0[2], w[2][2];
    const double x0 = g_w(gen), x1 = g_w(gen);
    w0[0] = x0 / (x0 + x1);
    w0[1] = x1 / (x0 + x1);
    for (int j = 0; j < 2; ++j) {
      const double y0 = g_w(gen), y1 = g_w(gen);
      w[j][0] = y0 / (y0 + y1);
      w[j][1] = y1 / (y0 + y1);
    }
    const double f_old = std::exp(log_prob(counts, rho, w0, w));
    const double f_new = std::exp(log_prob(swapped, rho, w0, w));
    s_old += f_old;
    s_new += f_new;
    ss_old += f_old * f_old;
    ss_new += f_new * f_new;
    s_cross += f_old * f_new;
  }
  const double n = static_cast<double>(prior_draws);
  const double mo = s_old / n, mn = s_new / n;
  const double vo = ss_old / n - mo * mo, vn = ss_new / n - mn * mn, cov = s_cross / n - mo * mn;
  const double ratio = mn / mo;
  // Delta-method standard error of the ratio of means.
  const double se = std::sqrt(std::max(0.0, (vn / (mo * mo) + mn * mn * vo / std::pow(mo, 4) - 2.0 * mn * cov / std::pow(mo, 3)) / n));
  CheckResult r = mean_check("swap acceptance ratio", ratio, closed, se, 3.0);
  r.detail = "Monte Carlo " + fmt(ratio) + " (s.e. " + fmt(se) + "), closed form " + fmt(closed);
  return r;
}

std::vector<CheckResult> geweke_checks(std::uint64_t seed, long sweeps, bool paper_literal) {
  HyperParams hp;
  hp.K0 = 2;
  hp.K1 = 2;
  hp.a_rho = 2.0;
  hp.b_rho = 2.0;
  hp.tau_alpha1 = 4.0;
  hp.tau_alpha2 = 4.0;
  hp.nu1 = 10.0;
  hp.Psi2 = scalar(10.0);
  hp.nu2 = 10.0;
  hp.m2 = Vector::Zero(1);
  hp.S2 = scalar(1.0);
  hp.tau1 = 4.0;
  hp.tau2 = 4.0;
  hp.a_eps = 0.05;
  hp.b_eps = 1.0;
  hp.a_phi = 2.0;
  hp.b_phi = 2.0;

  MultiSampleDataset data = scalar_dataset({std::vector<double>(5, 0.0), std::vector<double>(5, 0.0)});
  RngStream rng(seed, 0x6E);
  RngStream data_rng = rng.derive(1);
  ModelState state = init_state(data, hp, rng, InitStrategy::prior);
  regenerate_observations(state, data, data_rng);
  state.assign.rebuild(data);

  SweepOptions options;
  options.alpha_proposal_a = 4.0;
  if (paper_literal) options.form = ConditionalForm::paper_literal;
  const std::vector<std::string> names = {"rho", "varphi", "epsilon", "alpha", "k0"};
  std::vector<std::vector<double>> trace(names.size());
  for (long t = 0; t < sweeps; ++t) {
    sweep(state, data, hp, options, rng);
    regenerate_observations(state, data, data_rng);
    state.assign.rebuild(data);
    const double v[] = {state.weights.rho, state.globals.varphi, state.globals.epsilon, state.globals.alpha,
                        state.globals.k0};
    for (std::size_t i = 0; i < names.size(); ++i) trace[i].push_back(v[i]);
  }

  auto beta_m = [](double a, double b) {
    return std::pair{a / (a + b), a * (a + 1) / ((a + b) * (a + b + 1))};
  };
  auto gamma_m = [](double shape, double rate) {
    return std::pair{shape / rate, shape * (shape + 1) / (rate * rate)};
  };
  const std::pair<double, double> prior[] = {
      beta_m(hp.a_rho, hp.b_rho),
      beta_m(hp.a_phi, hp.b_phi),
      {0.5 * (hp.a_eps + hp.b_eps),
       (hp.a_eps * hp.a_eps + hp.a_eps * hp.b_eps + hp.b_eps * hp.b_eps) / 3.0},
      gamma_m(hp.tau_alpha1, hp.tau_alpha2),
      gamma_m(0.5 * hp.tau1, 0.5 * hp.tau2)};

  std::vector<CheckResult> out;
  const int batches = 50;
  const long per = sweeps / batches;
  for (std::size_t i = 0; i < names.size(); ++i) {
    for (int power = 1; power <= 2; ++power) {
      std::vector<double> means;
      for (int b = 0; b < batches; ++b) {
        double acc = 0.0;
        for (long t = b * per; t < (b + 1) * per; ++t) acc += power == 1 ? trace[i][t] : trace[i][t] * trace[i][t];
        means.push_back(acc / per);
      }
      const Moments m = moments(means);
      const double target = power == 1 ? prior[i].first : prior[i].second;
      out.push_back(mean_check("Geweke " + names[i] + (power == 1 ? " mean" : " second moment"), m.mean, target,
                               std::sqrt(m.var / batches), 4.0));
    }
  }
  return out;
}

}  // namespace cremid

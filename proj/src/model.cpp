#include "cremid/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <utility>

#include "cremid/distributions.hpp"
#include "cremid/errors.hpp"

namespace cremid {
namespace {

std::string at(int j, int k) {
  std::ostringstream os;
  os << "(" << j << "," << k << ")";
  return os.str();
}

std::string at(int k) { return "(" + std::to_string(k) + ")"; }

}  // namespace

int MultiSampleDataset::total_size() const {
  int n = 0;
  for (const auto& s : samples) n += static_cast<int>(s.rows());
  return n;
}

void check_dataset(const MultiSampleDataset& data) {
  if (data.samples.empty()) throw ValidationError("dataset has no samples");
  if (data.dim < 1) throw ValidationError("dataset dimension must be positive");
  if (!data.labels.empty() && data.labels.size() != data.samples.size()) {
    throw ValidationError("dataset labels do not match number of samples");
  }
  for (int j = 0; j < data.num_samples(); ++j) {
    const Matrix& s = data.samples[static_cast<std::size_t>(j)];
    if (s.rows() < 1) throw ValidationError("sample " + std::to_string(j) + " is empty");
    if (s.cols() != data.dim) {
      throw ValidationError("sample " + std::to_string(j) + " has wrong dimension");
    }
    if (!s.allFinite()) {
      throw ValidationError("sample " + std::to_string(j) + " has non-finite entries");
    }
  }
}

Vector pooled_mean(const MultiSampleDataset& data) {
  Vector sum = Vector::Zero(data.dim);
  for (const auto& s : data.samples) sum += s.colwise().sum().transpose();
  return sum / static_cast<double>(data.total_size());
}

Matrix pooled_covariance(const MultiSampleDataset& data) {
  const Vector mean = pooled_mean(data);
  Matrix acc = Matrix::Zero(data.dim, data.dim);
  for (const auto& s : data.samples) {
    Matrix centred = s.rowwise() - mean.transpose();
    acc += centred.transpose() * centred;
  }
  const int n = data.total_size();
  return acc / static_cast<double>(std::max(n - 1, 1));
}

HyperParams default_hyperparams(const MultiSampleDataset& data, int K0, int K1) {
  check_dataset(data);
  HyperParams hp;
  hp.K0 = K0;
  hp.K1 = K1;
  const int p = data.dim;
  hp.nu1 = p + 2.0;
  hp.nu2 = p + 2.0;
  hp.m2 = pooled_mean(data);
  Matrix cov = pooled_covariance(data);
  // Guard against degenerate (e.g. single-point) data.
  const double ridge = 1e-8 * std::max(cov.trace() / p, 1.0);
  cov += ridge * Matrix::Identity(p, p);
  hp.S2 = SpdMatrix(cov);
  hp.Psi2 = SpdMatrix(cov / static_cast<double>(K0 + K1)).inverse();
  return hp;
}

void check_hyperparams(const HyperParams& hp) {
  auto fail = [](const std::string& what) { throw ValidationError("hyperparameter " + what); };
  auto pos = [](double x) { return x > 0.0 && std::isfinite(x); };
  if (hp.K0 < 1 || hp.K1 < 1) fail("K0 and K1 must be >= 1");
  const int p = hp.dim();
  if (p < 1) fail("m2 must be set");
  if (!pos(hp.a_rho) || !pos(hp.b_rho)) fail("a_rho, b_rho must be positive");
  if (!pos(hp.tau_alpha1) || !pos(hp.tau_alpha2)) fail("tau_alpha1, tau_alpha2 must be positive");
  if (!pos(hp.tau1) || !pos(hp.tau2)) fail("tau1, tau2 must be positive");
  if (!pos(hp.a_phi) || !pos(hp.b_phi)) fail("a_phi, b_phi must be positive");
  if (!(hp.nu1 > p - 1) || !std::isfinite(hp.nu1)) fail("nu1 must exceed p - 1");
  if (!(hp.nu2 > p - 1) || !std::isfinite(hp.nu2)) fail("nu2 must exceed p - 1");
  if (!(hp.a_eps >= 0.0 && hp.a_eps < hp.b_eps && std::isfinite(hp.b_eps))) {
    fail("epsilon support must satisfy 0 <= a_eps < b_eps");
  }
  if (hp.Psi2.dim() != p || hp.S2.dim() != p) fail("Psi2 and S2 must be p x p");
  if (!hp.m2.allFinite()) fail("m2 must be finite");
}

// ---------------------------------------------------------------------------

double WeightState::log_pi(int j, int k) const {
  const int k0 = K0();
  if (k < k0) return std::log(rho) + log_w0(k);
  return std::log1p(-rho) + log_w[static_cast<std::size_t>(j)](k - k0);
}

double WeightState::pi(int j, int k) const { return std::exp(log_pi(j, k)); }

Matrix WeightState::pi_matrix() const {
  const int J = static_cast<int>(log_w.size());
  const int K = K0() + K1();
  Matrix out(J, K);
  for (int j = 0; j < J; ++j)
    for (int k = 0; k < K; ++k) out(j, k) = pi(j, k);
  return out;
}

// ---------------------------------------------------------------------------

void ClusterStats::add(const Vector& y) {
  ++count;
  sum += y;
  outer.noalias() += y * y.transpose();
}

void ClusterStats::remove(const Vector& y) {
  --count;
  if (count == 0) {
    sum.setZero();
    outer.setZero();
    return;
  }
  sum -= y;
  outer.noalias() -= y * y.transpose();
}

void ClusterStats::merge(const ClusterStats& other) {
  count += other.count;
  sum += other.sum;
  outer += other.outer;
}

Matrix ClusterStats::scatter() const {
  if (count == 0) return Matrix::Zero(sum.size(), sum.size());
  Matrix s = outer - sum * sum.transpose() / static_cast<double>(count);
  return 0.5 * (s + s.transpose());
}

AssignmentState::AssignmentState(const MultiSampleDataset& data,
                                 std::vector<std::vector<int>> labels, int num_clusters)
    : num_clusters_(num_clusters), labels_(std::move(labels)) {
  if (static_cast<int>(labels_.size()) != data.num_samples()) {
    throw ValidationError("assignment labels do not match number of samples");
  }
  for (int j = 0; j < data.num_samples(); ++j) {
    if (static_cast<int>(labels_[static_cast<std::size_t>(j)].size()) != data.size(j)) {
      throw ValidationError("assignment labels do not match sample size");
    }
    for (int k : labels_[static_cast<std::size_t>(j)]) {
      if (k < 0 || k >= num_clusters) throw ValidationError("cluster label out of range");
    }
  }
  rebuild(data);
}

int AssignmentState::pooled_count(int k) const {
  int n = 0;
  for (const auto& row : stats_) n += row[static_cast<std::size_t>(k)].count;
  return n;
}

ClusterStats AssignmentState::pooled(int k) const {
  ClusterStats out(static_cast<int>(stats_.front().front().sum.size()));
  for (const auto& row : stats_) out.merge(row[static_cast<std::size_t>(k)]);
  return out;
}

void AssignmentState::reassign(const MultiSampleDataset& data, int j, int i, int k) {
  int& current = labels_[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)];
  if (current == k) return;
  const Vector y = data.observation(j, i);
  auto& row = stats_[static_cast<std::size_t>(j)];
  row[static_cast<std::size_t>(current)].remove(y);
  row[static_cast<std::size_t>(k)].add(y);
  current = k;
}

void AssignmentState::swap_labels(int a, int b) {
  if (a == b) return;
  for (auto& row : labels_)
    for (int& k : row) {
      if (k == a) k = b;
      else if (k == b) k = a;
    }
  for (auto& row : stats_) std::swap(row[static_cast<std::size_t>(a)], row[static_cast<std::size_t>(b)]);
}

void AssignmentState::rebuild(const MultiSampleDataset& data) {
  stats_.assign(static_cast<std::size_t>(data.num_samples()),
                std::vector<ClusterStats>(static_cast<std::size_t>(num_clusters_), ClusterStats(data.dim)));
  for (int j = 0; j < data.num_samples(); ++j)
    for (int i = 0; i < data.size(j); ++i)
      stats_[static_cast<std::size_t>(j)][static_cast<std::size_t>(label(j, i))].add(data.observation(j, i));
}

// ---------------------------------------------------------------------------

std::vector<Violation> validate(const ModelState& state, const MultiSampleDataset& data,
                                const HyperParams& hp) {
  std::vector<Violation> out;
  auto report = [&out](std::string what, std::string where) {
    out.push_back({std::move(what), std::move(where)});
  };
  const int J = data.num_samples();
  const int p = data.dim;
  const int K0 = hp.K0;
  const int K1 = hp.K1;
  const int K = K0 + K1;

  // Weights.
  const WeightState& w = state.weights;
  if (!(w.rho > 0.0 && w.rho < 1.0)) report("rho outside (0,1)", "rho");
  if (w.log_w0.size() != K0) {
    report("w0 has wrong length", "w0");
  } else if (std::abs(w.log_w0.array().exp().sum() - 1.0) > 1e-12 || !(w.log_w0.array() <= 0.0).all()) {
    report("w0 is not on the simplex", "w0");
  }
  if (static_cast<int>(w.log_w.size()) != J) {
    report("w has wrong number of samples", "w");
  } else {
    for (int j = 0; j < J; ++j) {
      const Vector& lw = w.log_w[static_cast<std::size_t>(j)];
      if (lw.size() != K1) {
        report("w_j has wrong length", "w" + at(j));
      } else if (std::abs(lw.array().exp().sum() - 1.0) > 1e-12 || !(lw.array() <= 0.0).all()) {
        report("w_j is not on the simplex", "w" + at(j));
      }
    }
  }
  const bool weights_ok = out.empty();
  if (weights_ok) {
    const Matrix pi = w.pi_matrix();
    for (int j = 0; j < J; ++j) {
      if (std::abs(pi.row(j).sum() - 1.0) > 1e-12) report("pi_j does not sum to one", "pi" + at(j));
      for (int k = 0; k < K0; ++k)
        if (pi(j, k) != pi(0, k)) report("shared weight differs across samples", "pi" + at(j, k));
    }
  }

  // Kernels.
  const KernelState& ks = state.kernels;
  const bool kernel_shapes = static_cast<int>(ks.mu0.size()) == K && static_cast<int>(ks.sigma.size()) == K &&
                             static_cast<int>(ks.perturbed.size()) == K && static_cast<int>(ks.mu.size()) == J;
  if (!kernel_shapes) {
    report("kernel blocks have wrong shape", "kernels");
  } else {
    for (int k = 0; k < K; ++k) {
      if (ks.mu0[static_cast<std::size_t>(k)].size() != p || !ks.mu0[static_cast<std::size_t>(k)].allFinite()) {
        report("grand mean malformed", "mu0" + at(k));
      }
      if (ks.sigma[static_cast<std::size_t>(k)].dim() != p) report("covariance not SPD p x p", "Sigma" + at(k));
      if (ks.perturbed[static_cast<std::size_t>(k)] > 1) report("S_k not binary", "S" + at(k));
    }
    for (int j = 0; j < J; ++j) {
      if (static_cast<int>(ks.mu[static_cast<std::size_t>(j)].size()) != K) {
        report("group means have wrong length", "mu" + at(j));
        continue;
      }
      for (int k = 0; k < K; ++k) {
        const Vector& m = ks.mu[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)];
        if (m.size() != p || !m.allFinite()) {
          report("group mean malformed", "mu" + at(j, k));
        } else if (ks.perturbed[static_cast<std::size_t>(k)] == 0 && m != ks.mu0[static_cast<std::size_t>(k)]) {
          report("spike cluster group mean differs from grand mean", "mu" + at(j, k));
        }
      }
    }
  }

  // Globals.
  const GlobalParamState& g = state.globals;
  if (!(g.alpha > 0.0) || !std::isfinite(g.alpha)) report("alpha not positive", "alpha");
  if (!(g.k0 > 0.0) || !std::isfinite(g.k0)) report("k0 not positive", "k0");
  if (g.m1.size() != p || !g.m1.allFinite()) report("m1 malformed", "m1");
  if (g.psi1.dim() != p) report("Psi1 not SPD p x p", "Psi1");
  if (!(g.epsilon > hp.a_eps && g.epsilon < hp.b_eps)) report("epsilon outside (a_eps, b_eps)", "epsilon");
  if (!(g.varphi > 0.0 && g.varphi < 1.0)) report("varphi outside (0,1)", "varphi");

  // Assignments against a brute-force recount.
  const AssignmentState& as = state.assign;
  if (static_cast<int>(as.labels().size()) != J || as.num_clusters() != K) {
    report("assignment state has wrong shape", "Z");
    return out;
  }
  long total = 0;
  for (int j = 0; j < J; ++j) {
    if (static_cast<int>(as.labels()[static_cast<std::size_t>(j)].size()) != data.size(j)) {
      report("assignment vector has wrong length", "Z" + at(j));
      return out;
    }
    std::vector<ClusterStats> recount(static_cast<std::size_t>(K), ClusterStats(p));
    for (int i = 0; i < data.size(j); ++i) {
      const int k = as.label(j, i);
      if (k < 0 || k >= K) {
        report("label out of range", "Z" + at(j, i));
        return out;
      }
      recount[static_cast<std::size_t>(k)].add(data.observation(j, i));
    }
    for (int k = 0; k < K; ++k) {
      const ClusterStats& cached = as.stats(j, k);
      const ClusterStats& fresh = recount[static_cast<std::size_t>(k)];
      total += cached.count;
      if (cached.count != fresh.count) {
        report("cached count differs from recount", "n" + at(j, k));
        continue;
      }
      const double scale = 1.0 + fresh.outer.cwiseAbs().maxCoeff();
      if ((cached.sum - fresh.sum).cwiseAbs().maxCoeff() > 1e-8 * scale ||
          (cached.outer - fresh.outer).cwiseAbs().maxCoeff() > 1e-8 * scale) {
        report("cached sufficient statistics drifted", "stats" + at(j, k));
      }
    }
  }
  if (total != data.total_size()) report("counts do not sum to number of observations", "Z");
  return out;
}

double log_likelihood(const ModelState& state, const MultiSampleDataset& data) {
  const int p = data.dim;
  const double log2pi = std::log(2.0 * std::numbers::pi);
  double out = 0.0;
  for (int k = 0; k < state.K(); ++k) {
    const SpdMatrix& sigma = state.kernels.sigma[static_cast<std::size_t>(k)];
    const Matrix linv = sigma.cholesky().triangularView<Eigen::Lower>().solve(Matrix::Identity(p, p));
    for (int j = 0; j < data.num_samples(); ++j) {
      const ClusterStats& st = state.assign.stats(j, k);
      if (st.count == 0) continue;
      const Vector& mu = state.kernels.mu[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)];
      // sum_i (y - mu)(y - mu)'
      Matrix m = st.outer - st.sum * mu.transpose() - mu * st.sum.transpose() +
                 static_cast<double>(st.count) * mu * mu.transpose();
      const double quad = (linv * m * linv.transpose()).trace();
      out += -0.5 * (st.count * (p * log2pi + sigma.log_det()) + quad);
    }
  }
  return out;
}

double joint_log_density(const ModelState& state, const MultiSampleDataset& data,
                         const HyperParams& hp) {
  using namespace dist;
  const int J = data.num_samples();
  const int K0 = hp.K0;
  const int K1 = hp.K1;
  const int K = K0 + K1;
  const WeightState& w = state.weights;
  const KernelState& ks = state.kernels;
  const GlobalParamState& g = state.globals;

  double out = log_likelihood(state, data);

  for (int j = 0; j < J; ++j)
    for (int k = 0; k < K; ++k) {
      const int n = state.assign.count(j, k);
      if (n > 0) out += n * w.log_pi(j, k);
    }

  out += logpdf_symmetric_dirichlet_log(w.log_w0, g.alpha / K0);
  for (const Vector& lw : w.log_w) out += logpdf_symmetric_dirichlet_log(lw, g.alpha / K1);
  out += logpdf_beta(w.rho, hp.a_rho, hp.b_rho);

  const double log_phi = std::log(g.varphi);
  const double log_1m_phi = std::log1p(-g.varphi);
  for (int k = 0; k < K; ++k) {
    const SpdMatrix& sigma = ks.sigma[static_cast<std::size_t>(k)];
    out += logpdf_wishart(sigma.inverse(), g.psi1, hp.nu1);
    out += logpdf_mvn(ks.mu0[static_cast<std::size_t>(k)], g.m1, sigma.scaled(1.0 / g.k0));
    if (ks.perturbed[static_cast<std::size_t>(k)]) {
      out += log_phi;
      const SpdMatrix slab = sigma.scaled(g.epsilon);
      for (int j = 0; j < J; ++j) {
        out += logpdf_mvn(ks.mu[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)],
                          ks.mu0[static_cast<std::size_t>(k)], slab);
      }
    } else {
      out += log_1m_phi;
    }
  }

  out += logpdf_gamma(g.alpha, hp.tau_alpha1, hp.tau_alpha2);
  out += (g.epsilon > hp.a_eps && g.epsilon < hp.b_eps) ? -std::log(hp.b_eps - hp.a_eps)
                                                         : -std::numeric_limits<double>::infinity();
  out += logpdf_mvn(g.m1, hp.m2, hp.S2);
  out += logpdf_wishart(g.psi1.inverse(), hp.Psi2.inverse(), hp.nu2);
  out += logpdf_gamma(g.k0, 0.5 * hp.tau1, 0.5 * hp.tau2);
  out += logpdf_beta(g.varphi, hp.a_phi, hp.b_phi);
  return out;
}

// ---------------------------------------------------------------------------

InitStrategy parse_init_strategy(const std::string& name) {
  if (name == "prior") return InitStrategy::prior;
  if (name == "kmeans-warm") return InitStrategy::kmeans_warm;
  throw ValidationError("unknown init strategy '" + name + "'");
}

std::string to_string(InitStrategy s) {
  return s == InitStrategy::prior ? "prior" : "kmeans-warm";
}

namespace {

std::vector<double> constant(int n, double v) { return std::vector<double>(static_cast<std::size_t>(n), v); }

// Pooled k-means++ seeding followed by Lloyd iterations.
std::vector<Vector> kmeans_centres(const std::vector<Vector>& points, int K, RngStream& rng) {
  const int n = static_cast<int>(points.size());
  std::vector<Vector> centres;
  centres.reserve(static_cast<std::size_t>(K));
  centres.push_back(points[static_cast<std::size_t>(std::min(n - 1, static_cast<int>(rng.uniform() * n)))]);
  std::vector<double> d2(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  while (static_cast<int>(centres.size()) < K) {
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      d2[static_cast<std::size_t>(i)] =
          std::min(d2[static_cast<std::size_t>(i)], (points[static_cast<std::size_t>(i)] - centres.back()).squaredNorm());
      total += d2[static_cast<std::size_t>(i)];
    }
    int pick = n - 1;
    if (total > 0.0) {
      double u = rng.uniform() * total;
      for (int i = 0; i < n; ++i) {
        u -= d2[static_cast<std::size_t>(i)];
        if (u <= 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = std::min(n - 1, static_cast<int>(rng.uniform() * n));
    }
    centres.push_back(points[static_cast<std::size_t>(pick)]);
  }
  std::vector<int> owner(static_cast<std::size_t>(n), -1);
  for (int iter = 0; iter < 50; ++iter) {
    bool changed = false;
    for (int i = 0; i < n; ++i) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (int k = 0; k < K; ++k) {
        const double d = (points[static_cast<std::size_t>(i)] - centres[static_cast<std::size_t>(k)]).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = k;
        }
      }
      if (owner[static_cast<std::size_t>(i)] != best) {
        owner[static_cast<std::size_t>(i)] = best;
        changed = true;
      }
    }
    if (!changed) break;
    std::vector<Vector> sums(static_cast<std::size_t>(K), Vector::Zero(points.front().size()));
    std::vector<int> counts(static_cast<std::size_t>(K), 0);
    for (int i = 0; i < n; ++i) {
      sums[static_cast<std::size_t>(owner[static_cast<std::size_t>(i)])] += points[static_cast<std::size_t>(i)];
      ++counts[static_cast<std::size_t>(owner[static_cast<std::size_t>(i)])];
    }
    for (int k = 0; k < K; ++k)
      if (counts[static_cast<std::size_t>(k)] > 0)
        centres[static_cast<std::size_t>(k)] = sums[static_cast<std::size_t>(k)] / counts[static_cast<std::size_t>(k)];
  }
  return centres;
}

ModelState init_from_prior(const MultiSampleDataset& data, const HyperParams& hp, RngStream& rng) {
  using namespace dist;
  const int J = data.num_samples();
  const int K0 = hp.K0, K1 = hp.K1, K = hp.K();
  ModelState s;
  GlobalParamState& g = s.globals;
  g.alpha = sample_gamma(hp.tau_alpha1, hp.tau_alpha2, rng);
  g.k0 = sample_gamma(0.5 * hp.tau1, 0.5 * hp.tau2, rng);
  g.m1 = sample_mvn(hp.m2, hp.S2, rng);
  g.psi1 = sample_wishart(hp.Psi2.inverse(), hp.nu2, rng).inverse();
  g.epsilon = hp.a_eps + (hp.b_eps - hp.a_eps) * rng.uniform();
  g.varphi = sample_beta(hp.a_phi, hp.b_phi, rng);

  WeightState& w = s.weights;
  w.rho = sample_beta(hp.a_rho, hp.b_rho, rng);
  w.log_w0 = sample_dirichlet_log(constant(K0, g.alpha / K0), rng);
  for (int j = 0; j < J; ++j) w.log_w.push_back(sample_dirichlet_log(constant(K1, g.alpha / K1), rng));

  KernelState& ks = s.kernels;
  ks.mu.assign(static_cast<std::size_t>(J), {});
  for (int k = 0; k < K; ++k) {
    SpdMatrix sigma = sample_wishart(g.psi1, hp.nu1, rng).inverse();
    Vector mu0 = sample_mvn(g.m1, sigma.scaled(1.0 / g.k0), rng);
    const bool pert = rng.uniform() < g.varphi;
    for (int j = 0; j < J; ++j) {
      ks.mu[static_cast<std::size_t>(j)].push_back(pert ? sample_mvn(mu0, sigma.scaled(g.epsilon), rng) : mu0);
    }
    ks.sigma.push_back(std::move(sigma));
    ks.mu0.push_back(std::move(mu0));
    ks.perturbed.push_back(pert ? 1 : 0);
  }

  std::vector<std::vector<int>> z(static_cast<std::size_t>(J));
  std::vector<double> lp(static_cast<std::size_t>(K));
  for (int j = 0; j < J; ++j) {
    for (int k = 0; k < K; ++k) lp[static_cast<std::size_t>(k)] = w.log_pi(j, k);
    for (int i = 0; i < data.size(j); ++i) z[static_cast<std::size_t>(j)].push_back(sample_categorical(lp, rng));
  }
  s.assign = AssignmentState(data, std::move(z), K);
  return s;
}

ModelState init_kmeans(const MultiSampleDataset& data, const HyperParams& hp, RngStream& rng) {
  const int J = data.num_samples();
  const int p = data.dim;
  const int K0 = hp.K0, K1 = hp.K1, K = hp.K();
  const int n_total = data.total_size();
  if (n_total < K) {
    throw ValidationError("kmeans-warm initialization needs at least K0 + K1 observations");
  }
  std::vector<Vector> points;
  points.reserve(static_cast<std::size_t>(n_total));
  for (int j = 0; j < J; ++j)
    for (int i = 0; i < data.size(j); ++i) points.push_back(data.observation(j, i));
  const std::vector<Vector> centres = kmeans_centres(points, K, rng);

  std::vector<std::vector<int>> z(static_cast<std::size_t>(J));
  for (int j = 0; j < J; ++j) {
    for (int i = 0; i < data.size(j); ++i) {
      const Vector y = data.observation(j, i);
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (int k = 0; k < K; ++k) {
        const double d = (y - centres[static_cast<std::size_t>(k)]).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = k;
        }
      }
      z[static_cast<std::size_t>(j)].push_back(best);
    }
  }

  ModelState s;
  s.assign = AssignmentState(data, std::move(z), K);

  // Pooled within-cluster covariance, ridge-regularized until SPD.
  Matrix within = Matrix::Zero(p, p);
  for (int k = 0; k < K; ++k) within += s.assign.pooled(k).scatter();
  within /= static_cast<double>(std::max(n_total - K, 1));
  const double base = std::max(within.trace() / p, 1e-12 * std::max(hp.S2.matrix().trace() / p, 1.0));
  SpdMatrix sigma;
  for (double ridge = 1e-6;; ridge *= 10.0) {
    try {
      sigma = SpdMatrix(Matrix(within + ridge * base * Matrix::Identity(p, p)));
      break;
    } catch (const NumericalError&) {
      if (ridge > 1e6) throw;
    }
  }

  GlobalParamState& g = s.globals;
  g.alpha = hp.tau_alpha1 / hp.tau_alpha2;
  g.k0 = hp.tau1 / hp.tau2;
  g.m1 = hp.m2;
  g.psi1 = sigma.inverse().scaled(1.0 / hp.nu1);
  g.epsilon = 0.5 * (hp.a_eps + hp.b_eps);
  g.varphi = hp.a_phi / (hp.a_phi + hp.b_phi);

  WeightState& w = s.weights;
  w.rho = hp.a_rho / (hp.a_rho + hp.b_rho);
  // Normalized counts with the prior pseudo-count so empty clusters keep
  // positive weight.
  auto normalized_log = [](const Vector& counts) {
    Vector out = counts.array().log();
    return Vector(out.array() - std::log(counts.sum()));
  };
  Vector c0(K0);
  for (int k = 0; k < K0; ++k) c0(k) = s.assign.pooled_count(k) + g.alpha / K0;
  w.log_w0 = normalized_log(c0);
  for (int j = 0; j < J; ++j) {
    Vector c1(K1);
    for (int k = 0; k < K1; ++k) c1(k) = s.assign.count(j, K0 + k) + g.alpha / K1;
    w.log_w.push_back(normalized_log(c1));
  }

  KernelState& ks = s.kernels;
  ks.mu0 = centres;
  ks.sigma.assign(static_cast<std::size_t>(K), sigma);
  ks.perturbed.assign(static_cast<std::size_t>(K), 0);
  ks.mu.assign(static_cast<std::size_t>(J), centres);
  return s;
}

}  // namespace

ModelState init_state(const MultiSampleDataset& data, const HyperParams& hp, RngStream& rng,
                      InitStrategy strategy) {
  check_dataset(data);
  check_hyperparams(hp);
  if (hp.dim() != data.dim) throw ValidationError("hyperparameter dimension does not match data");
  return strategy == InitStrategy::prior ? init_from_prior(data, hp, rng) : init_kmeans(data, hp, rng);
}

void regenerate_observations(const ModelState& state, MultiSampleDataset& data, RngStream& rng) {
  for (int j = 0; j < data.num_samples(); ++j) {
    Matrix& sample = data.samples[static_cast<std::size_t>(j)];
    for (int i = 0; i < data.size(j); ++i) {
      const int k = state.assign.label(j, i);
      sample.row(i) = dist::sample_mvn(state.kernels.mu[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)],
                                       state.kernels.sigma[static_cast<std::size_t>(k)], rng)
                          .transpose();
    }
  }
}

void swap_cluster_parameters(ModelState& state, int a, int b) {
  if (a == b) return;
  KernelState& ks = state.kernels;
  std::swap(ks.mu0[static_cast<std::size_t>(a)], ks.mu0[static_cast<std::size_t>(b)]);
  std::swap(ks.sigma[static_cast<std::size_t>(a)], ks.sigma[static_cast<std::size_t>(b)]);
  std::swap(ks.perturbed[static_cast<std::size_t>(a)], ks.perturbed[static_cast<std::size_t>(b)]);
  for (auto& row : ks.mu) std::swap(row[static_cast<std::size_t>(a)], row[static_cast<std::size_t>(b)]);
  state.assign.swap_labels(a, b);
}

}  // namespace cremid

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cremid/linalg.hpp"
#include "cremid/rng.hpp"

namespace cremid {

/// J samples of p-dimensional observations. Sample j is an n_j x p matrix.
struct MultiSampleDataset {
  int dim = 0;
  std::vector<Matrix> samples;
  std::vector<std::string> labels;

  int num_samples() const { return static_cast<int>(samples.size()); }
  int size(int j) const { return static_cast<int>(samples[static_cast<std::size_t>(j)].rows()); }
  int total_size() const;
  Vector observation(int j, int i) const {
    return samples[static_cast<std::size_t>(j)].row(i).transpose();
  }
};

/// Throws ValidationError unless J >= 1, every n_j >= 1, dimensions agree
/// and every entry is finite.
void check_dataset(const MultiSampleDataset& data);

Vector pooled_mean(const MultiSampleDataset& data);
Matrix pooled_covariance(const MultiSampleDataset& data);

/// Fixed prior constants. Clusters 0..K0-1 carry shared weights, clusters
/// K0..K0+K1-1 carry per-sample weights.
struct HyperParams {
  int K0 = 10;
  int K1 = 10;
  double a_rho = 1.0, b_rho = 1.0;
  double tau_alpha1 = 1.0, tau_alpha2 = 1.0;
  double nu1 = 0.0;
  SpdMatrix Psi2;
  double nu2 = 0.0;
  Vector m2;
  SpdMatrix S2;
  double tau1 = 1.0, tau2 = 1.0;
  double a_eps = 0.0, b_eps = 1.0;
  double a_phi = 1.0, b_phi = 1.0;

  int K() const { return K0 + K1; }
  int dim() const { return static_cast<int>(m2.size()); }
};

/// Weakly informative defaults centred on the pooled data: nu1 = nu2 = p+2,
/// m2 = pooled mean, S2 = pooled covariance C, Psi2 = (C / K)^{-1}.
HyperParams default_hyperparams(const MultiSampleDataset& data, int K0 = 10, int K1 = 10);

/// Throws ValidationError listing the first violated constraint.
void check_hyperparams(const HyperParams& hp);

struct WeightState {
  double rho = 0.5;
  Vector log_w0;               // K0
  std::vector<Vector> log_w;   // J vectors of length K1

  int K0() const { return static_cast<int>(log_w0.size()); }
  int K1() const { return log_w.empty() ? 0 : static_cast<int>(log_w.front().size()); }
  double log_pi(int j, int k) const;
  double pi(int j, int k) const;
  /// J x (K0 + K1) matrix of pi_{j,k}.
  Matrix pi_matrix() const;
};

struct KernelState {
  std::vector<Vector> mu0;                // grand means, K
  std::vector<std::vector<Vector>> mu;    // group means [j][k]
  std::vector<SpdMatrix> sigma;           // shared covariances, K
  std::vector<std::uint8_t> perturbed;    // S_k

  int num_clusters() const { return static_cast<int>(mu0.size()); }
};

struct GlobalParamState {
  double alpha = 1.0;
  double k0 = 1.0;
  Vector m1;
  SpdMatrix psi1;
  double epsilon = 0.5;
  double varphi = 0.5;
};

/// Count, sum and sum of outer products for one cell of observations.
struct ClusterStats {
  int count = 0;
  Vector sum;
  Matrix outer;

  explicit ClusterStats(int dim = 0) : sum(Vector::Zero(dim)), outer(Matrix::Zero(dim, dim)) {}
  void add(const Vector& y);
  void remove(const Vector& y);
  void merge(const ClusterStats& other);
  Vector mean() const { return sum / count; }
  /// Centred scatter sum (y - ybar)(y - ybar)'.
  Matrix scatter() const;
};

/// Cluster labels for every observation plus cached per-(sample, cluster)
/// sufficient statistics, maintained incrementally.
class AssignmentState {
 public:
  AssignmentState() = default;
  AssignmentState(const MultiSampleDataset& data, std::vector<std::vector<int>> labels,
                  int num_clusters);

  int num_clusters() const { return num_clusters_; }
  int label(int j, int i) const {
    return labels_[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)];
  }
  const std::vector<std::vector<int>>& labels() const { return labels_; }

  const ClusterStats& stats(int j, int k) const {
    return stats_[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)];
  }
  int count(int j, int k) const { return stats(j, k).count; }
  int pooled_count(int k) const;
  ClusterStats pooled(int k) const;

  /// Moves observation (j, i) to cluster k, updating the statistics in O(p^2).
  void reassign(const MultiSampleDataset& data, int j, int i, int k);
  /// Exchanges the labels a and b everywhere.
  void swap_labels(int a, int b);
  /// Recomputes all statistics from the labels.
  void rebuild(const MultiSampleDataset& data);

 private:
  int num_clusters_ = 0;
  std::vector<std::vector<int>> labels_;
  std::vector<std::vector<ClusterStats>> stats_;
};

struct ModelState {
  WeightState weights;
  KernelState kernels;
  GlobalParamState globals;
  AssignmentState assign;

  int K0() const { return weights.K0(); }
  int K1() const { return weights.K1(); }
  int K() const { return K0() + K1(); }
  int num_samples() const { return static_cast<int>(weights.log_w.size()); }
};

struct Violation {
  std::string invariant;
  std::string location;
};

/// Every violated state invariant; empty means valid.
std::vector<Violation> validate(const ModelState& state, const MultiSampleDataset& data,
                                const HyperParams& hp);

/// Sum over observations of log N(y | mu_{j,Z}, Sigma_Z).
double log_likelihood(const ModelState& state, const MultiSampleDataset& data);

/// Joint log density of data and every latent variable under the finite
/// symmetric-Dirichlet model. Precision matrices are densities on Sigma^{-1}
/// and Psi1^{-1}; the spike branch of mu_{j,k} contributes nothing.
double joint_log_density(const ModelState& state, const MultiSampleDataset& data,
                         const HyperParams& hp);

enum class InitStrategy { prior, kmeans_warm };

InitStrategy parse_init_strategy(const std::string& name);
std::string to_string(InitStrategy s);

ModelState init_state(const MultiSampleDataset& data, const HyperParams& hp, RngStream& rng,
                      InitStrategy strategy);

/// Overwrites the observations in `data` with draws from N(mu_{j,Z}, Sigma_Z),
/// keeping sample sizes and labels. Used by the joint-distribution test.
void regenerate_observations(const ModelState& state, MultiSampleDataset& data, RngStream& rng);

/// Exchanges clusters a and b in every parameter block and in the labels.
/// Weight vectors are left untouched.
void swap_cluster_parameters(ModelState& state, int a, int b);

}  // namespace cremid

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cremid/draws.hpp"
#include "cremid/model.hpp"
#include "cremid/rng.hpp"

namespace cremid {

/// Which form of the conditionals to use for the spike flags, precisions,
/// varphi and rho updates. `corrected` targets the model posterior exactly;
/// `paper_literal` reproduces the published displays verbatim.
enum class ConditionalForm { corrected, paper_literal };

struct SamplerConfig {
  int n_burnin = 2000;
  int n_draws = 2000;  // retained draws
  int thin = 2;
  std::uint64_t seed = 0;
  std::uint64_t stream_id = 0;
  int swap_moves_per_sweep = 1;
  double alpha_proposal_a = 1.0;  // initial tuning value, adapted in burn-in
  double target_acceptance = 0.44;
  bool save_z = false;
  bool save_group_means = true;
  bool accumulate_calibration = true;
  bool paper_literal = false;
  bool validate_every_sweep = false;
  InitStrategy init = InitStrategy::kmeans_warm;

  ConditionalForm form() const {
    return paper_literal ? ConditionalForm::paper_literal : ConditionalForm::corrected;
  }
};

void check_sampler_config(const SamplerConfig& cfg);

struct SweepDiagnostics {
  AcceptanceCounters counters;
  std::vector<double> log_density;          // one per sweep, burn-in included
  std::vector<int> occupied_shared;         // occupied clusters in 0..K0-1
  std::vector<int> occupied_idiosyncratic;  // occupied clusters in K0..K-1
  double alpha_proposal_a = 0.0;            // tuning value after burn-in
  long validation_failures = 0;
};

// ---------------------------------------------------------------------------
// Single conditional updates, in sweep order.

void update_assignments(ModelState& state, const MultiSampleDataset& data, RngStream& rng);

void update_weights(ModelState& state, const HyperParams& hp, RngStream& rng);

/// Both branches of the spike-and-slab conditional for cluster k, with the
/// group means (and, for the flag, Sigma_k) integrated out.
struct ClusterConditional {
  Matrix inv_scale_spike;  // inverse Wishart scale when S_k = 0
  Matrix inv_scale_slab;   // inverse Wishart scale when S_k = 1
  double dof = 0.0;
  double log_bayes_factor = 0.0;  // log p(y | S=0) - log p(y | S=1)
  double prob_perturbed = 0.0;
};

ClusterConditional cluster_conditional(const ModelState& state, const HyperParams& hp, int k,
                                       ConditionalForm form);

void update_spike_flags(ModelState& state, const HyperParams& hp, RngStream& rng,
                        ConditionalForm form);

void update_precisions(ModelState& state, const HyperParams& hp, RngStream& rng,
                       ConditionalForm form);

struct GaussianConditional {
  Vector mean;
  SpdMatrix cov;
};

GaussianConditional grand_mean_conditional(const ModelState& state, int k);
void update_grand_means(ModelState& state, RngStream& rng);

/// Conditional of mu_{j,k} under the slab branch.
GaussianConditional group_mean_conditional(const ModelState& state, int j, int k);
void update_group_means(ModelState& state, RngStream& rng);

/// log E_{w, rho}[ prod_{j,k} pi_{j,k}^{n_{j,k}} ] for a J x K count matrix.
double log_expected_weight_likelihood(const Eigen::MatrixXi& counts, int K0, double alpha,
                                      const HyperParams& hp);

/// log acceptance ratio (before the min with 0) of swapping clusters a and b,
/// including the proposal correction, which vanishes when K0 == K1.
double swap_log_acceptance(const ModelState& state, const HyperParams& hp, int a, int b);

/// One swap proposal. Returns true on acceptance; no-op when every cluster
/// is empty.
bool swap_move(ModelState& state, const HyperParams& hp, RngStream& rng, MoveCounter& counter);

/// Unnormalized log posterior of alpha given the weight vectors.
double alpha_log_target(const WeightState& weights, double alpha, const HyperParams& hp);
/// log density of the Gamma(alpha^2 a, alpha a) proposal at `to`.
double alpha_log_proposal(double to, double from, double tuning_a);
bool update_alpha(ModelState& state, const HyperParams& hp, double tuning_a, RngStream& rng);

void update_k0(ModelState& state, const HyperParams& hp, RngStream& rng);
void update_psi1(ModelState& state, const HyperParams& hp, RngStream& rng);
void update_m1(ModelState& state, const HyperParams& hp, RngStream& rng);

/// log prod_{k: S_k=1} prod_j N(mu_{j,k} | mu0_k, eps Sigma_k), up to a
/// constant independent of eps.
double epsilon_log_likelihood(const ModelState& state, double eps);
bool update_epsilon(ModelState& state, const HyperParams& hp, RngStream& rng);

void update_varphi(ModelState& state, const HyperParams& hp, RngStream& rng, ConditionalForm form);
void update_rho(ModelState& state, const HyperParams& hp, RngStream& rng, ConditionalForm form);

// ---------------------------------------------------------------------------

struct SweepOptions {
  ConditionalForm form = ConditionalForm::corrected;
  int swap_moves = 1;
  double alpha_proposal_a = 1.0;
};

struct SweepOutcome {
  int swaps_proposed = 0;
  int swaps_accepted = 0;
  bool alpha_accepted = false;
  bool epsilon_accepted = false;
};

/// One full sweep. Failures are rethrown as NumericalError naming the step.
SweepOutcome sweep(ModelState& state, const MultiSampleDataset& data, const HyperParams& hp,
                   const SweepOptions& options, RngStream& rng);

struct ChainResult {
  ChainDraws draws;
  SweepDiagnostics diagnostics;
  ModelState final_state;
};

using SweepCallback = std::function<void(long sweep, const ModelState&, const SweepDiagnostics&)>;

/// Initializes, runs burn-in with alpha-proposal adaptation, then keeps every
/// thin-th state. Deterministic in (cfg.seed, cfg.stream_id).
ChainResult run_chain(const MultiSampleDataset& data, const HyperParams& hp, const SamplerConfig& cfg,
                      const SweepCallback& on_sweep = {});

}  // namespace cremid

#include "cremid/sampler.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "cremid/distributions.hpp"
#include "cremid/errors.hpp"

namespace cremid {

using dist::sample_beta;
using dist::sample_gamma;

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::vector<double> concentrations(const std::vector<int>& counts, double prior) {
  std::vector<double> out;
  out.reserve(counts.size());
  for (int n : counts) out.push_back(n + prior);
  return out;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

void check_sampler_config(const SamplerConfig& cfg) {
  if (cfg.n_burnin < 0 || cfg.n_draws < 0) throw ValidationError("n_burnin and n_draws must be >= 0");
  if (cfg.thin < 1) throw ValidationError("thin must be >= 1");
  if (cfg.swap_moves_per_sweep < 0) throw ValidationError("swap_moves_per_sweep must be >= 0");
  if (!(cfg.alpha_proposal_a > 0.0) || !std::isfinite(cfg.alpha_proposal_a)) {
    throw ValidationError("alpha_proposal_a must be positive");
  }
  if (!(cfg.target_acceptance > 0.1 && cfg.target_acceptance < 0.8)) {
    throw ValidationError("target acceptance must lie in (0.1, 0.8)");
  }
}

// Step 1 ---------------------------------------------------------------------

void update_assignments(ModelState& state, const MultiSampleDataset& data, RngStream& rng) {
  const int K = state.K();
  const int p = data.dim;
  const double log2pi = std::log(2.0 * std::numbers::pi);
  std::vector<Matrix> linv(K);
  for (int k = 0; k < K; ++k) {
    linv[k] = state.kernels.sigma[k].cholesky().triangularView<Eigen::Lower>().solve(Matrix::Identity(p, p));
  }
  std::vector<double> offset(K);
  std::vector<double> lw(K);
  Vector diff(p);
  for (int j = 0; j < data.num_samples(); ++j) {
    for (int k = 0; k < K; ++k) {
      offset[k] = state.weights.log_pi(j, k) - 0.5 * (p * log2pi + state.kernels.sigma[k].log_det());
    }
    const auto& means = state.kernels.mu[j];
    for (int i = 0; i < data.size(j); ++i) {
      const auto y = data.samples[j].row(i).transpose();
      for (int k = 0; k < K; ++k) {
        if (offset[k] == kNegInf) {
          lw[k] = kNegInf;
          continue;
        }
        diff = y - means[k];
        lw[k] = offset[k] - 0.5 * (linv[k].triangularView<Eigen::Lower>() * diff).squaredNorm();
      }
      int k_new;
      try {
        k_new = dist::sample_categorical(lw, rng);
      } catch (const NumericalError&) {
        throw NumericalError("assignment probabilities all zero for observation (" + std::to_string(j) +
                             "," + std::to_string(i) + ")");
      }
      state.assign.reassign(data, j, i, k_new);
    }
  }
}

// Step 2 ---------------------------------------------------------------------

void update_weights(ModelState& state, const HyperParams& hp, RngStream& rng) {
  const int K0 = hp.K0;
  const int K1 = hp.K1;
  const int J = state.num_samples();
  const double alpha = state.globals.alpha;
  std::vector<int> n0(K0);
  for (int k = 0; k < K0; ++k) n0[k] = state.assign.pooled_count(k);
  state.weights.log_w0 = dist::sample_dirichlet_log(concentrations(n0, alpha / K0), rng);
  std::vector<int> nj(K1);
  for (int j = 0; j < J; ++j) {
    for (int k = 0; k < K1; ++k) nj[k] = state.assign.count(j, K0 + k);
    state.weights.log_w[j] = dist::sample_dirichlet_log(concentrations(nj, alpha / K1), rng);
  }
}

// Steps 3 and 4 ----------------------------------------------------------------

ClusterConditional cluster_conditional(const ModelState& state, const HyperParams& hp, int k,
                                       ConditionalForm form) {
  const int J = state.num_samples();
  const int p = hp.dim();
  const GlobalParamState& g = state.globals;
  const Vector& mu0 = state.kernels.mu0[k];
  const double eps = g.epsilon;

  Matrix base = g.psi1.inverse().matrix();
  const ClusterStats pooled = state.assign.pooled(k);
  double dof = hp.nu1 + pooled.count;
  if (form == ConditionalForm::corrected) {
    // mu0_k ~ N(m1, Sigma_k / k0) also carries information about Sigma_k.
    const Vector d = mu0 - g.m1;
    base.noalias() += g.k0 * d * d.transpose();
    dof += 1.0;
  }

  ClusterConditional out;
  out.inv_scale_spike = base;
  out.inv_scale_slab = base;
  double log_eps_terms = 0.0;
  if (pooled.count > 0) {
    const Vector dev = pooled.mean() - mu0;
    out.inv_scale_spike += pooled.scatter() + pooled.count * dev * dev.transpose();
    for (int j = 0; j < J; ++j) {
      const ClusterStats& st = state.assign.stats(j, k);
      if (st.count == 0) continue;
      const double n = st.count;
      const double c = n / (eps * n + 1.0);
      const Vector dj = st.mean() - mu0;
      out.inv_scale_slab += st.scatter() + c * dj * dj.transpose();
      log_eps_terms += std::log1p(eps * n);
    }
  }
  out.dof = dof;
  const double logdet_spike = SpdMatrix(out.inv_scale_spike).log_det();
  const double logdet_slab = SpdMatrix(out.inv_scale_slab).log_det();
  // |Psi^(0)| / |Psi^(1)| = |A_slab| / |A_spike| for inverse scales A.
  out.log_bayes_factor = 0.5 * dof * (logdet_slab - logdet_spike) + 0.5 * p * log_eps_terms;
  const double phi = g.varphi;
  if (phi >= 1.0) {
    out.prob_perturbed = 1.0;
  } else if (phi <= 0.0) {
    out.prob_perturbed = 0.0;
  } else {
    out.prob_perturbed = sigmoid(std::log(phi) - std::log1p(-phi) - out.log_bayes_factor);
  }
  return out;
}

void update_spike_flags(ModelState& state, const HyperParams& hp, RngStream& rng,
                        ConditionalForm form) {
  for (int k = 0; k < state.K(); ++k) {
    const double prob = cluster_conditional(state, hp, k, form).prob_perturbed;
    state.kernels.perturbed[k] = rng.uniform() < prob ? 1 : 0;
  }
}

void update_precisions(ModelState& state, const HyperParams& hp, RngStream& rng,
                       ConditionalForm form) {
  for (int k = 0; k < state.K(); ++k) {
    const ClusterConditional cc = cluster_conditional(state, hp, k, form);
    const Matrix& inv_scale = state.kernels.perturbed[k] ? cc.inv_scale_slab : cc.inv_scale_spike;
    SpdMatrix scale;
    try {
      scale = SpdMatrix(inv_scale).inverse();
    } catch (const NumericalError& e) {
      throw NumericalError("precision update for cluster " + std::to_string(k) + ": " + e.what());
    }
    state.kernels.sigma[k] = dist::sample_wishart(scale, cc.dof, rng).inverse();
  }
}

// Step 5 ---------------------------------------------------------------------

GaussianConditional grand_mean_conditional(const ModelState& state, int k) {
  const GlobalParamState& g = state.globals;
  const double s = state.kernels.perturbed[k] ? 1.0 : 0.0;
  double weight = g.k0;
  Vector acc = g.k0 * g.m1;
  for (int j = 0; j < state.num_samples(); ++j) {
    const ClusterStats& st = state.assign.stats(j, k);
    if (st.count == 0) continue;
    const double c = 1.0 / (g.epsilon * s + 1.0 / st.count);
    weight += c;
    acc += c * st.mean();
  }
  return {acc / weight, state.kernels.sigma[k].scaled(1.0 / weight)};
}

void update_grand_means(ModelState& state, RngStream& rng) {
  for (int k = 0; k < state.K(); ++k) {
    const GaussianConditional c = grand_mean_conditional(state, k);
    state.kernels.mu0[k] = dist::sample_mvn(c.mean, c.cov, rng);
  }
}

// Step 6 ---------------------------------------------------------------------

GaussianConditional group_mean_conditional(const ModelState& state, int j, int k) {
  const double eps = state.globals.epsilon;
  const ClusterStats& st = state.assign.stats(j, k);
  const double precision = st.count + 1.0 / eps;
  Vector mean = (st.sum + state.kernels.mu0[k] / eps) / precision;
  return {std::move(mean), state.kernels.sigma[k].scaled(1.0 / precision)};
}

void update_group_means(ModelState& state, RngStream& rng) {
  for (int k = 0; k < state.K(); ++k) {
    for (int j = 0; j < state.num_samples(); ++j) {
      if (!state.kernels.perturbed[k]) {
        state.kernels.mu[j][k] = state.kernels.mu0[k];
      } else {
        const GaussianConditional c = group_mean_conditional(state, j, k);
        state.kernels.mu[j][k] = dist::sample_mvn(c.mean, c.cov, rng);
      }
    }
  }
}

// Step 7 ---------------------------------------------------------------------

double log_expected_weight_likelihood(const Eigen::MatrixXi& counts, int K0, double alpha,
                                      const HyperParams& hp) {
  const int J = static_cast<int>(counts.rows());
  const int K = static_cast<int>(counts.cols());
  const int K1 = K - K0;
  auto dirichlet_multinomial = [](const auto& n, double conc) {
    const double k = static_cast<double>(n.size());
    double total = 0.0;
    double out = 0.0;
    for (Eigen::Index i = 0; i < n.size(); ++i) {
      total += n(i);
      out += std::lgamma(conc + n(i)) - std::lgamma(conc);
    }
    return out + std::lgamma(conc * k) - std::lgamma(conc * k + total);
  };
  const Eigen::VectorXi shared = counts.leftCols(K0).colwise().sum().transpose();
  const double n_shared = shared.sum();
  const double n_idio = counts.rightCols(K1).sum();
  double out = std::lgamma(hp.a_rho + n_shared) + std::lgamma(hp.b_rho + n_idio) -
               std::lgamma(hp.a_rho + hp.b_rho + n_shared + n_idio) - std::lgamma(hp.a_rho) -
               std::lgamma(hp.b_rho) + std::lgamma(hp.a_rho + hp.b_rho);
  out += dirichlet_multinomial(shared, alpha / K0);
  for (int j = 0; j < J; ++j) {
    const Eigen::VectorXi row = counts.row(j).tail(K1).transpose();
    out += dirichlet_multinomial(row, alpha / K1);
  }
  return out;
}

namespace {

Eigen::MatrixXi count_matrix(const ModelState& state) {
  Eigen::MatrixXi counts(state.num_samples(), state.K());
  for (int j = 0; j < state.num_samples(); ++j)
    for (int k = 0; k < state.K(); ++k) counts(j, k) = state.assign.count(j, k);
  return counts;
}

}  // namespace

double swap_log_acceptance(const ModelState& state, const HyperParams& hp, int a, int b) {
  const int K0 = hp.K0;
  const int K1 = hp.K1;
  Eigen::MatrixXi counts = count_matrix(state);
  const double before = log_expected_weight_likelihood(counts, K0, state.globals.alpha, hp);
  counts.col(a).swap(counts.col(b));
  const double after = log_expected_weight_likelihood(counts, K0, state.globals.alpha, hp);

  // Proposal ratio for the unordered pair {a, b}; identically 1 if K0 == K1.
  const double ra = std::sqrt(static_cast<double>(state.assign.pooled_count(a)));
  const double rb = std::sqrt(static_cast<double>(state.assign.pooled_count(b)));
  const double opp_a = a < K0 ? K1 : K0;
  const double opp_b = b < K0 ? K1 : K0;
  const double forward = ra / opp_a + rb / opp_b;
  const double reverse = rb / opp_a + ra / opp_b;
  double log_q = 0.0;
  if (forward > 0.0 && reverse > 0.0) log_q = std::log(reverse) - std::log(forward);
  return after - before + log_q;
}

bool swap_move(ModelState& state, const HyperParams& hp, RngStream& rng, MoveCounter& counter) {
  const int K = state.K();
  const int K0 = hp.K0;
  std::vector<double> log_w(K);
  bool any = false;
  for (int k = 0; k < K; ++k) {
    const int n = state.assign.pooled_count(k);
    log_w[k] = n > 0 ? 0.5 * std::log(static_cast<double>(n)) : kNegInf;
    any = any || n > 0;
  }
  if (!any) return false;
  const int a = dist::sample_categorical(log_w, rng);
  int b;
  if (a < K0) {
    b = K0 + std::min(hp.K1 - 1, static_cast<int>(rng.uniform() * hp.K1));
  } else {
    b = std::min(K0 - 1, static_cast<int>(rng.uniform() * K0));
  }
  ++counter.proposed;
  const double log_r = swap_log_acceptance(state, hp, a, b);
  if (std::log(rng.uniform()) < log_r) {
    swap_cluster_parameters(state, a, b);
    ++counter.accepted;
    return true;
  }
  return false;
}

// Step 8 ---------------------------------------------------------------------

double alpha_log_target(const WeightState& weights, double alpha, const HyperParams& hp) {
  if (!(alpha > 0.0)) return kNegInf;
  double out = dist::logpdf_gamma(alpha, hp.tau_alpha1, hp.tau_alpha2);
  out += dist::logpdf_symmetric_dirichlet_log(weights.log_w0, alpha / hp.K0);
  for (const Vector& lw : weights.log_w) out += dist::logpdf_symmetric_dirichlet_log(lw, alpha / hp.K1);
  return out;
}

double alpha_log_proposal(double to, double from, double tuning_a) {
  return dist::logpdf_gamma(to, from * from * tuning_a, from * tuning_a);
}

bool update_alpha(ModelState& state, const HyperParams& hp, double tuning_a, RngStream& rng) {
  const double alpha = state.globals.alpha;
  const double proposal = sample_gamma(alpha * alpha * tuning_a, alpha * tuning_a, rng);
  const double log_r = alpha_log_target(state.weights, proposal, hp) -
                       alpha_log_target(state.weights, alpha, hp) +
                       alpha_log_proposal(alpha, proposal, tuning_a) -
                       alpha_log_proposal(proposal, alpha, tuning_a);
  if (std::log(rng.uniform()) < log_r) {
    state.globals.alpha = proposal;
    return true;
  }
  return false;
}

// Steps 9-11 -------------------------------------------------------------------

void update_k0(ModelState& state, const HyperParams& hp, RngStream& rng) {
  const int K = state.K();
  double quad = 0.0;
  for (int k = 0; k < K; ++k) {
    quad += state.kernels.sigma[k].inverse_quad_form(state.kernels.mu0[k] - state.globals.m1);
  }
  state.globals.k0 = sample_gamma(0.5 * (hp.tau1 + hp.dim() * K), 0.5 * (hp.tau2 + quad), rng);
}

void update_psi1(ModelState& state, const HyperParams& hp, RngStream& rng) {
  Matrix acc = hp.Psi2.matrix();
  for (const SpdMatrix& sigma : state.kernels.sigma) acc += sigma.inverse().matrix();
  const SpdMatrix scale = SpdMatrix(acc).inverse();
  const double dof = state.K() * hp.nu1 + hp.nu2;
  state.globals.psi1 = dist::sample_wishart(scale, dof, rng).inverse();
}

void update_m1(ModelState& state, const HyperParams& hp, RngStream& rng) {
  const double k0 = state.globals.k0;
  const SpdMatrix s2_inv = hp.S2.inverse();
  Matrix precision = s2_inv.matrix();
  Vector m = hp.S2.solve(hp.m2);
  for (int k = 0; k < state.K(); ++k) {
    const SpdMatrix& sigma = state.kernels.sigma[k];
    precision += k0 * sigma.inverse().matrix();
    m += k0 * sigma.solve(state.kernels.mu0[k]);
  }
  const SpdMatrix prec(precision);
  state.globals.m1 = dist::sample_mvn(prec.solve(m), prec.inverse(), rng);
}

// Step 12 --------------------------------------------------------------------

double epsilon_log_likelihood(const ModelState& state, double eps) {
  double quad = 0.0;
  double terms = 0.0;
  const int p = static_cast<int>(state.globals.m1.size());
  for (int k = 0; k < state.K(); ++k) {
    if (!state.kernels.perturbed[k]) continue;
    for (int j = 0; j < state.num_samples(); ++j) {
      quad += state.kernels.sigma[k].inverse_quad_form(state.kernels.mu[j][k] - state.kernels.mu0[k]);
      terms += p;
    }
  }
  if (terms == 0.0) return 0.0;
  return -0.5 * (terms * std::log(eps) + quad / eps);
}

bool update_epsilon(ModelState& state, const HyperParams& hp, RngStream& rng) {
  const double proposal = hp.a_eps + (hp.b_eps - hp.a_eps) * rng.uniform();
  const double log_r = epsilon_log_likelihood(state, proposal) - epsilon_log_likelihood(state, state.globals.epsilon);
  if (std::log(rng.uniform()) < log_r) {
    state.globals.epsilon = proposal;
    return true;
  }
  return false;
}

// Steps 13 and 14 --------------------------------------------------------------

void update_varphi(ModelState& state, const HyperParams& hp, RngStream& rng, ConditionalForm form) {
  int s1 = 0;
  for (auto s : state.kernels.perturbed) s1 += s;
  const int s0 = state.K() - s1;
  if (form == ConditionalForm::corrected) {
    state.globals.varphi = sample_beta(hp.a_phi + s1, hp.b_phi + s0, rng);
  } else {
    state.globals.varphi = sample_beta(hp.a_phi + s0, hp.b_phi + s1, rng);
  }
}

void update_rho(ModelState& state, const HyperParams& hp, RngStream& rng, ConditionalForm form) {
  long n_shared = 0;
  long n_total = 0;
  for (int k = 0; k < state.K(); ++k) {
    const int n = state.assign.pooled_count(k);
    n_total += n;
    if (k < hp.K0) n_shared += n;
  }
  const long n_idio = n_total - n_shared;
  if (form == ConditionalForm::corrected) {
    state.weights.rho = sample_beta(hp.a_rho + n_shared, hp.b_rho + n_idio, rng);
  } else {
    state.weights.rho = sample_beta(hp.a_rho + n_shared, hp.b_rho + n_total, rng);
  }
}

// Sweep ----------------------------------------------------------------------

SweepOutcome sweep(ModelState& state, const MultiSampleDataset& data, const HyperParams& hp,
                   const SweepOptions& options, RngStream& rng) {
  SweepOutcome out;
  const char* step = "";
  try {
    step = "assignments";
    update_assignments(state, data, rng);
    // Swaps integrate out (w, rho); the weights are redrawn right after.
    step = "swap";
    for (int s = 0; s < options.swap_moves; ++s) {
      MoveCounter c;
      const bool accepted = swap_move(state, hp, rng, c);
      out.swaps_proposed += static_cast<int>(c.proposed);
      out.swaps_accepted += accepted ? 1 : 0;
    }
    step = "weights";
    update_weights(state, hp, rng);
    step = "spike flags";
    update_spike_flags(state, hp, rng, options.form);
    step = "precisions";
    update_precisions(state, hp, rng, options.form);
    step = "grand means";
    update_grand_means(state, rng);
    step = "group means";
    update_group_means(state, rng);
    step = "alpha";
    out.alpha_accepted = update_alpha(state, hp, options.alpha_proposal_a, rng);
    step = "k0";
    update_k0(state, hp, rng);
    step = "Psi1";
    update_psi1(state, hp, rng);
    step = "m1";
    update_m1(state, hp, rng);
    step = "epsilon";
    out.epsilon_accepted = update_epsilon(state, hp, rng);
    step = "varphi";
    update_varphi(state, hp, rng, options.form);
    step = "rho";
    update_rho(state, hp, rng, options.form);
  } catch (const NumericalError& e) {
    throw NumericalError(std::string("step '") + step + "': " + e.what());
  } catch (const ValidationError& e) {
    throw NumericalError(std::string("step '") + step + "': " + e.what());
  }
  return out;
}

namespace {

ClusterDraw snapshot_clusters(const ModelState& state, const SamplerConfig& cfg) {
  ClusterDraw d;
  d.perturbed = state.kernels.perturbed;
  d.pi = state.weights.pi_matrix();
  d.mu0 = state.kernels.mu0;
  d.sigma = state.kernels.sigma;
  if (cfg.save_group_means) d.mu = state.kernels.mu;
  if (cfg.save_z) d.z = state.assign.labels();
  return d;
}

}  // namespace

ChainResult run_chain(const MultiSampleDataset& data, const HyperParams& hp, const SamplerConfig& cfg,
                      const SweepCallback& on_sweep) {
  check_dataset(data);
  check_hyperparams(hp);
  check_sampler_config(cfg);
  if (hp.dim() != data.dim) throw ValidationError("hyperparameter dimension does not match data");

  RngStream rng(cfg.seed, cfg.stream_id);
  ChainResult result;
  ModelState state = init_state(data, hp, rng, cfg.init);

  ChainDraws& draws = result.draws;
  draws.info.seed = cfg.seed;
  draws.info.stream_id = cfg.stream_id;
  draws.info.data_hash = dataset_hash(data);
  draws.info.paper_literal = cfg.paper_literal;
  draws.info.J = data.num_samples();
  draws.info.p = data.dim;
  draws.info.K0 = hp.K0;
  draws.info.K1 = hp.K1;
  draws.info.labels = data.labels;
  for (int j = 0; j < data.num_samples(); ++j) draws.info.sample_sizes.push_back(data.size(j));
  if (cfg.accumulate_calibration) draws.calibration = CalibrationAccumulator{};

  SweepDiagnostics& diag = result.diagnostics;
  SweepOptions options;
  options.form = cfg.form();
  options.swap_moves = cfg.swap_moves_per_sweep;
  double log_a = std::log(cfg.alpha_proposal_a);

  const long total = cfg.n_burnin + static_cast<long>(cfg.n_draws) * cfg.thin;
  for (long t = 0; t < total; ++t) {
    options.alpha_proposal_a = std::exp(log_a);
    const SweepOutcome o = sweep(state, data, hp, options, rng);
    diag.counters.swap.proposed += o.swaps_proposed;
    diag.counters.swap.accepted += o.swaps_accepted;
    ++diag.counters.alpha.proposed;
    diag.counters.alpha.accepted += o.alpha_accepted ? 1 : 0;
    ++diag.counters.epsilon.proposed;
    diag.counters.epsilon.accepted += o.epsilon_accepted ? 1 : 0;

    if (t < cfg.n_burnin) {
      // Robbins-Monro on log a; a larger a means a narrower proposal.
      const double gain = 1.0 / std::pow(t + 1.0, 0.6);
      log_a -= 2.0 * gain * ((o.alpha_accepted ? 1.0 : 0.0) - cfg.target_acceptance);
      log_a = std::clamp(log_a, -20.0, 20.0);
    }

    const double lp = joint_log_density(state, data, hp);
    diag.log_density.push_back(lp);
    int occ0 = 0, occ1 = 0;
    for (int k = 0; k < state.K(); ++k) {
      if (state.assign.pooled_count(k) == 0) continue;
      (k < hp.K0 ? occ0 : occ1) += 1;
    }
    diag.occupied_shared.push_back(occ0);
    diag.occupied_idiosyncratic.push_back(occ1);
    if (cfg.validate_every_sweep && !validate(state, data, hp).empty()) ++diag.validation_failures;

    const long kept = t - cfg.n_burnin + 1;
    if (t >= cfg.n_burnin && kept % cfg.thin == 0) {
      ScalarDraw s;
      s.sweep = t;
      s.rho = state.weights.rho;
      s.epsilon = state.globals.epsilon;
      s.alpha = state.globals.alpha;
      s.varphi = state.globals.varphi;
      s.k0 = state.globals.k0;
      s.log_density = lp;
      s.counters = diag.counters;
      draws.scalars.push_back(s);
      draws.clusters.push_back(snapshot_clusters(state, cfg));
      if (draws.calibration) draws.calibration->add(state);
    }
    if (on_sweep) on_sweep(t, state, diag);
  }
  diag.alpha_proposal_a = std::exp(log_a);
  result.final_state = std::move(state);
  return result;
}

}  // namespace cremid

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace cremid {

/// Outcome of one statistical check against an independent oracle.
struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Conditional redraws at a frozen p = 1 state compared with analytic or
/// grid-posterior moments (weights, precision, grand and group means, k0,
/// Psi1, m1, varphi, rho). Each comparison uses a 3 standard error band.
std::vector<CheckResult> conjugate_oracle_checks(std::uint64_t seed, int redraws = 100000);

/// Spike-flag inclusion probability against nested quadrature over the
/// group means and the precision (p = 1, J = 2, three points per group).
CheckResult bayes_factor_check(std::uint64_t seed, int redraws = 20000);

/// Closed-form swap acceptance ratio against Monte Carlo expectations over
/// prior draws of (rho, w0, w) with K0 = K1 = 2.
CheckResult swap_ratio_check(std::uint64_t seed, long prior_draws = 1000000);

/// Successive-conditional joint-distribution test: prior moments of rho,
/// varphi, epsilon, alpha and k0 recovered within 4 batch-means standard
/// errors (p = 1, J = 2, K0 = K1 = 2, five observations per sample).
/// With `paper_literal` the published conditionals are used instead.
std::vector<CheckResult> geweke_checks(std::uint64_t seed, long sweeps = 20000, bool paper_literal = false);

}  // namespace cremid

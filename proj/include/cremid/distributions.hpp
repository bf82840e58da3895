#pragma once

#include <span>

#include "cremid/linalg.hpp"
#include "cremid/rng.hpp"

namespace cremid::dist {

// Samplers. All reject non-finite or out-of-support parameters with
// ValidationError.

/// Gamma(shape, rate) by Marsaglia-Tsang; shape < 1 uses the
/// U^{1/shape} boost.
double sample_gamma(double shape, double rate, RngStream& rng);

/// log of a Gamma(shape, 1) draw. Stays finite for shapes small enough that
/// the draw itself underflows.
double sample_log_gamma(double shape, RngStream& rng);

double sample_beta(double a, double b, RngStream& rng);
double sample_chi_squared(double dof, RngStream& rng);

/// Dirichlet draw returned as log-probabilities (exactly normalized in log
/// space).
Vector sample_dirichlet_log(std::span<const double> alpha, RngStream& rng);
Vector sample_dirichlet(std::span<const double> alpha, RngStream& rng);

/// Gumbel-max draw from unnormalized log weights. Entries may be -inf;
/// +inf or NaN is rejected, and all -inf raises NumericalError.
int sample_categorical(std::span<const double> log_weights, RngStream& rng);

Vector sample_mvn(const Vector& mean, const SpdMatrix& cov, RngStream& rng);

/// Wishart(scale, dof) through the Bartlett decomposition; E[W] = dof*scale.
SpdMatrix sample_wishart(const SpdMatrix& scale, double dof, RngStream& rng);

// Log densities.

double logpdf_mvn(const Vector& x, const Vector& mean, const SpdMatrix& cov);
double logpdf_normal(double x, double mean, double sd);
double logpdf_gamma(double x, double shape, double rate);
double logpdf_beta(double x, double a, double b);
/// Dirichlet density evaluated from log-probabilities.
double logpdf_dirichlet_log(const Vector& log_p, std::span<const double> alpha);
/// Symmetric Dirichlet with every concentration equal to `conc`.
double logpdf_symmetric_dirichlet_log(const Vector& log_p, double conc);
double logpdf_wishart(const SpdMatrix& w, const SpdMatrix& scale, double dof);

double log_multivariate_gamma(int dim, double a);
double log_sum_exp(std::span<const double> values);

}  // namespace cremid::dist

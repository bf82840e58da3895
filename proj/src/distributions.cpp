#include "cremid/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "cremid/errors.hpp"

namespace cremid::dist {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void require(bool ok, const char* what) {
  if (!ok) throw ValidationError(what);
}

bool positive_finite(double x) { return x > 0.0 && std::isfinite(x); }

// Marsaglia-Tsang for shape >= 1, unit rate.
double gamma_mt(double shape, RngStream& rng) {
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = rng.normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = rng.uniform();
    if (u < 1.0 - 0.0331 * (x * x) * (x * x)) return d * v;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

}  // namespace

double sample_log_gamma(double shape, RngStream& rng) {
  require(positive_finite(shape), "gamma shape must be positive and finite");
  if (shape >= 1.0) return std::log(gamma_mt(shape, rng));
  const double boosted = std::log(gamma_mt(shape + 1.0, rng));
  return boosted + std::log(rng.uniform()) / shape;
}

double sample_gamma(double shape, double rate, RngStream& rng) {
  require(positive_finite(rate), "gamma rate must be positive and finite");
  const double x = std::exp(sample_log_gamma(shape, rng)) / rate;
  return std::max(x, std::numeric_limits<double>::min());
}

double sample_chi_squared(double dof, RngStream& rng) {
  require(positive_finite(dof), "chi-squared dof must be positive");
  return 2.0 * sample_gamma(0.5 * dof, 1.0, rng);
}

double sample_beta(double a, double b, RngStream& rng) {
  require(positive_finite(a) && positive_finite(b), "beta parameters must be positive");
  const double la = sample_log_gamma(a, rng);
  const double lb = sample_log_gamma(b, rng);
  const double m = std::max(la, lb);
  const double x = std::exp(la - (m + std::log(std::exp(la - m) + std::exp(lb - m))));
  // Keep the draw strictly inside (0, 1).
  return std::clamp(x, std::numeric_limits<double>::min(), std::nextafter(1.0, 0.0));
}

Vector sample_dirichlet_log(std::span<const double> alpha, RngStream& rng) {
  require(!alpha.empty(), "dirichlet needs at least one concentration");
  Vector lg(static_cast<Eigen::Index>(alpha.size()));
  for (std::size_t k = 0; k < alpha.size(); ++k) {
    require(positive_finite(alpha[k]), "dirichlet concentrations must be positive and finite");
    lg(static_cast<Eigen::Index>(k)) = sample_log_gamma(alpha[k], rng);
  }
  const double lse = log_sum_exp(std::span<const double>(lg.data(), static_cast<std::size_t>(lg.size())));
  return lg.array() - lse;
}

Vector sample_dirichlet(std::span<const double> alpha, RngStream& rng) {
  Vector p = sample_dirichlet_log(alpha, rng).array().exp();
  return p / p.sum();
}

int sample_categorical(std::span<const double> log_weights, RngStream& rng) {
  require(!log_weights.empty(), "categorical needs at least one weight");
  int best = -1;
  double best_score = kNegInf;
  for (std::size_t k = 0; k < log_weights.size(); ++k) {
    const double lw = log_weights[k];
    if (std::isnan(lw) || lw == std::numeric_limits<double>::infinity()) {
      throw ValidationError("categorical log weight is NaN or +inf");
    }
    // Draw the Gumbel variate even for -inf entries so the number of
    // uniforms consumed is independent of the weights.
    const double g = -std::log(-std::log(rng.uniform()));
    if (lw == kNegInf) continue;
    const double score = lw + g;
    if (best < 0 || score > best_score) {
      best = static_cast<int>(k);
      best_score = score;
    }
  }
  if (best < 0) throw NumericalError("all categorical log weights are -inf");
  return best;
}

Vector sample_mvn(const Vector& mean, const SpdMatrix& cov, RngStream& rng) {
  if (mean.size() != cov.dim()) throw ValidationError("mvn dimension mismatch");
  require(mean.allFinite(), "mvn mean must be finite");
  Vector z(mean.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = rng.normal();
  return mean + cov.cholesky().triangularView<Eigen::Lower>() * z;
}

SpdMatrix sample_wishart(const SpdMatrix& scale, double dof, RngStream& rng) {
  const int p = scale.dim();
  if (!(dof > p - 1) || !std::isfinite(dof)) {
    throw ValidationError("wishart dof must exceed dim - 1");
  }
  Matrix a = Matrix::Zero(p, p);
  for (int i = 0; i < p; ++i) {
    a(i, i) = std::sqrt(sample_chi_squared(dof - i, rng));
    for (int j = 0; j < i; ++j) a(i, j) = rng.normal();
  }
  Matrix factor = scale.cholesky().triangularView<Eigen::Lower>() * a;
  return SpdMatrix::from_cholesky(factor);
}

double logpdf_mvn(const Vector& x, const Vector& mean, const SpdMatrix& cov) {
  if (x.size() != mean.size() || x.size() != cov.dim()) {
    throw ValidationError("mvn dimension mismatch");
  }
  const double p = static_cast<double>(x.size());
  const double quad = cov.inverse_quad_form(x - mean);
  return -0.5 * (p * std::log(2.0 * std::numbers::pi) + cov.log_det() + quad);
}

double logpdf_normal(double x, double mean, double sd) {
  const double z = (x - mean) / sd;
  return -0.5 * z * z - std::log(sd) - 0.5 * std::log(2.0 * std::numbers::pi);
}

double logpdf_gamma(double x, double shape, double rate) {
  if (!(x > 0.0)) return kNegInf;
  return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(x) - rate * x;
}

double logpdf_beta(double x, double a, double b) {
  if (!(x > 0.0 && x < 1.0)) return kNegInf;
  return std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + (a - 1.0) * std::log(x) +
         (b - 1.0) * std::log1p(-x);
}

double logpdf_dirichlet_log(const Vector& log_p, std::span<const double> alpha) {
  if (static_cast<std::size_t>(log_p.size()) != alpha.size()) {
    throw ValidationError("dirichlet dimension mismatch");
  }
  double total = 0.0;
  double out = 0.0;
  for (std::size_t k = 0; k < alpha.size(); ++k) {
    total += alpha[k];
    out += (alpha[k] - 1.0) * log_p(static_cast<Eigen::Index>(k)) - std::lgamma(alpha[k]);
  }
  return out + std::lgamma(total);
}

double logpdf_symmetric_dirichlet_log(const Vector& log_p, double conc) {
  const double k = static_cast<double>(log_p.size());
  return std::lgamma(conc * k) - k * std::lgamma(conc) + (conc - 1.0) * log_p.sum();
}

double logpdf_wishart(const SpdMatrix& w, const SpdMatrix& scale, double dof) {
  const int p = w.dim();
  if (scale.dim() != p) throw ValidationError("wishart dimension mismatch");
  // tr(V^{-1} W) = || L_V^{-1} L_W ||_F^2
  Matrix m = scale.cholesky().triangularView<Eigen::Lower>().solve(w.cholesky());
  const double trace = m.squaredNorm();
  return 0.5 * (dof - p - 1.0) * w.log_det() - 0.5 * trace -
         0.5 * dof * p * std::numbers::ln2 - 0.5 * dof * scale.log_det() -
         log_multivariate_gamma(p, 0.5 * dof);
}

double log_multivariate_gamma(int dim, double a) {
  double out = 0.25 * dim * (dim - 1) * std::log(std::numbers::pi);
  for (int j = 0; j < dim; ++j) out += std::lgamma(a - 0.5 * j);
  return out;
}

double log_sum_exp(std::span<const double> values) {
  double m = kNegInf;
  for (double v : values) m = std::max(m, v);
  if (m == kNegInf) return kNegInf;
  double s = 0.0;
  for (double v : values) s += std::exp(v - m);
  return m + std::log(s);
}

}  // namespace cremid::dist

#include "cremid/scenario.hpp"

#include <cmath>
#include <numbers>

#include "cremid/distributions.hpp"
#include "cremid/errors.hpp"
#include "cremid/rng.hpp"

namespace cremid {
namespace {

constexpr std::uint64_t kParameterStream = 0x5CE0;
constexpr std::uint64_t kDataStream = 0xDA7A;

SpdMatrix compound_symmetric(int p, double diag, double off) {
  Matrix m = Matrix::Constant(p, p, off);
  m.diagonal().setConstant(diag);
  return SpdMatrix(m);
}

SpdMatrix scaled_identity(int p, double v) { return SpdMatrix(Matrix(v * Matrix::Identity(p, p))); }

std::vector<SpdMatrix> shift_covariances() {
  return {compound_symmetric(4, 1.1, 0.9), compound_symmetric(4, 2.0, 1.0),
          compound_symmetric(4, 0.4, -0.1), compound_symmetric(4, 0.1, 0.0)};
}

std::vector<Vector> uniform_means(int count, int p, RngStream& rng) {
  std::vector<Vector> out;
  for (int c = 0; c < count; ++c) {
    Vector m(p);
    for (int d = 0; d < p; ++d) m(d) = 10.0 * rng.uniform();
    out.push_back(m);
  }
  return out;
}

Vector vec4(double a, double b, double c, double d) {
  Vector v(4);
  v << a, b, c, d;
  return v;
}

}  // namespace

ScenarioKind parse_scenario_kind(const std::string& name) {
  if (name == "local_shift") return ScenarioKind::local_shift;
  if (name == "global_shift") return ScenarioKind::global_shift;
  if (name == "local_weight") return ScenarioKind::local_weight;
  if (name == "global_weight") return ScenarioKind::global_weight;
  if (name == "calibration_demo") return ScenarioKind::calibration_demo;
  throw ValidationError("unknown scenario kind '" + name + "'");
}

std::string to_string(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::local_shift: return "local_shift";
    case ScenarioKind::global_shift: return "global_shift";
    case ScenarioKind::local_weight: return "local_weight";
    case ScenarioKind::global_weight: return "global_weight";
    case ScenarioKind::calibration_demo: return "calibration_demo";
  }
  return "unknown";
}

double ScenarioSpec::analytic_marginal(int j, int d, double x) const {
  double out = 0.0;
  for (int c = 0; c < num_components(); ++c) {
    const double w = weights[j][c];
    if (w == 0.0) continue;
    const double sd = std::sqrt(covariances[c](d, d));
    out += w * std::exp(dist::logpdf_normal(x, means[j][c](d), sd));
  }
  return out;
}

ScenarioSpec make_scenario(ScenarioKind kind, std::uint64_t seed) {
  ScenarioSpec s;
  s.kind = kind;
  s.seed = seed;
  s.J = 3;
  s.p = 4;
  s.n_per_sample = 100;
  RngStream rng(seed, kParameterStream);
  const int J = s.J;

  switch (kind) {
    case ScenarioKind::local_shift:
    case ScenarioKind::global_shift: {
      s.covariances = shift_covariances();
      s.base_means = uniform_means(4, 4, rng);
      for (int j = 1; j <= J; ++j) {
        s.weights.push_back({0.3, 0.3, 0.2, 0.2});
        std::vector<Vector> m = s.base_means;
        Vector shift = Vector::Zero(4);
        if (kind == ScenarioKind::local_shift) {
          shift(0) = j / 2.0;
          m[0] += shift;
        } else {
          shift.setConstant(j / 10.0);
          for (Vector& v : m) v += shift;
        }
        s.shifts.push_back(shift);
        s.means.push_back(std::move(m));
      }
      break;
    }
    case ScenarioKind::local_weight: {
      s.covariances = shift_covariances();
      s.base_means = uniform_means(4, 4, rng);
      for (int j = 1; j <= J; ++j) {
        const double moved = 0.04 * (j - 1);
        s.weights.push_back({0.09 - moved, 0.01 + moved, 0.8, 0.1});
        s.shifts.push_back(Vector::Zero(4));
        s.means.push_back(s.base_means);
      }
      break;
    }
    case ScenarioKind::global_weight: {
      s.covariances = {scaled_identity(4, 1.0), scaled_identity(4, 2.0), scaled_identity(4, 0.2)};
      for (int c = 3; c < 8; ++c) s.covariances.push_back(scaled_identity(4, 0.1));
      s.base_means = uniform_means(8, 4, rng);
      // m_j ~ N(0, 0.5 I_8), pi_j = softmax(m_j).
      const double sd = std::sqrt(0.5);
      for (int j = 0; j < J; ++j) {
        std::vector<double> logits(8);
        for (double& l : logits) l = sd * rng.normal();
        const double lse = dist::log_sum_exp(logits);
        std::vector<double> w;
        for (double l : logits) w.push_back(std::exp(l - lse));
        s.weights.push_back(std::move(w));
        s.shifts.push_back(Vector::Zero(4));
        s.means.push_back(s.base_means);
      }
      break;
    }
    case ScenarioKind::calibration_demo: {
      s.n_per_sample = 1000;
      s.covariances = {scaled_identity(4, 1.0), scaled_identity(4, 2.0), scaled_identity(4, 0.2),
                       scaled_identity(4, 0.1)};
      s.weights = {{0.16, 0.80, 0.02, 0.02}, {0.09, 0.80, 0.09, 0.02}, {0.02, 0.80, 0.16, 0.02}};
      // Base means are the sample-independent centroids of the shifted
      // components (the j = 2 location).
      s.base_means = {vec4(1, 8, 1, 9), vec4(8, 8, 8, 8), vec4(1, 1, 1, 1), vec4(8, 2, 7, 1)};
      for (int j = 1; j <= J; ++j) {
        s.means.push_back({vec4(1, 10 - j, 1, 9), vec4(8, 8, 8, 8), vec4(1, 1, 1, 1), vec4(6 + j, j, 7, 1)});
        s.shifts.push_back(Vector::Zero(4));
      }
      break;
    }
  }

  for (const auto& w : s.weights) {
    double total = 0.0;
    for (double x : w) {
      if (x < 0.0) throw ValidationError("scenario produced a negative weight");
      total += x;
    }
    if (std::abs(total - 1.0) > 1e-12) throw ValidationError("scenario weights do not sum to one");
  }
  return s;
}

GeneratedData generate(const ScenarioSpec& spec, int n_per_sample) {
  if (n_per_sample < 0) throw ValidationError("sample size must be >= 0");
  RngStream rng(spec.seed, kDataStream);
  GeneratedData out;
  out.data.dim = spec.p;
  for (int j = 0; j < spec.J; ++j) {
    out.data.labels.push_back("sample_" + std::to_string(j + 1));
    Matrix sample(n_per_sample, spec.p);
    std::vector<int> comps;
    std::vector<double> logw;
    for (double w : spec.weights[j]) logw.push_back(w > 0.0 ? std::log(w) : -INFINITY);
    for (int i = 0; i < n_per_sample; ++i) {
      const int c = dist::sample_categorical(logw, rng);
      comps.push_back(c);
      sample.row(i) = dist::sample_mvn(spec.means[j][c], spec.covariances[c], rng).transpose();
    }
    out.data.samples.push_back(std::move(sample));
    out.components.push_back(std::move(comps));
  }
  return out;
}

GeneratedData generate(const ScenarioSpec& spec) { return generate(spec, spec.n_per_sample); }

}  // namespace cremid

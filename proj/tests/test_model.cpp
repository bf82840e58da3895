#include <doctest.h>

#include <cmath>
#include <numbers>

#include "cremid/errors.hpp"
#include "cremid/model.hpp"
#include "cremid/rng.hpp"
#include "cremid/scenario.hpp"
#include "support.hpp"

using namespace cremid;
using testing::hand_state;
using testing::scalar;
using testing::scalar_data;

namespace {

bool has_violation(const std::vector<Violation>& v, const std::string& fragment) {
  for (const Violation& x : v)
    if (x.invariant.find(fragment) != std::string::npos) return true;
  return false;
}

double ln_normal(double x, double mean, double var) {
  return -0.5 * std::log(2.0 * std::numbers::pi * var) - 0.5 * (x - mean) * (x - mean) / var;
}

double ln_gamma_rate(double x, double shape, double rate) {
  return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(x) - rate * x;
}

double ln_beta(double x, double a, double b) {
  return std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + (a - 1.0) * std::log(x) +
         (b - 1.0) * std::log1p(-x);
}

}  // namespace

TEST_CASE("validate reports constructed violations") {
  const auto data = scalar_data({{0.1, 0.5, -0.3}, {1.0, 2.0}});
  const HyperParams hp = testing::simple_hp(2, 2);
  ModelState s = hand_state(data, hp, {{0, 1, 2}, {3, 0}});
  CHECK(validate(s, data, hp).empty());

  SUBCASE("w0 off the simplex") {
    s.weights.log_w0.array() += std::log(1.01);
    CHECK(has_violation(validate(s, data, hp), "w0 is not on the simplex"));
  }
  SUBCASE("spike cluster with a displaced group mean") {
    s.kernels.mu[0][1] = Vector::Constant(1, 0.25);
    const auto v = validate(s, data, hp);
    REQUIRE(v.size() == 1);
    CHECK(has_violation(v, "spike"));
    CHECK(v.front().location.find('1') != std::string::npos);
  }
  SUBCASE("the same displacement is fine on the slab") {
    s.kernels.perturbed[1] = 1;
    s.kernels.mu[0][1] = Vector::Constant(1, 0.25);
    CHECK(validate(s, data, hp).empty());
  }
  SUBCASE("epsilon outside its support") {
    s.globals.epsilon = 1.0;
    CHECK(has_violation(validate(s, data, hp), "epsilon"));
  }
  SUBCASE("rho outside its support") {
    s.weights.rho = 0.0;
    CHECK(has_violation(validate(s, data, hp), "rho"));
  }
}

TEST_CASE("joint log density matches a hand computation") {
  const auto data = scalar_data({{0.7}});
  HyperParams hp = testing::simple_hp(1, 1);
  hp.a_rho = 2.0;
  hp.b_rho = 3.0;
  hp.tau_alpha1 = 2.0;
  hp.tau_alpha2 = 1.5;
  hp.nu1 = 4.0;
  hp.Psi2 = scalar(2.5);
  hp.nu2 = 3.0;
  hp.m2 = Vector::Constant(1, 0.2);
  hp.S2 = scalar(1.5);
  hp.tau1 = 3.0;
  hp.tau2 = 1.0;
  hp.a_eps = 0.1;
  hp.b_eps = 0.9;
  hp.a_phi = 2.0;
  hp.b_phi = 1.5;

  ModelState s = hand_state(data, hp, {{0}});
  s.weights.rho = 0.3;
  s.kernels.sigma = {scalar(2.0), scalar(0.5)};
  s.kernels.mu0 = {Vector::Constant(1, 0.4), Vector::Constant(1, -0.2)};
  s.kernels.perturbed = {1, 0};
  s.kernels.mu[0] = {Vector::Constant(1, 0.5), Vector::Constant(1, -0.2)};
  s.globals.alpha = 1.5;
  s.globals.k0 = 2.0;
  s.globals.m1 = Vector::Constant(1, 0.1);
  s.globals.psi1 = scalar(0.8);
  s.globals.epsilon = 0.3;
  s.globals.varphi = 0.6;
  REQUIRE(validate(s, data, hp).empty());

  double expected = ln_normal(0.7, 0.5, 2.0);  // y in the perturbed cluster of sample 1
  expected += std::log(0.3);                   // pi = rho * w0 = 0.3
  expected += ln_beta(0.3, 2.0, 3.0);
  // Sigma_k^{-1} ~ Wishart(Psi1, nu1) is Gamma(nu1/2, rate 1/(2 Psi1)) in one dimension.
  expected += ln_gamma_rate(1.0 / 2.0, 2.0, 1.0 / 1.6) + ln_gamma_rate(1.0 / 0.5, 2.0, 1.0 / 1.6);
  expected += ln_normal(0.4, 0.1, 2.0 / 2.0) + ln_normal(-0.2, 0.1, 0.5 / 2.0);
  expected += std::log(0.6) + ln_normal(0.5, 0.4, 0.3 * 2.0);
  expected += std::log(0.4);
  expected += ln_gamma_rate(1.5, 2.0, 1.5);
  expected += -std::log(0.8);
  expected += ln_normal(0.1, 0.2, 1.5);
  // Psi1^{-1} ~ Wishart(Psi2^{-1}, nu2) is Gamma(nu2/2, rate Psi2/2).
  expected += ln_gamma_rate(1.0 / 0.8, 1.5, 1.25);
  expected += ln_gamma_rate(2.0, 1.5, 0.5);
  expected += ln_beta(0.6, 2.0, 1.5);

  CHECK(std::abs(joint_log_density(s, data, hp) - expected) < 1e-10);
}

TEST_CASE("log likelihood is additive over duplicated observations") {
  const auto data = scalar_data({{0.3, -1.2, 2.2}, {0.8}});
  const auto twice = scalar_data({{0.3, -1.2, 2.2, 0.3, -1.2, 2.2}, {0.8, 0.8}});
  const HyperParams hp = testing::simple_hp(2, 1);
  ModelState a = hand_state(data, hp, {{0, 1, 2}, {1}});
  ModelState b = hand_state(twice, hp, {{0, 1, 2, 0, 1, 2}, {1, 1}});
  a.kernels.sigma[1] = scalar(3.0);
  b.kernels.sigma[1] = scalar(3.0);
  const double single = log_likelihood(a, data);
  CHECK(std::abs(log_likelihood(b, twice) - 2.0 * single) < 1e-12 * std::abs(single));
}

TEST_CASE("identical clusters with equal weights are exchangeable") {
  const auto data = scalar_data({{0.3, -1.2, 2.2}, {0.8, 0.1}});
  const HyperParams hp = testing::simple_hp(2, 1);
  ModelState s = hand_state(data, hp, {{0, 0, 2}, {1, 0}});
  const double before = joint_log_density(s, data, hp);
  s.assign.reassign(data, 0, 1, 1);
  CHECK(std::abs(joint_log_density(s, data, hp) - before) < 1e-12);
}

TEST_CASE("relabelling shared clusters together with their weights leaves the density unchanged") {
  const auto data = scalar_data({{0.3, -1.2, 2.2}, {0.8, 0.1}});
  const HyperParams hp = testing::simple_hp(2, 2);
  ModelState s = hand_state(data, hp, {{0, 1, 2}, {3, 0}});
  s.kernels.mu0[0] = Vector::Constant(1, 0.5);
  s.kernels.mu[0][0] = s.kernels.mu[1][0] = s.kernels.mu0[0];
  s.kernels.sigma[1] = scalar(2.0);
  s.weights.log_w0 << std::log(0.3), std::log(0.7);
  const double before = joint_log_density(s, data, hp);
  swap_cluster_parameters(s, 0, 1);
  std::swap(s.weights.log_w0(0), s.weights.log_w0(1));
  CHECK(validate(s, data, hp).empty());
  CHECK(std::abs(joint_log_density(s, data, hp) - before) < 1e-10);
}

TEST_CASE("incremental sufficient statistics agree with a rebuild") {
  const GeneratedData gen = generate(make_scenario(ScenarioKind::local_shift, 5), 50);
  const HyperParams hp = default_hyperparams(gen.data, 3, 3);
  RngStream rng(5, 0);
  ModelState s = init_state(gen.data, hp, rng, InitStrategy::prior);
  for (int t = 0; t < 5000; ++t) {
    const int j = static_cast<int>(rng.uniform() * gen.data.num_samples());
    const int i = static_cast<int>(rng.uniform() * gen.data.size(j));
    s.assign.reassign(gen.data, j, i, static_cast<int>(rng.uniform() * hp.K()));
  }
  AssignmentState fresh = s.assign;
  fresh.rebuild(gen.data);
  for (int j = 0; j < gen.data.num_samples(); ++j)
    for (int k = 0; k < hp.K(); ++k) {
      CHECK(s.assign.count(j, k) == fresh.count(j, k));
      CHECK((s.assign.stats(j, k).sum - fresh.stats(j, k).sum).cwiseAbs().maxCoeff() < 1e-8);
      CHECK((s.assign.stats(j, k).outer - fresh.stats(j, k).outer).cwiseAbs().maxCoeff() < 1e-8);
    }
  CHECK(validate(s, gen.data, hp).empty());
}

TEST_CASE("initialization") {
  SUBCASE("prior draws respect every invariant") {
    for (ScenarioKind kind : {ScenarioKind::local_shift, ScenarioKind::global_weight}) {
      const auto data = generate(make_scenario(kind, 3), 40).data;
      const HyperParams hp = default_hyperparams(data);
      RngStream rng(3, 0);
      CHECK(validate(init_state(data, hp, rng, InitStrategy::prior), data, hp).empty());
    }
  }
  SUBCASE("warm start puts every cluster on the spike") {
    const auto data = generate(make_scenario(ScenarioKind::calibration_demo, 1)).data;
    const HyperParams hp = default_hyperparams(data);
    RngStream rng(1, 0);
    const ModelState s = init_state(data, hp, rng, InitStrategy::kmeans_warm);
    CHECK(validate(s, data, hp).empty());
    for (auto flag : s.kernels.perturbed) CHECK(flag == 0);
  }
  SUBCASE("prior initialization is deterministic") {
    const auto data = generate(make_scenario(ScenarioKind::local_weight, 2), 30).data;
    const HyperParams hp = default_hyperparams(data);
    RngStream r1(9, 0), r2(9, 0);
    const ModelState a = init_state(data, hp, r1, InitStrategy::prior);
    const ModelState b = init_state(data, hp, r2, InitStrategy::prior);
    CHECK(a.assign.labels() == b.assign.labels());
    CHECK(a.weights.log_w0 == b.weights.log_w0);
    CHECK(joint_log_density(a, data, hp) == joint_log_density(b, data, hp));
  }
  SUBCASE("strategy names") {
    CHECK(parse_init_strategy("prior") == InitStrategy::prior);
    CHECK(parse_init_strategy(to_string(InitStrategy::kmeans_warm)) == InitStrategy::kmeans_warm);
    CHECK_THROWS_AS(parse_init_strategy("random"), ValidationError);
  }
}

TEST_CASE("dataset and hyperparameter checks") {
  MultiSampleDataset bad = scalar_data({{1.0, std::nan("")}});
  CHECK_THROWS_AS(check_dataset(bad), ValidationError);
  CHECK_THROWS_AS(check_dataset(MultiSampleDataset{}), ValidationError);
  HyperParams hp = testing::simple_hp(2, 2);
  CHECK_NOTHROW(check_hyperparams(hp));
  hp.nu1 = 0.0;
  CHECK_THROWS_AS(check_hyperparams(hp), ValidationError);
}

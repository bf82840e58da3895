#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "cremid/distributions.hpp"
#include "cremid/errors.hpp"
#include "cremid/linalg.hpp"
#include "cremid/rng.hpp"
#include "support.hpp"

using namespace cremid;
using namespace cremid::dist;

TEST_CASE("rng streams are reproducible and distinct") {
  RngStream a(42, 0), b(42, 0), c(42, 1);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    CHECK(x == b.next_u64());
    differs = differs || x != c.next_u64();
  }
  CHECK(differs);
  RngStream d(42, 0);
  RngStream copy = d;
  CHECK(copy.uniform() == d.uniform());
  for (int i = 0; i < 1000; ++i) {
    const double u = d.uniform();
    CHECK(u > 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("dirichlet draws") {
  RngStream rng(1, 0);
  SUBCASE("concentration limit") {
    const std::vector<double> big{1e9, 1e9};
    const Vector x = sample_dirichlet(big, rng);
    CHECK(std::abs(x(0) - 0.5) < 1e-3);
    CHECK(std::abs(x(1) - 0.5) < 1e-3);
  }
  SUBCASE("mean of flat dirichlet") {
    const std::vector<double> flat{1.0, 1.0, 1.0};
    Vector acc = Vector::Zero(3);
    const int n = 100000;
    for (int i = 0; i < n; ++i) acc += sample_dirichlet(flat, rng);
    for (int k = 0; k < 3; ++k) CHECK(std::abs(acc(k) / n - 1.0 / 3.0) < 0.01);
  }
  SUBCASE("degenerate simplex") {
    const std::vector<double> one{2.0};
    for (int i = 0; i < 10; ++i) CHECK(sample_dirichlet(one, rng)(0) == 1.0);
  }
  SUBCASE("tiny concentrations stay normalized in log space") {
    const std::vector<double> tiny(20, 1e-4);
    const Vector lp = sample_dirichlet_log(tiny, rng);
    CHECK(lp.allFinite());
    CHECK(std::abs(lp.array().exp().sum() - 1.0) < 1e-12);
  }
  SUBCASE("non-positive concentration rejected") {
    const std::vector<double> bad{1.0, 0.0};
    CHECK_THROWS_AS(sample_dirichlet(bad, rng), ValidationError);
  }
}

TEST_CASE("wishart draws") {
  RngStream rng(2, 0);
  SUBCASE("one dimension is chi-squared") {
    const SpdMatrix one = SpdMatrix::identity(1);
    double s = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) s += sample_wishart(one, 3.0, rng)(0, 0);
    CHECK(std::abs(s / n - 3.0) < 0.06);
  }
  SUBCASE("mean is dof times scale") {
    const SpdMatrix eye = SpdMatrix::identity(2);
    Matrix acc = Matrix::Zero(2, 2);
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
      const SpdMatrix w = sample_wishart(eye, 5.0, rng);
      CHECK(w.cholesky().allFinite());
      acc += w.matrix();
    }
    acc /= n;
    CHECK((acc - 5.0 * Matrix::Identity(2, 2)).norm() < 0.02 * 5.0 * std::sqrt(2.0));
  }
  SUBCASE("dof below dimension rejected") {
    CHECK_THROWS_AS(sample_wishart(SpdMatrix::identity(3), 1.5, rng), ValidationError);
  }
}

TEST_CASE("logpdf_mvn") {
  CHECK(logpdf_mvn(Vector::Zero(1), Vector::Zero(1), SpdMatrix::identity(1)) ==
        doctest::Approx(-0.9189385332046727).epsilon(1e-12));
  CHECK(logpdf_mvn(Vector::Ones(2), Vector::Zero(2), SpdMatrix::identity(2)) ==
        doctest::Approx(-std::log(2.0 * std::numbers::pi) - 1.0).epsilon(1e-12));

  RngStream rng(3, 0);
  Matrix a(4, 4);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) a(r, c) = rng.normal();
  const Matrix cov = a * a.transpose() + 0.5 * Matrix::Identity(4, 4);
  Vector x(4), mean(4);
  for (int i = 0; i < 4; ++i) {
    x(i) = rng.normal();
    mean(i) = rng.normal();
  }
  const Vector d = x - mean;
  const double dense = -0.5 * (4.0 * std::log(2.0 * std::numbers::pi) + std::log(cov.determinant()) +
                               d.dot(cov.inverse() * d));
  CHECK(std::abs(logpdf_mvn(x, mean, SpdMatrix(cov)) - dense) < 1e-10);

  CHECK_THROWS(logpdf_mvn(Vector::Zero(2), Vector::Zero(1), SpdMatrix::identity(1)));
}

TEST_CASE("scalar samplers") {
  RngStream rng(4, 0);
  const int n = 100000;
  SUBCASE("categorical with degenerate weights") {
    const double inf = std::numeric_limits<double>::infinity();
    const std::vector<double> lw{0.0, -inf, -inf};
    for (int i = 0; i < 1000; ++i) CHECK(sample_categorical(lw, rng) == 0);
    const std::vector<double> none{-inf, -inf};
    CHECK_THROWS_AS(sample_categorical(none, rng), NumericalError);
  }
  SUBCASE("beta mean") {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += sample_beta(1.0, 1.0, rng);
    CHECK(std::abs(s / n - 0.5) < 0.01);
  }
  SUBCASE("gamma mean") {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += sample_gamma(2.0, 2.0, rng);
    CHECK(std::abs(s / n - 1.0) < 0.02);
  }
  SUBCASE("gamma with shape below one") {
    std::vector<double> x;
    for (int i = 0; i < n; ++i) x.push_back(sample_gamma(0.3, 1.0, rng));
    CHECK(std::abs(testing::mean_of(x) - 0.3) < 3.0 * std::sqrt(0.3 / n));
  }
  SUBCASE("log gamma stays finite for tiny shapes") {
    for (int i = 0; i < 100; ++i) CHECK(std::isfinite(sample_log_gamma(1e-6, rng)));
  }
  SUBCASE("invalid parameters rejected") {
    CHECK_THROWS_AS(sample_gamma(-1.0, 1.0, rng), ValidationError);
    CHECK_THROWS_AS(sample_beta(1.0, std::nan(""), rng), ValidationError);
  }
}

TEST_CASE("log densities agree with closed forms") {
  CHECK(logpdf_gamma(1.5, 2.0, 3.0) ==
        doctest::Approx(2.0 * std::log(3.0) - std::lgamma(2.0) + std::log(1.5) - 4.5).epsilon(1e-12));
  CHECK(logpdf_beta(0.3, 2.0, 5.0) ==
        doctest::Approx(std::lgamma(7.0) - std::lgamma(2.0) - std::lgamma(5.0) + std::log(0.3) + 4.0 * std::log(0.7))
            .epsilon(1e-12));
  // In one dimension Wishart(s, v) is Gamma(v/2, rate 1/(2s)).
  CHECK(logpdf_wishart(testing::scalar(0.7), testing::scalar(2.0), 5.0) ==
        doctest::Approx(logpdf_gamma(0.7, 2.5, 0.25)).epsilon(1e-12));
  const Vector lp = Vector::Constant(4, -std::log(4.0));
  const std::vector<double> conc(4, 0.7);
  CHECK(logpdf_dirichlet_log(lp, conc) == doctest::Approx(logpdf_symmetric_dirichlet_log(lp, 0.7)).epsilon(1e-12));
  CHECK(logpdf_symmetric_dirichlet_log(lp, 1.0) == doctest::Approx(std::lgamma(4.0)).epsilon(1e-12));
  // Far-tail evaluation stays finite in log space.
  CHECK(std::isfinite(logpdf_normal(60.0, 0.0, 1.0)));
  const std::vector<double> v{-1000.0, -1000.0};
  CHECK(log_sum_exp(v) == doctest::Approx(-1000.0 + std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("spd matrix checks") {
  Matrix asym(2, 2);
  asym << 2.0, 0.5, 0.4, 2.0;
  CHECK_THROWS_AS(SpdMatrix{asym}, NumericalError);
  Matrix indefinite(2, 2);
  indefinite << 1.0, 2.0, 2.0, 1.0;
  CHECK_THROWS_AS(SpdMatrix{indefinite}, NumericalError);

  Matrix m(3, 3);
  m << 4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0;
  const SpdMatrix s(m);
  CHECK(s.log_det() == doctest::Approx(std::log(m.determinant())).epsilon(1e-12));
  CHECK((s.inverse().matrix() - m.inverse()).cwiseAbs().maxCoeff() < 1e-12);
  const Vector x = Vector::LinSpaced(3, 1.0, 3.0);
  CHECK(s.inverse_quad_form(x) == doctest::Approx(x.dot(m.inverse() * x)).epsilon(1e-12));
  CHECK(unpack_lower(pack_lower(m), 3) == m);
  CHECK(SpdMatrix(unpack_lower(pack_lower(s.matrix()), 3)).matrix() == s.matrix());
}

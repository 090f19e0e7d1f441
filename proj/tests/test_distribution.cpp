#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "prosched/distribution.hpp"
#include "support/oracles.hpp"

using namespace prosched;

namespace {
const DoubleLogisticCdf kSymmetric{0.5, 2.0, -1.0, 0.5, 2.0, 1.0};
const DoubleLogisticCdf kSingle{1.0, 1.0, 0.0, 0.0, 1.0, 0.0};
}  // namespace

TEST_CASE("cdf closed-form values") {
  CHECK(cdf_eval(kSymmetric, -0.5) == doctest::Approx(0.38924222590378582).epsilon(1e-12));
  CHECK(cdf_eval(kSymmetric, 0.0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(cdf_eval(kSingle, 0.0) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("cdf saturates at extreme arguments instead of overflowing") {
  CHECK(cdf_eval(kSymmetric, -1e9) == 0.0);
  CHECK(cdf_eval(kSymmetric, 1e9) == 1.0);
  const DoubleLogisticCdf steep{0.5, 50.0, 0.0, 0.5, 50.0, 0.0};
  CHECK(std::isfinite(cdf_eval(steep, -1e305)));
  CHECK(cdf_eval(steep, -1e305) == 0.0);
  CHECK(cdf_eval(steep, 1e305) == 1.0);
}

TEST_CASE("cdf is monotone in z") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const DoubleLogisticCdf f = oracles::random_centered_cdf(rng);
    double prev = 0.0;
    for (double z = -8.0; z <= 8.0; z += 0.05) {
      const double v = cdf_eval(f, z);
      CHECK(v >= prev);
      prev = v;
    }
  }
}

TEST_CASE("pdf of a single logistic at its location is inv_scale/4") {
  CHECK(pdf_eval(kSingle, 0.0) == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("pdf symmetry of the symmetric mixture") {
  for (double z : {0.3, 1.7}) {
    CHECK(pdf_eval(kSymmetric, z) == doctest::Approx(pdf_eval(kSymmetric, -z)).epsilon(1e-12));
  }
}

TEST_CASE("pdf integrates to one") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const DoubleLogisticCdf f = oracles::random_centered_cdf(rng);
    const double lo = quantile(f, 1e-9);
    const double hi = quantile(f, 1.0 - 1e-9);
    const double mass =
        oracles::adaptive_quad([&](double z) { return pdf_eval(f, z); }, lo, hi, 1e-12);
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("quantile of the symmetric mixture at 0.5 is zero") {
  CHECK(std::abs(quantile(kSymmetric, 0.5)) < 1e-10);
}

TEST_CASE("quantile of a single logistic matches the closed form") {
  CHECK(quantile(kSingle, 0.75) == doctest::Approx(std::log(3.0)).epsilon(1e-9));
  CHECK(quantile(kSingle, 0.25) == doctest::Approx(-std::log(3.0)).epsilon(1e-9));
}

TEST_CASE("quantile inverts the cdf") {
  CHECK(quantile(kSymmetric, cdf_eval(kSymmetric, 0.37)) == doctest::Approx(0.37).epsilon(1e-8));
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 200; ++trial) {
    const DoubleLogisticCdf f = oracles::random_centered_cdf(rng);
    std::uniform_real_distribution<double> band(0.001, 0.999);
    const double q = band(rng);
    const double z = quantile(f, q);
    CHECK(cdf_eval(f, z) == doctest::Approx(q).epsilon(1e-10));
    CHECK(std::abs(quantile(f, cdf_eval(f, z)) - z) < 1e-8);
  }
}

TEST_CASE("quantile rejects probabilities outside (0,1)") {
  CHECK_THROWS_AS(quantile(kSingle, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(quantile(kSingle, 1.0), std::invalid_argument);
}

TEST_CASE("mean formula agrees with the first-moment quadrature") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 30; ++trial) {
    DoubleLogisticCdf f = oracles::random_centered_cdf(rng);
    f = f.shifted(0.7);  // non-zero mean
    const double lo = quantile(f, 1e-11);
    const double hi = quantile(f, 1.0 - 1e-11);
    const double moment =
        oracles::adaptive_quad([&](double z) { return z * pdf_eval(f, z); }, lo, hi, 1e-13);
    CHECK(f.mean() == doctest::Approx(moment).epsilon(1e-8));
  }
}

TEST_CASE("validate rejects malformed parameter sets") {
  DoubleLogisticCdf bad = kSymmetric;
  bad.mass1 = 0.6;  // masses no longer sum to one
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = kSymmetric;
  bad.inv_scale2 = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = kSymmetric;
  bad.mass1 = -0.1;
  bad.mass2 = 1.1;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  CHECK_NOTHROW(kSymmetric.validate());
}

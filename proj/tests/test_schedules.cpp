// Copyright (c) 2026 The hadiff Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>

#include "hadiff/schedules.hpp"
#include "oracles.hpp"

using namespace hadiff;

TEST_CASE("sigma endpoints and geometric mean") {
  GlobalSchedule s;
  s.sigma_tr_min = 0.1;
  s.sigma_tr_max = 10.0;
  CHECK(sigma(0.0, SigmaKind::Translation, s) == 0.1);
  CHECK(sigma(1.0, SigmaKind::Translation, s) == 10.0);
  CHECK(sigma(0.5, SigmaKind::Translation, s) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("sigma is log-linear in t") {
  GlobalSchedule s;  // defaults
  for (SigmaKind kind : {SigmaKind::Translation, SigmaKind::Rotation}) {
    const double a = std::log(sigma(0.2, kind, s));
    const double b = std::log(sigma(0.5, kind, s));
    const double c = std::log(sigma(0.8, kind, s));
    CHECK(std::abs((b - a) - (c - b)) < 1e-12);
  }
}

TEST_CASE("sigma_squared_rate matches the analytic derivative") {
  GlobalSchedule s;
  for (double t : {0.1, 0.4, 0.9}) {
    const double fd = testoracle::central_difference(
        [&](double x) {
          const double v = sigma(x, SigmaKind::Translation, s);
          return v * v;
        },
        t, 1e-6);
    CHECK(sigma_squared_rate(t, SigmaKind::Translation, s) ==
          doctest::Approx(fd).epsilon(1e-6));
  }
}

TEST_CASE("alpha schedule") {
  CHECK(alpha(0.0, 2.0) == 0.0);
  CHECK(alpha(1.0, std::log(100.0)) == 0.99);

  double prev = -1.0;
  for (int i = 0; i <= 100; ++i) {
    const double v = alpha(i / 100.0, 3.0);
    CHECK(v > prev);
    prev = v;
  }
  // increasing in beta as well
  CHECK(alpha(0.3, 2.0) < alpha(0.3, 2.5));
  CHECK_THROWS_AS(alpha(0.5, -1.0), ConfigError);
}

TEST_CASE("flex_rate is the constant beta and matches finite differences") {
  CHECK(flex_rate(0.1, 2.0) == 2.0);
  CHECK(flex_rate(0.9, 2.0) == 2.0);
  for (double tau : {0.05, 0.3, 0.7, 0.95}) {
    const double beta = 1.7;
    const double fd = testoracle::central_difference(
                          [&](double x) { return alpha(x, beta); }, tau, 1e-7) /
                      (1.0 - alpha(tau, beta));
    CHECK(std::abs(flex_rate(tau, beta) - fd) < 1e-6);
  }
}

TEST_CASE("beta_from_irmsd boundaries and monotonicity") {
  GlobalSchedule s;  // sigma_tr in [0.5, 20]
  CHECK(beta_from_irmsd(s.sigma_tr_max, s) == doctest::Approx(std::log(100.0)).epsilon(1e-12));
  CHECK(beta_from_irmsd(s.sigma_tr_min, s) ==
        doctest::Approx(std::log(100.0) / kBetaTimeFloor).epsilon(1e-12));
  CHECK_THROWS_AS(beta_from_irmsd(0.0, s), ConfigError);
  CHECK_THROWS_AS(beta_from_irmsd(-1.0, s), ConfigError);

  double prev = 1e300;
  for (double irmsd = 0.6; irmsd < 20.0; irmsd *= 1.15) {
    const double b = beta_from_irmsd(irmsd, s);
    CHECK(b <= prev + 1e-12);
    prev = b;
  }
}

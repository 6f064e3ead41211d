// tests/test_metrics.cpp
//
// Copyright 2026 The Echolab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "echolab/metrics.hpp"

using namespace echolab;
using namespace echolab::metrics;

TEST_CASE("si-sdr hand examples, cap, scale invariance") {
  std::vector<double> ref = {1.0, 0.0};
  std::vector<double> est = {1.0, 1.0};
  CHECK(si_sdr(est, ref) == doctest::Approx(0.0).epsilon(1e-12));

  CHECK(si_sdr(ref, ref) == 100.0);

  Rng rng(3);
  std::vector<double> r(500), e(500);
  for (size_t i = 0; i < 500; ++i) {
    r[i] = rng.normal();
    e[i] = r[i] + 0.3 * rng.normal();
  }
  const double base = si_sdr(e, r);
  for (double a : {0.01, 5.0, -2.0}) {
    std::vector<double> scaled = e;
    for (double& v : scaled) v *= a;
    CHECK(std::abs(si_sdr(scaled, r) - base) < 1e-9);
  }

  std::vector<double> zero(500, 0.0);
  CHECK_THROWS_AS(si_sdr(e, zero), DataError);
  std::vector<double> shorter(10, 0.1);
  CHECK_THROWS_AS(si_sdr(shorter, r), DataError);
}

TEST_CASE("lsd and mel_l2") {
  Tensor<double> a({5, 80});
  Rng rng(7);
  for (auto& v : a.flat()) v = rng.normal();
  CHECK(lsd(a, a) == 0.0);
  CHECK(mel_l2(a, a) == 0.0);

  Tensor<double> b = a;
  for (auto& v : b.flat()) v += 0.75;
  CHECK(lsd(b, a) == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(lsd(a, b) == doctest::Approx(lsd(b, a)).epsilon(1e-12));
  CHECK(mel_l2(b, a) == doctest::Approx(5.0 * 80.0 * 0.75 * 0.75).epsilon(1e-9));
}

TEST_CASE("circular error and doa report") {
  CHECK(circular_error_deg(0.0, 355.0) == 5.0);
  CHECK(circular_error_deg(355.0, 0.0) == 5.0);
  CHECK(circular_error_deg(10.0, 190.0) == 180.0);

  // truth found only at rank 4: top-5 hit, top-1 miss
  std::vector<std::vector<double>> preds = {{90.0, 10.0, 20.0, 45.0, 300.0}};
  std::vector<double> truths = {45.0};
  DoaReport rep = doa_report(preds, truths, 5);
  CHECK(rep.acc_at_1 == 0.0);
  CHECK(rep.top5_err == 0.0);
  CHECK(rep.mae_at_1 == 45.0);
  CHECK(rep.top5_mae == 0.0);

  // all exact hits
  DoaReport perfect = doa_report({{30.0}, {75.0}}, {30.0, 75.0}, 5);
  CHECK(perfect.acc_at_1 == 1.0);
  CHECK(perfect.top5_err == 0.0);
  CHECK(perfect.mae_at_1 == 0.0);

  CHECK_THROWS_AS(doa_report({}, {}, 5), DataError);
}

TEST_CASE("top-5 monotonicity against brute force") {
  Rng rng(13);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> cands(5);
    for (auto& c : cands) c = 5.0 * double(rng.uniform_int(72));
    const double truth = 5.0 * double(rng.uniform_int(72));

    DoaReport r1 = doa_report({cands}, {truth}, 1);
    DoaReport r5 = doa_report({cands}, {truth}, 5);
    CHECK(r5.top5_err <= r1.top5_err);
    CHECK(r5.top5_mae <= r1.top5_mae + 1e-12);

    // brute force best-of-5
    double best = 1e9;
    for (double c : cands) best = std::min(best, circular_error_deg(c, truth));
    CHECK(r5.top5_mae == doctest::Approx(best).epsilon(1e-12));
  }
}

// Copyright 2026 The wmaudit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "wmaudit/audit.hpp"
#include "wmaudit/error.hpp"
#include "wmaudit/rng.hpp"

using namespace wmaudit;
using namespace wmaudit::audit;

namespace {

std::vector<double> normals(Rng& rng, std::size_t n, double mu) {
  std::vector<double> v(n);
  for (double& x : v) x = mu + rng.normal();
  return v;
}

}  // namespace

TEST_CASE("bit accuracy") {
  const Bits a = {1, 0, 1, 1};
  CHECK(bit_accuracy(a, a) == 100.0);
  CHECK(bit_accuracy(a, Bits{0, 1, 0, 0}) == 0.0);
  CHECK(bit_accuracy(a, Bits{1, 0, 0, 0}) == 50.0);
  CHECK_THROWS_AS(bit_accuracy(a, Bits{1}), Error);
}

TEST_CASE("threshold calibration examples") {
  const std::vector<double> zeros(40, 0.0);
  const auto t = calibrate_threshold(zeros, 0.05);
  CHECK(t.tau == 0.0);
  CHECK(t.achieved_fpr == 0.0);

  std::vector<double> sorted(100);
  for (int i = 0; i < 100; ++i) sorted[i] = i;
  CHECK(threshold_at_fpr(sorted, 0.05) == 94.0);  // 95th order statistic, 1-based
  CHECK(calibrate_threshold(sorted, 0.05).achieved_fpr == doctest::Approx(0.05));
  CHECK(calibrate_threshold(std::vector<double>(5, 1.0), 0.05).low_sample);
  CHECK_THROWS_AS(calibrate_threshold(std::vector<double>{}, 0.05), Error);
  CHECK_THROWS_AS(calibrate_threshold(sorted, 1.0), Error);
}

TEST_CASE("heavy ties never exceed the target rate") {
  std::vector<double> neg(90, 0.0);
  for (int i = 0; i < 10; ++i) neg.push_back(1.0);
  const auto t = calibrate_threshold(neg, 0.05);
  const auto ref = oracle::threshold_scan({}, neg, 0.05);
  CHECK(t.tau == ref.tau);
  CHECK(t.achieved_fpr <= 0.05);
}

TEST_CASE("tpr at fpr examples") {
  CHECK(tpr_at_fpr({{5, 6, 7}, {1, 2, 3}}, 0.05) == 100.0);
  CHECK(tpr_at_fpr({{1, 1, 1}, {1, 1, 1}}, 0.05) == 0.0);
}

TEST_CASE("tpr at fpr agrees with an exhaustive threshold scan") {
  Rng rng(2026);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t np = 1 + rng.index(60), nn = 1 + rng.index(60);
    std::vector<double> p(np), n(nn);
    for (double& x : p) x = std::round(rng.normal() * 3) / 3 + 0.5;
    for (double& x : n) x = std::round(rng.normal() * 3) / 3;
    const double fpr = 0.01 + 0.3 * rng.uniform();
    const auto ref = oracle::threshold_scan(p, n, fpr);
    CHECK(tpr_at_fpr({p, n}, fpr) == doctest::Approx(ref.tpr).epsilon(1e-12));
    CHECK(calibrate_threshold(n, fpr).achieved_fpr <= fpr);
  }
}

TEST_CASE("gaussian shift reproduces the analytic rate") {
  Rng rng(7);
  const auto pos = normals(rng, 10000, 1.0), neg = normals(rng, 10000, 0.0);
  const double analytic = 100.0 * (1.0 - oracle::normal_cdf(1.6448536269514722 - 1.0));
  CHECK(analytic == doctest::Approx(25.95).epsilon(1e-3));
  CHECK(std::abs(tpr_at_fpr({pos, neg}, 0.05) - analytic) <= 2.0);
}

TEST_CASE("welch worked example") {
  const std::vector<double> a = {1, 2, 3, 4, 5}, b = {2, 3, 4, 5, 6};
  const auto r = welch_t_test(a, b);
  CHECK(r.t == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(r.df == doctest::Approx(8.0).epsilon(1e-12));
  // Frozen reference value for t = -1 with 8 degrees of freedom.
  CHECK(std::abs(r.p - 0.34659350708733416) < 1e-12);
  const auto same = welch_t_test(a, a);
  CHECK(same.t == 0.0);
  CHECK(same.p == doctest::Approx(1.0));
}

TEST_CASE("welch far separation and degenerate samples") {
  Rng rng(3);
  const auto a = normals(rng, 30, 0.0);
  std::vector<double> b = a;
  for (double& x : b) x += 100.0;
  CHECK(welch_t_test(b, a, Tail::kGreater).p < 1e-6);
  const auto d = welch_t_test(std::vector<double>{1, 1, 1}, std::vector<double>{1, 1, 1});
  CHECK(d.degenerate);
  CHECK_THROWS_AS(welch_t_test(std::vector<double>{1}, a), Error);
}

TEST_CASE("welch matches the high-precision reference on random pairs") {
  Rng rng(99);
  for (int i = 0; i < 20; ++i) {
    const auto a = normals(rng, 3 + rng.index(40), rng.normal());
    std::vector<double> b = normals(rng, 3 + rng.index(40), 0.0);
    for (double& x : b) x *= 0.2 + 3 * rng.uniform();
    const auto r = welch_t_test(a, b);
    const auto ref = oracle::welch(a, b);
    CHECK(std::abs(r.t - ref.t) < 1e-9 * std::max(1.0, std::abs(ref.t)));
    CHECK(std::abs(r.df - ref.df) < 1e-9 * ref.df);
    CHECK(std::abs(r.p - ref.p_two_sided) < 1e-9);
    CHECK(std::abs(welch_t_test(a, b, Tail::kGreater).p - ref.p_greater) < 1e-9);
  }
}

TEST_CASE("decisions and vsr") {
  CHECK(decide_bitacc(56).verdict);
  CHECK_FALSE(decide_bitacc(55).verdict);
  CHECK_FALSE(decide_bitacc(50).verdict);
  std::vector<double> calib(100);
  for (int i = 0; i < 100; ++i) calib[i] = i;
  CHECK(decide_score(1000, calib, 0.05).verdict);
  CHECK_FALSE(decide_score(-5, calib, 0.05).verdict);
  CHECK_FALSE(decide_score(threshold_at_fpr(calib, 0.05), calib, 0.05).verdict);

  auto rec = [](bool truth, bool verdict) {
    TrialRecord t;
    t.ground_truth = truth;
    t.decision.verdict = verdict;
    return t;
  };
  std::vector<TrialRecord> five(5, rec(true, true));
  CHECK(vsr(five) == 1.0);
  five[0] = rec(true, false);
  five[1] = rec(false, true);
  CHECK(vsr(five) == doctest::Approx(0.6));
  CHECK(vsr(std::vector<TrialRecord>(5, rec(false, true))) == 0.0);
}

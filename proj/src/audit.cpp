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

#include "wmaudit/audit.hpp"

#include <algorithm>
#include <cmath>

#include "wmaudit/error.hpp"

namespace wmaudit::audit {

double psnr(const Image& a, const Image& b) {
  require_same_shape(a, b, "psnr");
  double sse = 0.0;
  const auto da = a.data();
  const auto db = b.data();
  for (std::size_t i = 0; i < da.size(); ++i) {
    const double d = da[i] - db[i];
    sse += d * d;
  }
  if (sse == 0.0) return kInfinitePsnr;
  const double mse = sse / static_cast<double>(da.size());
  return 10.0 * std::log10(1.0 / mse);
}

double bit_accuracy(const Bits& extracted, const Bits& expected) {
  if (extracted.size() != expected.size()) {
    throw Error(ErrorCode::kShapeMismatch,
                "bit strings differ in length: " + std::to_string(extracted.size()) + " vs " +
                    std::to_string(expected.size()));
  }
  if (expected.empty()) throw Error(ErrorCode::kEmptyInput, "bit accuracy of empty strings");
  std::size_t match = 0;
  for (std::size_t i = 0; i < expected.size(); ++i) match += extracted[i] == expected[i];
  return 100.0 * static_cast<double>(match) / static_cast<double>(expected.size());
}

Threshold calibrate_threshold(std::span<const double> negatives, double fpr) {
  if (negatives.empty()) throw Error(ErrorCode::kEmptyInput, "no negative scores to calibrate on");
  if (!(fpr > 0.0 && fpr < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "fpr must be in (0, 1)");
  }
  std::vector<double> sorted(negatives.begin(), negatives.end());
  for (double v : sorted) {
    if (!std::isfinite(v)) throw Error(ErrorCode::kInvalidArgument, "non-finite negative score");
  }
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  // Largest number of negatives allowed strictly above tau. The epsilon keeps
  // products like 0.05 * 100 from rounding below the integer they denote.
  const auto allowed = static_cast<std::size_t>(std::floor(fpr * static_cast<double>(n) + 1e-9));
  // Scan candidates in ascending order; the count above sorted[i] is n - (index
  // one past the last copy of sorted[i]).
  Threshold t;
  t.low_sample = n < kMinRecommendedNegatives;
  for (std::size_t i = 0; i < n; ++i) {
    if (i + 1 < n && sorted[i + 1] == sorted[i]) continue;
    const std::size_t above = n - (i + 1);
    if (above <= allowed) {
      t.tau = sorted[i];
      t.achieved_fpr = static_cast<double>(above) / static_cast<double>(n);
      return t;
    }
  }
  t.tau = sorted.back();
  t.achieved_fpr = 0.0;
  return t;
}

double threshold_at_fpr(std::span<const double> negatives, double fpr) {
  return calibrate_threshold(negatives, fpr).tau;
}

double tpr_at_fpr(const ScoreSet& scores, double fpr) {
  if (scores.positives.empty()) throw Error(ErrorCode::kEmptyInput, "no positive scores");
  const double tau = threshold_at_fpr(scores.negatives, fpr);
  std::size_t hits = 0;
  for (double p : scores.positives) {
    if (!std::isfinite(p)) throw Error(ErrorCode::kInvalidArgument, "non-finite positive score");
    hits += p > tau;
  }
  return 100.0 * static_cast<double>(hits) / static_cast<double>(scores.positives.size());
}

namespace {

struct Moments {
  double mean = 0.0;
  double var = 0.0;
};

Moments moments(std::span<const double> x) {
  Moments m;
  for (double v : x) m.mean += v;
  m.mean /= static_cast<double>(x.size());
  for (double v : x) m.var += (v - m.mean) * (v - m.mean);
  m.var /= static_cast<double>(x.size() - 1);
  return m;
}

double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIter = 10000;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0 && b > 0.0)) throw Error(ErrorCode::kInvalidArgument, "beta parameters must be > 0");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                           a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_sf(double t, double df) {
  if (std::isinf(t)) return t > 0 ? 0.0 : 1.0;
  const double x = df / (df + t * t);
  const double tail = 0.5 * incomplete_beta(0.5 * df, 0.5, x);
  return t > 0.0 ? tail : 1.0 - tail;
}

TTestResult welch_t_test(std::span<const double> a, std::span<const double> b, Tail tail) {
  if (a.size() < 2 || b.size() < 2) {
    throw Error(ErrorCode::kInvalidArgument, "welch_t_test needs at least two values per sample");
  }
  const Moments ma = moments(a), mb = moments(b);
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  const double sa = ma.var / na, sb = mb.var / nb;
  TTestResult r;
  if (sa + sb == 0.0) {
    r.degenerate = true;
    r.df = na + nb - 2.0;
    if (ma.mean == mb.mean) {
      r.t = 0.0;
      r.p = 1.0;
      if (tail == Tail::kGreater) r.p = 0.5;
    } else {
      r.t = ma.mean > mb.mean ? std::numeric_limits<double>::infinity()
                              : -std::numeric_limits<double>::infinity();
      r.p = tail == Tail::kTwoSided ? 0.0 : (r.t > 0 ? 0.0 : 1.0);
    }
    return r;
  }
  r.t = (ma.mean - mb.mean) / std::sqrt(sa + sb);
  r.df = (sa + sb) * (sa + sb) / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
  if (tail == Tail::kTwoSided) {
    r.p = std::min(1.0, incomplete_beta(0.5 * r.df, 0.5, r.df / (r.df + r.t * r.t)));
  } else {
    r.p = student_t_sf(r.t, r.df);
  }
  return r;
}

AuditDecision decide_bitacc(double accuracy) {
  if (!(accuracy >= 0.0 && accuracy <= 100.0)) {
    throw Error(ErrorCode::kInvalidArgument, "bit accuracy must be in [0, 100]");
  }
  return {accuracy > kBitAccThreshold, accuracy, kBitAccThreshold, "bitacc>55"};
}

AuditDecision decide_score(double statistic, std::span<const double> calibration, double fpr) {
  const double tau = threshold_at_fpr(calibration, fpr);
  return {statistic > tau, statistic, tau, "score>tau@fpr"};
}

double vsr(std::span<const TrialRecord> trials) {
  if (trials.empty()) throw Error(ErrorCode::kEmptyInput, "vsr of no trials");
  std::size_t correct = 0;
  for (const auto& t : trials) correct += t.decision.verdict == t.ground_truth;
  return static_cast<double>(correct) / static_cast<double>(trials.size());
}

double mean(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorCode::kEmptyInput, "mean of no values");
  double s = 0.0;
  for (double v : values) s += v;
  return s / static_cast<double>(values.size());
}

double median(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorCode::kEmptyInput, "median of no values");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace wmaudit::audit

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

#pragma once

#include <limits>
#include <span>
#include <string>
#include <vector>

#include "wmaudit/image.hpp"
#include "wmaudit/rng.hpp"
#include "wmaudit/watermark_spec.hpp"

// Verification mathematics: per-sample scores -> sample significance
// (TPR at a fixed FPR), hypothesis tests, decision rules and VSR.
//
// Tie semantics are strict everywhere: a score counts as a detection only
// when it is strictly greater than the threshold.
namespace wmaudit::audit {

inline constexpr double kPsnrGateDb = 22.0;
inline constexpr double kBitAccThreshold = 55.0;
inline constexpr double kDefaultFpr = 0.05;
inline constexpr std::size_t kMaxAuditSamples = 150;
/// Below this many negatives threshold_at_fpr still works but is flagged.
inline constexpr std::size_t kMinRecommendedNegatives = 20;
inline constexpr double kInfinitePsnr = std::numeric_limits<double>::infinity();

/// 10 log10(1 / MSE) over all pixels and channels; +inf when identical.
double psnr(const Image& a, const Image& b);

/// 100 * matching / length. Throws kShapeMismatch on length mismatch or empty input.
double bit_accuracy(const Bits& extracted, const Bits& expected);

struct ScoreSet {
  std::vector<double> positives;
  std::vector<double> negatives;
};

struct Threshold {
  double tau = 0.0;
  /// |{n > tau}| / |negatives|
  double achieved_fpr = 0.0;
  bool low_sample = false;
};

/// Smallest observed negative value tau with |{n > tau}| / N <= fpr.
/// Throws kEmptyInput on no negatives, kInvalidArgument on fpr outside (0, 1).
Threshold calibrate_threshold(std::span<const double> negatives, double fpr);
double threshold_at_fpr(std::span<const double> negatives, double fpr);

/// Percent of positives strictly above threshold_at_fpr(negatives, fpr).
double tpr_at_fpr(const ScoreSet& scores, double fpr);

enum class Tail { kTwoSided, kGreater };

struct TTestResult {
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;
  /// Both samples have zero variance.
  bool degenerate = false;
};

/// Welch's unequal-variance t-test; kGreater tests mean(a) > mean(b).
/// Throws kInvalidArgument when either sample has fewer than two values.
TTestResult welch_t_test(std::span<const double> a, std::span<const double> b,
                         Tail tail = Tail::kTwoSided);

/// Regularized incomplete beta I_x(a, b), continued fraction (modified Lentz).
double incomplete_beta(double a, double b, double x);
/// P(T > t) for Student's t with df degrees of freedom.
double student_t_sf(double t, double df);

struct AuditDecision {
  bool verdict = false;
  double statistic = 0.0;
  double threshold = 0.0;
  std::string method;
};

/// verdict iff acc > 55 (strict).
AuditDecision decide_bitacc(double accuracy);
/// verdict iff statistic > threshold_at_fpr(calibration, fpr).
AuditDecision decide_score(double statistic, std::span<const double> calibration, double fpr);

struct TrialRecord {
  bool ground_truth = false;
  AuditDecision decision;
  Key seed = 0;
};

/// Fraction of trials whose verdict equals the ground truth.
double vsr(std::span<const TrialRecord> trials);

double mean(std::span<const double> values);
double median(std::span<const double> values);

}  // namespace wmaudit::audit

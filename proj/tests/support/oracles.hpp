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

// Reference implementations used only by tests. Each one is written the slow,
// obvious way and shares no code with the library it checks.

#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "wmaudit/image.hpp"

namespace oracle {

struct ScanResult {
  double tau = 0.0;
  double tpr = 0.0;
  double achieved_fpr = 0.0;
};

/// Tries every observed negative as a threshold and keeps the smallest one
/// whose false-positive fraction stays within fpr.
ScanResult threshold_scan(const std::vector<double>& positives,
                          const std::vector<double>& negatives, double fpr);

struct WelchRef {
  double t = 0.0;
  double df = 0.0;
  double p_two_sided = 1.0;
  double p_greater = 1.0;
};

/// Welch statistics in 50-digit binary floating point, p-values from the
/// Student t distribution evaluated at the same precision.
WelchRef welch(const std::vector<double>& a, const std::vector<double>& b);

/// Standard normal CDF via erfc.
double normal_cdf(double x);

/// Direct O(n^2) orthonormal DCT-II of one n x n block (row-major).
std::vector<double> dct2_naive(const std::vector<double>& block, int n);

/// One level of the orthonormal Haar transform, quadrants LL|HL over LH|HH.
std::vector<double> haar_level_naive(const std::vector<double>& plane, int w, int h);

/// Counter-clockwise quarter turn of a square image by index permutation.
wmaudit::Image rotate90_ccw(const wmaudit::Image& img);

/// Percentile by sorting (nearest rank, q in [0, 100]).
double percentile(std::vector<double> v, double q);

/// Root of the source tree, for bundled data and configs.
std::filesystem::path source_dir();
/// Directory holding the built executables.
std::filesystem::path bin_dir();

/// Fresh empty scratch directory under the build tree.
std::filesystem::path scratch_dir(const std::string& name);

}  // namespace oracle

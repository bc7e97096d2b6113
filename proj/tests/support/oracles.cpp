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

#include "oracles.hpp"

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <boost/multiprecision/cpp_bin_float.hpp>
#include <cmath>
#include <limits>

namespace oracle {

ScanResult threshold_scan(const std::vector<double>& positives,
                          const std::vector<double>& negatives, double fpr) {
  ScanResult best;
  bool found = false;
  const double n = static_cast<double>(negatives.size());
  for (double cand : negatives) {
    std::size_t fp = 0;
    for (double v : negatives) fp += v > cand ? 1 : 0;
    const double rate = static_cast<double>(fp) / n;
    if (rate <= fpr + 1e-12 && (!found || cand < best.tau)) {
      best.tau = cand;
      best.achieved_fpr = rate;
      found = true;
    }
  }
  std::size_t tp = 0;
  for (double v : positives) tp += v > best.tau ? 1 : 0;
  best.tpr = positives.empty() ? 0.0 : 100.0 * static_cast<double>(tp) / positives.size();
  return best;
}

WelchRef welch(const std::vector<double>& a, const std::vector<double>& b) {
  using R = boost::multiprecision::cpp_bin_float_50;
  auto moments = [](const std::vector<double>& v, R& mean, R& var) {
    mean = 0;
    for (double x : v) mean += R(x);
    mean /= R(v.size());
    var = 0;
    for (double x : v) var += (R(x) - mean) * (R(x) - mean);
    var /= R(v.size() - 1);
  };
  R ma, va, mb, vb;
  moments(a, ma, va);
  moments(b, mb, vb);
  const R sa = va / R(a.size());
  const R sb = vb / R(b.size());
  const R t = (ma - mb) / boost::multiprecision::sqrt(sa + sb);
  const R df = (sa + sb) * (sa + sb) /
               (sa * sa / R(a.size() - 1) + sb * sb / R(b.size() - 1));
  boost::math::students_t_distribution<R> dist(df);
  const R upper = boost::math::cdf(boost::math::complement(dist, t));
  const R two = 2 * boost::math::cdf(boost::math::complement(dist, boost::multiprecision::abs(t)));
  WelchRef out;
  out.t = static_cast<double>(t);
  out.df = static_cast<double>(df);
  out.p_two_sided = static_cast<double>(two > 1 ? R(1) : two);
  out.p_greater = static_cast<double>(upper);
  return out;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

std::vector<double> dct2_naive(const std::vector<double>& block, int n) {
  const double pi = std::acos(-1.0);
  std::vector<double> out(static_cast<std::size_t>(n) * n, 0.0);
  for (int u = 0; u < n; ++u) {
    for (int v = 0; v < n; ++v) {
      double s = 0.0;
      for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
          s += block[y * n + x] * std::cos(pi * (2 * y + 1) * u / (2.0 * n)) *
               std::cos(pi * (2 * x + 1) * v / (2.0 * n));
        }
      }
      const double cu = u == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
      const double cv = v == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
      out[u * n + v] = cu * cv * s;
    }
  }
  return out;
}

std::vector<double> haar_level_naive(const std::vector<double>& p, int w, int h) {
  std::vector<double> out(p.size(), 0.0);
  const int hw = w / 2, hh = h / 2;
  for (int y = 0; y < hh; ++y) {
    for (int x = 0; x < hw; ++x) {
      const double a = p[(2 * y) * w + 2 * x], b = p[(2 * y) * w + 2 * x + 1];
      const double c = p[(2 * y + 1) * w + 2 * x], d = p[(2 * y + 1) * w + 2 * x + 1];
      out[y * w + x] = (a + b + c + d) / 2.0;
      out[y * w + x + hw] = (a - b + c - d) / 2.0;
      out[(y + hh) * w + x] = (a + b - c - d) / 2.0;
      out[(y + hh) * w + x + hw] = (a - b - c + d) / 2.0;
    }
  }
  return out;
}

wmaudit::Image rotate90_ccw(const wmaudit::Image& img) {
  const int n = img.width();
  wmaudit::Image out(n, n, img.channels());
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      for (int c = 0; c < img.channels(); ++c) out.at(y, n - 1 - x, c) = img.at(x, y, c);
    }
  }
  return out;
}

double percentile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const auto rank = static_cast<std::size_t>(std::ceil(q / 100.0 * v.size()));
  return v[std::min(v.size() - 1, rank == 0 ? 0 : rank - 1)];
}

std::filesystem::path source_dir() { return WMAUDIT_SOURCE_DIR; }
std::filesystem::path bin_dir() { return WMAUDIT_BIN_DIR; }

std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::path(WMAUDIT_SCRATCH_DIR) / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace oracle

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

#include "wmaudit/transforms.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "wmaudit/error.hpp"

namespace wmaudit {

WaveletBand parse_band(std::string_view name) {
  if (name == "LL") return WaveletBand::kLL;
  if (name == "LH") return WaveletBand::kLH;
  if (name == "HL") return WaveletBand::kHL;
  if (name == "HH") return WaveletBand::kHH;
  throw Error(ErrorCode::kInvalidArgument, "unknown wavelet band '" + std::string(name) + "'");
}

std::string_view band_name(WaveletBand band) {
  switch (band) {
    case WaveletBand::kLL: return "LL";
    case WaveletBand::kLH: return "LH";
    case WaveletBand::kHL: return "HL";
    case WaveletBand::kHH: return "HH";
  }
  return "?";
}

namespace {

int region_side(int side, int levels) {
  const int unit = 1 << levels;
  return side - side % unit;
}

void check_levels(const Plane& p, int levels) {
  if (levels < 1) throw Error(ErrorCode::kInvalidArgument, "wavelet levels must be >= 1");
  if (region_side(p.width, levels) < (1 << levels) ||
      region_side(p.height, levels) < (1 << levels)) {
    throw Error(ErrorCode::kInvalidArgument, "plane too small for wavelet depth");
  }
}

constexpr double kInvSqrt2 = std::numbers::sqrt2 / 2.0;

// One level on the top-left w x h region (both even).
void haar_step(Plane& p, int w, int h) {
  std::vector<double> tmp(static_cast<std::size_t>(std::max(w, h)));
  // Rows: low-pass into the left half, high-pass into the right half.
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w / 2; ++x) {
      const double a = p.at(2 * x, y), b = p.at(2 * x + 1, y);
      tmp[x] = (a + b) * kInvSqrt2;
      tmp[w / 2 + x] = (a - b) * kInvSqrt2;
    }
    for (int x = 0; x < w; ++x) p.at(x, y) = tmp[x];
  }
  for (int x = 0; x < w; ++x) {
    for (int y = 0; y < h / 2; ++y) {
      const double a = p.at(x, 2 * y), b = p.at(x, 2 * y + 1);
      tmp[y] = (a + b) * kInvSqrt2;
      tmp[h / 2 + y] = (a - b) * kInvSqrt2;
    }
    for (int y = 0; y < h; ++y) p.at(x, y) = tmp[y];
  }
}

void haar_unstep(Plane& p, int w, int h) {
  std::vector<double> tmp(static_cast<std::size_t>(std::max(w, h)));
  for (int x = 0; x < w; ++x) {
    for (int y = 0; y < h / 2; ++y) {
      const double lo = p.at(x, y), hi = p.at(x, h / 2 + y);
      tmp[2 * y] = (lo + hi) * kInvSqrt2;
      tmp[2 * y + 1] = (lo - hi) * kInvSqrt2;
    }
    for (int y = 0; y < h; ++y) p.at(x, y) = tmp[y];
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w / 2; ++x) {
      const double lo = p.at(x, y), hi = p.at(w / 2 + x, y);
      tmp[2 * x] = (lo + hi) * kInvSqrt2;
      tmp[2 * x + 1] = (lo - hi) * kInvSqrt2;
    }
    for (int x = 0; x < w; ++x) p.at(x, y) = tmp[x];
  }
}

}  // namespace

Plane haar_forward(const Plane& plane, int levels) {
  check_levels(plane, levels);
  Plane out = plane;
  int w = region_side(plane.width, levels);
  int h = region_side(plane.height, levels);
  for (int l = 0; l < levels; ++l) {
    haar_step(out, w, h);
    w /= 2;
    h /= 2;
  }
  return out;
}

Plane haar_inverse(const Plane& coeffs, int levels) {
  check_levels(coeffs, levels);
  Plane out = coeffs;
  const int w0 = region_side(coeffs.width, levels);
  const int h0 = region_side(coeffs.height, levels);
  for (int l = levels - 1; l >= 0; --l) haar_unstep(out, w0 >> l, h0 >> l);
  return out;
}

Rect band_rect(int width, int height, int level, WaveletBand band) {
  const int w = region_side(width, level) >> level;
  const int h = region_side(height, level) >> level;
  switch (band) {
    case WaveletBand::kLL: return {0, 0, w, h};
    case WaveletBand::kHL: return {w, 0, w, h};
    case WaveletBand::kLH: return {0, h, w, h};
    case WaveletBand::kHH: return {w, h, w, h};
  }
  return {};
}

std::vector<double> dct_matrix(int n) {
  std::vector<double> m(static_cast<std::size_t>(n) * n);
  for (int k = 0; k < n; ++k) {
    const double scale = k == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
    for (int i = 0; i < n; ++i) {
      m[static_cast<std::size_t>(k) * n + i] =
          scale * std::cos(std::numbers::pi * (2 * i + 1) * k / (2.0 * n));
    }
  }
  return m;
}

namespace {

// out = A * block * A^T (forward) or A^T * block * A (inverse).
void transform_block(Plane& plane, int x0, int y0, int n, const std::vector<double>& a,
                     bool inverse) {
  std::vector<double> block(static_cast<std::size_t>(n) * n);
  std::vector<double> tmp(block.size());
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) block[static_cast<std::size_t>(y) * n + x] = plane.at(x0 + x, y0 + y);
  }
  auto coef = [&](int r, int c) {
    return inverse ? a[static_cast<std::size_t>(c) * n + r] : a[static_cast<std::size_t>(r) * n + c];
  };
  // Columns (vertical).
  for (int k = 0; k < n; ++k) {
    for (int x = 0; x < n; ++x) {
      double s = 0.0;
      for (int y = 0; y < n; ++y) s += coef(k, y) * block[static_cast<std::size_t>(y) * n + x];
      tmp[static_cast<std::size_t>(k) * n + x] = s;
    }
  }
  // Rows (horizontal).
  for (int y = 0; y < n; ++y) {
    for (int k = 0; k < n; ++k) {
      double s = 0.0;
      for (int x = 0; x < n; ++x) s += coef(k, x) * tmp[static_cast<std::size_t>(y) * n + x];
      plane.at(x0 + k, y0 + y) = s;
    }
  }
}

}  // namespace

void dct_block(Plane& plane, int x0, int y0, int n, const std::vector<double>& basis) {
  transform_block(plane, x0, y0, n, basis, false);
}

void idct_block(Plane& plane, int x0, int y0, int n, const std::vector<double>& basis) {
  transform_block(plane, x0, y0, n, basis, true);
}

Image laplacian(const Image& img) {
  Image out(img.width(), img.height(), img.channels());
  const int w = img.width(), h = img.height();
  for (int y = 0; y < h; ++y) {
    const int ym = std::max(y - 1, 0), yp = std::min(y + 1, h - 1);
    for (int x = 0; x < w; ++x) {
      const int xm = std::max(x - 1, 0), xp = std::min(x + 1, w - 1);
      for (int c = 0; c < img.channels(); ++c) {
        out.at(x, y, c) = 4.0 * img.at(x, y, c) - img.at(xm, y, c) - img.at(xp, y, c) -
                          img.at(x, ym, c) - img.at(x, yp, c);
      }
    }
  }
  return out;
}

}  // namespace wmaudit

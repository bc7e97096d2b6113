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

#include <string_view>
#include <vector>

#include "wmaudit/image.hpp"

namespace wmaudit {

/// LH = low-pass along x, high-pass along y; HL the transpose.
enum class WaveletBand { kLL, kLH, kHL, kHH };

WaveletBand parse_band(std::string_view name);
std::string_view band_name(WaveletBand band);

struct Rect {
  int x = 0;
  int y = 0;
  int width = 0;
  int height = 0;
};

/// Orthonormal Haar wavelet in Mallat layout. Only the top-left region whose
/// sides are multiples of 2^levels is transformed; the remaining rows and
/// columns pass through unchanged, so the transform is exactly invertible for
/// any plane size.
Plane haar_forward(const Plane& plane, int levels);
Plane haar_inverse(const Plane& coeffs, int levels);

/// Location of `band` at decomposition depth `level` (1-based) inside a
/// coefficient plane of the given size.
Rect band_rect(int width, int height, int level, WaveletBand band);

/// Orthonormal DCT-II basis matrix, row k = frequency k.
std::vector<double> dct_matrix(int n);

/// In-place orthonormal 2-D DCT / inverse on the n x n block at (x0, y0).
void dct_block(Plane& plane, int x0, int y0, int n, const std::vector<double>& basis);
void idct_block(Plane& plane, int x0, int y0, int n, const std::vector<double>& basis);

/// 3x3 Laplacian high-pass [0 -1 0; -1 4 -1; 0 -1 0], replicated border,
/// applied per channel.
Image laplacian(const Image& img);

}  // namespace wmaudit

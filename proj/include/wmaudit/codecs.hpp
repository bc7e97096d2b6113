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

#include <array>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "wmaudit/dataset.hpp"
#include "wmaudit/image.hpp"
#include "wmaudit/rng.hpp"
#include "wmaudit/transforms.hpp"
#include "wmaudit/watermark_spec.hpp"

// Model-free watermark injection and extraction primitives. Everything here
// is a pure function of its inputs and key.
namespace wmaudit::codecs {

// ---- Pixel blending -------------------------------------------------------

/// out = (1 - alpha*mask) * img + alpha*mask * pattern, clamped. `mask` is a
/// per-pixel weight shared by all channels (normally 0/1).
Image embed_pattern(const Image& img, const Image& pattern, const Plane& mask, double alpha);

// ---- Warping --------------------------------------------------------------

struct WarpField {
  int width = 0;
  int height = 0;
  /// Per-pixel displacement in pixels, row-major.
  std::vector<double> dx;
  std::vector<double> dy;
  double magnitude = 0.0;
};

inline constexpr int kWarpControlGrid = 4;

/// Control grid of uniform [-1, 1] displacements scaled by `magnitude`,
/// upsampled bicubically and clipped to [-magnitude, magnitude].
WarpField make_warp_field(int width, int height, double magnitude, Key key,
                          int grid = kWarpControlGrid);
WarpField uniform_shift_field(int width, int height, double dx, double dy);

/// out(p) = in(p + field(p)), bilinear, border-clamped sampling.
Image embed_warp(const Image& img, const WarpField& field);

// ---- Hue rotation ---------------------------------------------------------

/// NTSC RGB -> YIQ, rows Y, I, Q (4-decimal constants). The inverse is the
/// exact matrix inverse so that a zero rotation round-trips to 1e-15.
inline constexpr std::array<double, 9> kRgbToYiq = {
    0.2990, 0.5870,  0.1140,   //
    0.5959, -0.2746, -0.3213,  //
    0.2115, -0.5227, 0.3112,
};

/// Rotates the (I, Q) chroma plane by `angle_deg`. Requires 3 channels.
Image embed_hue_rotate(const Image& img, double angle_deg);

// ---- Additive carriers ----------------------------------------------------

enum class CarrierKind { kGaussian, kDwtBand };

std::string_view carrier_kind_name(CarrierKind kind);

struct CarrierParams {
  int levels = 1;
  WaveletBand band = WaveletBand::kLH;
};

struct Carrier {
  CarrierKind kind = CarrierKind::kGaussian;
  Key key = 0;
  /// Zero mean, unit RMS, image-shaped.
  Image pattern;
};

/// Gaussian: i.i.d. N(0,1) per element, centred. DWT band: keyed +/-1 signs in
/// the selected sub-band of each channel, inverse transformed. Both are
/// normalised to unit RMS. Throws kInvalidArgument if levels * 2^levels
/// exceeds min(width, height).
Carrier gen_carrier(CarrierKind kind, Key key, int width, int height, int channels,
                    const CarrierParams& params = {});

/// clamp(img + s * pattern).
Image embed_carrier(const Image& img, const Carrier& carrier, double strength);

struct Detection {
  double score = 0.0;
  /// Residual (or pattern) had zero variance; score forced to 0.
  bool degenerate = false;
};

/// Normalized correlation between (img - reference) and the pattern.
Detection detect_pattern(const Image& img, const Image& reference, const Image& pattern);
/// Blind variant: both image and pattern pass through the Laplacian high-pass
/// before correlation, which suppresses smooth image content.
Detection detect_pattern_blind(const Image& img, const Image& pattern);

Detection detect_carrier(const Image& img, const Image& reference, const Carrier& carrier);
Detection detect_carrier(const Image& img, const Carrier& carrier);

// ---- Multi-bit QIM in DWT -> DCT ------------------------------------------

struct QimConfig {
  int wavelet_levels = 1;
  WaveletBand band = WaveletBand::kLH;
  int dct_block = 8;
  /// (row, col) = (vertical, horizontal) frequency inside each DCT block.
  std::vector<std::pair<int, int>> coeff_indices = default_coeff_indices();
  /// Quantization step; even multiples encode 0, odd multiples encode 1.
  double step = 0.25;
  /// Copies per bit; 0 fills the available capacity.
  int redundancy = 0;

  static std::vector<std::pair<int, int>> default_coeff_indices() {
    return {{0, 3}, {1, 2}, {2, 1}, {3, 0}, {1, 3}, {3, 1}};
  }
};

/// Throws kInvalidArgument on step <= 0, duplicate or out-of-block indices,
/// negative redundancy.
void validate_qim(const QimConfig& cfg);
/// Coefficient slots available in an image of this size.
std::size_t qim_slots(const QimConfig& cfg, int width, int height);
/// Effective copies per bit; throws kCapacity when fewer than one.
int resolve_redundancy(const QimConfig& cfg, int width, int height, std::size_t nbits);

/// Embeds in the luma plane (channel mean), applying the same luma change to
/// every channel. Re-embeds up to three more times when clamping flips bits.
Image embed_bits(const Image& img, const Payload& payload, const QimConfig& cfg, Key key);
/// Majority vote over copies, ties broken toward 0.
Bits extract_bits(const Image& img, const QimConfig& cfg, Key key, std::size_t nbits);

/// Largest step keeping PSNR(img, embed_bits(img)) >= min_psnr, by bisection.
double calibrate_step(const Image& img, const Payload& payload, QimConfig cfg, Key key,
                      double min_psnr = 22.0, int iterations = 8);

// ---- Manifest-level rules -------------------------------------------------

struct LabelRuleResult {
  DatasetManifest manifest;
  std::vector<WatermarkAnnotation> annotations;
};

/// Targeted: subset labels := target. Untargeted: uniform over the other
/// classes, keyed per record id. Originals are kept in the annotations.
LabelRuleResult apply_label_rule(const DatasetManifest& manifest,
                                 const std::vector<std::string>& subset, const LabelRule& rule,
                                 Key key, std::string_view spec_ref = "");

/// Single-space separated; a no-op if the token already sits at that end.
std::string insert_prompt_trigger(std::string_view caption, std::string_view token,
                                  TriggerPosition position);
/// Whole-word occurrence of `token` in `caption`.
bool has_trigger(std::string_view caption, std::string_view token);

}  // namespace wmaudit::codecs

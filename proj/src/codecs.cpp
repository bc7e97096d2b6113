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

#include "wmaudit/codecs.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "wmaudit/audit.hpp"
#include "wmaudit/error.hpp"

namespace wmaudit::codecs {

Image embed_pattern(const Image& img, const Image& pattern, const Plane& mask, double alpha) {
  require_same_shape(img, pattern, "embed_pattern");
  if (mask.width != img.width() || mask.height != img.height()) {
    throw Error(ErrorCode::kShapeMismatch, "embed_pattern: mask shape differs from image");
  }
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "embed_pattern: alpha must be in [0, 1]");
  }
  Image out = img;
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const double w = alpha * mask.at(x, y);
      if (w == 0.0) continue;
      for (int c = 0; c < img.channels(); ++c) {
        out.at(x, y, c) = (1.0 - w) * img.at(x, y, c) + w * pattern.at(x, y, c);
      }
    }
  }
  out.clamp();
  return out;
}

// ---- Warping ----------------------------------------------------------------

namespace {

double cubic_weight(double t) {
  // Keys kernel, a = -0.5.
  constexpr double a = -0.5;
  t = std::abs(t);
  if (t <= 1.0) return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
  if (t < 2.0) return ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a;
  return 0.0;
}

// Bicubic upsample of a g x g grid onto width x height, corners aligned.
std::vector<double> upsample_bicubic(const std::vector<double>& grid, int g, int width,
                                     int height) {
  std::vector<double> out(static_cast<std::size_t>(width) * height);
  auto at = [&](int i, int j) {
    i = std::clamp(i, 0, g - 1);
    j = std::clamp(j, 0, g - 1);
    return grid[static_cast<std::size_t>(j) * g + i];
  };
  for (int y = 0; y < height; ++y) {
    const double gy = height > 1 ? static_cast<double>(y) * (g - 1) / (height - 1) : 0.0;
    const int jy = static_cast<int>(std::floor(gy));
    for (int x = 0; x < width; ++x) {
      const double gx = width > 1 ? static_cast<double>(x) * (g - 1) / (width - 1) : 0.0;
      const int ix = static_cast<int>(std::floor(gx));
      double s = 0.0;
      for (int m = -1; m <= 2; ++m) {
        const double wy = cubic_weight(gy - (jy + m));
        if (wy == 0.0) continue;
        for (int n = -1; n <= 2; ++n) {
          s += wy * cubic_weight(gx - (ix + n)) * at(ix + n, jy + m);
        }
      }
      out[static_cast<std::size_t>(y) * width + x] = s;
    }
  }
  return out;
}

}  // namespace

WarpField make_warp_field(int width, int height, double magnitude, Key key, int grid) {
  if (magnitude < 0.0) throw Error(ErrorCode::kInvalidArgument, "warp magnitude must be >= 0");
  if (grid < 2) throw Error(ErrorCode::kInvalidArgument, "warp control grid must be >= 2");
  Rng rng(derive_key(key, "warp-grid"));
  std::vector<double> gx(static_cast<std::size_t>(grid) * grid);
  std::vector<double> gy(gx.size());
  for (std::size_t i = 0; i < gx.size(); ++i) {
    gx[i] = rng.uniform(-1.0, 1.0);
    gy[i] = rng.uniform(-1.0, 1.0);
  }
  WarpField f;
  f.width = width;
  f.height = height;
  f.magnitude = magnitude;
  f.dx = upsample_bicubic(gx, grid, width, height);
  f.dy = upsample_bicubic(gy, grid, width, height);
  for (double& v : f.dx) v = std::clamp(v * magnitude, -magnitude, magnitude);
  for (double& v : f.dy) v = std::clamp(v * magnitude, -magnitude, magnitude);
  return f;
}

WarpField uniform_shift_field(int width, int height, double dx, double dy) {
  WarpField f;
  f.width = width;
  f.height = height;
  f.dx.assign(static_cast<std::size_t>(width) * height, dx);
  f.dy.assign(f.dx.size(), dy);
  f.magnitude = std::max(std::abs(dx), std::abs(dy));
  return f;
}

Image embed_warp(const Image& img, const WarpField& field) {
  if (field.width != img.width() || field.height != img.height()) {
    throw Error(ErrorCode::kShapeMismatch, "embed_warp: field shape differs from image");
  }
  Image out(img.width(), img.height(), img.channels());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * img.width() + x;
      const double sx = x + field.dx[i];
      const double sy = y + field.dy[i];
      for (int c = 0; c < img.channels(); ++c) out.at(x, y, c) = sample_bilinear(img, sx, sy, c);
    }
  }
  return out;
}

// ---- Hue rotation -------------------------------------------------------------

namespace {

std::array<double, 9> invert3(const std::array<double, 9>& m) {
  const double a = m[0], b = m[1], c = m[2], d = m[3], e = m[4], f = m[5], g = m[6],
               h = m[7], i = m[8];
  const double det = a * (e * i - f * h) - b * (d * i - f * g) + c * (d * h - e * g);
  return {(e * i - f * h) / det, (c * h - b * i) / det, (b * f - c * e) / det,
          (f * g - d * i) / det, (a * i - c * g) / det, (c * d - a * f) / det,
          (d * h - e * g) / det, (b * g - a * h) / det, (a * e - b * d) / det};
}

const std::array<double, 9>& yiq_to_rgb() {
  static const std::array<double, 9> inv = invert3(kRgbToYiq);
  return inv;
}

}  // namespace

Image embed_hue_rotate(const Image& img, double angle_deg) {
  if (img.channels() != 3) {
    throw Error(ErrorCode::kInvalidArgument, "hue rotation needs an RGB image");
  }
  const double theta = angle_deg * std::numbers::pi / 180.0;
  const double cs = std::cos(theta), sn = std::sin(theta);
  const auto& f = kRgbToYiq;
  const auto& inv = yiq_to_rgb();
  Image out = img;
  auto data = out.data();
  for (std::size_t p = 0; p < data.size(); p += 3) {
    const double r = data[p], g = data[p + 1], b = data[p + 2];
    const double yy = f[0] * r + f[1] * g + f[2] * b;
    const double ii = f[3] * r + f[4] * g + f[5] * b;
    const double qq = f[6] * r + f[7] * g + f[8] * b;
    const double i2 = cs * ii - sn * qq;
    const double q2 = sn * ii + cs * qq;
    data[p] = inv[0] * yy + inv[1] * i2 + inv[2] * q2;
    data[p + 1] = inv[3] * yy + inv[4] * i2 + inv[5] * q2;
    data[p + 2] = inv[6] * yy + inv[7] * i2 + inv[8] * q2;
  }
  out.clamp();
  return out;
}

// ---- Carriers -----------------------------------------------------------------

std::string_view carrier_kind_name(CarrierKind kind) {
  return kind == CarrierKind::kGaussian ? "gaussian" : "dwt-band";
}

namespace {

void normalize_pattern(Image& pattern) {
  auto d = pattern.data();
  double mean = 0.0;
  for (double v : d) mean += v;
  mean /= static_cast<double>(d.size());
  double ss = 0.0;
  for (double& v : d) {
    v -= mean;
    ss += v * v;
  }
  const double rms = std::sqrt(ss / static_cast<double>(d.size()));
  if (rms > 0.0) {
    for (double& v : d) v /= rms;
  }
}

}  // namespace

Carrier gen_carrier(CarrierKind kind, Key key, int width, int height, int channels,
                    const CarrierParams& params) {
  Carrier c;
  c.kind = kind;
  c.key = key;
  c.pattern = Image(width, height, channels);
  if (kind == CarrierKind::kGaussian) {
    Rng rng(derive_key(key, "gaussian-carrier"));
    for (double& v : c.pattern.data()) v = rng.normal();
  } else {
    const int levels = params.levels;
    if (levels < 1 || levels * (1 << levels) > std::min(width, height)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "image " + std::to_string(width) + "x" + std::to_string(height) +
                      " too small for " + std::to_string(levels) + " wavelet levels");
    }
    if (params.band == WaveletBand::kLL) {
      throw Error(ErrorCode::kInvalidArgument, "dwt-band carrier needs a detail band");
    }
    Rng rng(derive_key(key, "dwt-carrier"));
    const Rect r = band_rect(width, height, levels, params.band);
    for (int ch = 0; ch < channels; ++ch) {
      Plane coeffs(width, height);
      for (int y = r.y; y < r.y + r.height; ++y) {
        for (int x = r.x; x < r.x + r.width; ++x) coeffs.at(x, y) = rng.coin() ? 1.0 : -1.0;
      }
      store_channel(c.pattern, ch, haar_inverse(coeffs, levels));
    }
  }
  normalize_pattern(c.pattern);
  return c;
}

Image embed_carrier(const Image& img, const Carrier& carrier, double strength) {
  require_same_shape(img, carrier.pattern, "embed_carrier");
  if (strength < 0.0) throw Error(ErrorCode::kInvalidArgument, "carrier strength must be >= 0");
  Image out = img;
  auto o = out.data();
  auto p = carrier.pattern.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += strength * p[i];
  out.clamp();
  return out;
}

namespace {

Detection correlate(std::span<const double> residual, std::span<const double> pattern) {
  double mr = 0.0, mp = 0.0;
  for (std::size_t i = 0; i < residual.size(); ++i) {
    mr += residual[i];
    mp += pattern[i];
  }
  mr /= static_cast<double>(residual.size());
  mp /= static_cast<double>(pattern.size());
  double rp = 0.0, rr = 0.0, pp = 0.0;
  for (std::size_t i = 0; i < residual.size(); ++i) {
    const double a = residual[i] - mr, b = pattern[i] - mp;
    rp += a * b;
    rr += a * a;
    pp += b * b;
  }
  if (rr <= 0.0 || pp <= 0.0) return {0.0, true};
  return {std::clamp(rp / std::sqrt(rr * pp), -1.0, 1.0), false};
}

}  // namespace

Detection detect_pattern(const Image& img, const Image& reference, const Image& pattern) {
  require_same_shape(img, reference, "detect: reference");
  require_same_shape(img, pattern, "detect: pattern");
  std::vector<double> residual(img.size());
  for (std::size_t i = 0; i < residual.size(); ++i) {
    residual[i] = img.data()[i] - reference.data()[i];
  }
  return correlate(residual, pattern.data());
}

Detection detect_pattern_blind(const Image& img, const Image& pattern) {
  require_same_shape(img, pattern, "detect: pattern");
  const Image hp_img = laplacian(img);
  const Image hp_pat = laplacian(pattern);
  return correlate(hp_img.data(), hp_pat.data());
}

Detection detect_carrier(const Image& img, const Image& reference, const Carrier& carrier) {
  return detect_pattern(img, reference, carrier.pattern);
}

Detection detect_carrier(const Image& img, const Carrier& carrier) {
  return detect_pattern_blind(img, carrier.pattern);
}

// ---- QIM ------------------------------------------------------------------------

void validate_qim(const QimConfig& cfg) {
  if (!(cfg.step > 0.0)) throw Error(ErrorCode::kInvalidArgument, "QIM step must be > 0");
  if (cfg.wavelet_levels < 1) throw Error(ErrorCode::kInvalidArgument, "wavelet levels must be >= 1");
  if (cfg.dct_block < 2) throw Error(ErrorCode::kInvalidArgument, "DCT block must be >= 2");
  if (cfg.redundancy < 0) throw Error(ErrorCode::kInvalidArgument, "redundancy must be >= 0");
  if (cfg.coeff_indices.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "QIM needs at least one coefficient index");
  }
  std::set<std::pair<int, int>> seen;
  for (const auto& [r, c] : cfg.coeff_indices) {
    if (r < 0 || c < 0 || r >= cfg.dct_block || c >= cfg.dct_block) {
      throw Error(ErrorCode::kInvalidArgument, "QIM coefficient index outside the DCT block");
    }
    if (!seen.insert({r, c}).second) {
      throw Error(ErrorCode::kInvalidArgument, "QIM coefficient indices must be distinct");
    }
  }
}

namespace {

struct QimLayout {
  Rect band;
  int n = 8;
  int blocks_x = 0;
  int blocks_y = 0;
  std::size_t per_block = 0;

  std::size_t slots() const {
    return static_cast<std::size_t>(blocks_x) * blocks_y * per_block;
  }
};

QimLayout layout_for(const QimConfig& cfg, int width, int height) {
  QimLayout l;
  const int unit = 1 << cfg.wavelet_levels;
  if (width < unit || height < unit) return l;
  l.band = band_rect(width, height, cfg.wavelet_levels, cfg.band);
  l.n = cfg.dct_block;
  l.blocks_x = l.band.width / l.n;
  l.blocks_y = l.band.height / l.n;
  l.per_block = cfg.coeff_indices.size();
  return l;
}

std::int64_t parity(std::int64_t q) { return ((q % 2) + 2) % 2; }

double quantize_to_bit(double c, double step, std::uint8_t bit) {
  const double u = c / step;
  auto q = static_cast<std::int64_t>(std::llround(u));
  if (parity(q) != bit) q += (u >= static_cast<double>(q)) ? 1 : -1;
  return static_cast<double>(q) * step;
}

std::uint8_t demodulate(double c, double step) {
  return static_cast<std::uint8_t>(parity(std::llround(c / step)));
}

// Forward DWT then DCT on every band block; returns the coefficient plane.
Plane forward_coeffs(const Plane& luma, const QimConfig& cfg, const QimLayout& l,
                     const std::vector<double>& basis) {
  Plane coeffs = haar_forward(luma, cfg.wavelet_levels);
  for (int by = 0; by < l.blocks_y; ++by) {
    for (int bx = 0; bx < l.blocks_x; ++bx) {
      dct_block(coeffs, l.band.x + bx * l.n, l.band.y + by * l.n, l.n, basis);
    }
  }
  return coeffs;
}

Plane inverse_coeffs(Plane coeffs, const QimConfig& cfg, const QimLayout& l,
                     const std::vector<double>& basis) {
  for (int by = 0; by < l.blocks_y; ++by) {
    for (int bx = 0; bx < l.blocks_x; ++bx) {
      idct_block(coeffs, l.band.x + bx * l.n, l.band.y + by * l.n, l.n, basis);
    }
  }
  return haar_inverse(coeffs, cfg.wavelet_levels);
}

double& slot_ref(Plane& coeffs, const QimConfig& cfg, const QimLayout& l, std::size_t slot) {
  const std::size_t block = slot / l.per_block;
  const auto& [row, col] = cfg.coeff_indices[slot % l.per_block];
  const int bx = static_cast<int>(block % static_cast<std::size_t>(l.blocks_x));
  const int by = static_cast<int>(block / static_cast<std::size_t>(l.blocks_x));
  return coeffs.at(l.band.x + bx * l.n + col, l.band.y + by * l.n + row);
}

std::vector<std::size_t> slot_order(const QimLayout& l, Key key) {
  return keyed_permutation(l.slots(), derive_key(key, "qim-positions"));
}

// Keyed XOR mask per slot. Without it, smooth unmarked images demodulate to
// mostly zeros and null bit accuracy drifts with the payload's zero count.
std::vector<std::uint8_t> slot_mask(std::size_t n, Key key) {
  Rng rng(derive_key(key, "qim-mask"));
  std::vector<std::uint8_t> m(n);
  for (auto& b : m) b = rng.coin() ? 1 : 0;
  return m;
}

}  // namespace

std::size_t qim_slots(const QimConfig& cfg, int width, int height) {
  return layout_for(cfg, width, height).slots();
}

int resolve_redundancy(const QimConfig& cfg, int width, int height, std::size_t nbits) {
  if (nbits == 0) throw Error(ErrorCode::kEmptyPayload, "payload has no bits");
  const std::size_t slots = qim_slots(cfg, width, height);
  const std::size_t r = cfg.redundancy > 0 ? static_cast<std::size_t>(cfg.redundancy)
                                           : slots / nbits;
  if (r < 1 || r * nbits > slots) {
    throw Error(ErrorCode::kCapacity,
                "QIM capacity " + std::to_string(slots) + " slots cannot hold " +
                    std::to_string(nbits) + " bits x " + std::to_string(std::max<std::size_t>(r, 1)) +
                    " copies");
  }
  return static_cast<int>(r);
}

Image embed_bits(const Image& img, const Payload& payload, const QimConfig& cfg, Key key) {
  validate_qim(cfg);
  if (payload.length() == 0) throw Error(ErrorCode::kEmptyPayload, "embed_bits needs a payload");
  const std::size_t nbits = payload.length();
  const int copies = resolve_redundancy(cfg, img.width(), img.height(), nbits);
  const QimLayout l = layout_for(cfg, img.width(), img.height());
  const std::vector<double> basis = dct_matrix(cfg.dct_block);
  const std::vector<std::size_t> order = slot_order(l, key);
  const std::vector<std::uint8_t> mask = slot_mask(nbits * static_cast<std::size_t>(copies) + nbits, key);
  const Bits& bits = payload.bits();

  Image current = img;
  constexpr int kPasses = 4;
  for (int pass = 0; pass < kPasses; ++pass) {
    const Plane luma = luma_plane(current);
    Plane coeffs = forward_coeffs(luma, cfg, l, basis);
    bool changed = false;
    for (std::size_t b = 0; b < nbits; ++b) {
      for (int r = 0; r < copies; ++r) {
        const std::size_t i = b * static_cast<std::size_t>(copies) + r;
        double& c = slot_ref(coeffs, cfg, l, order[i]);
        const int want = bits[b] ^ mask[i];
        if (demodulate(c, cfg.step) == want && pass > 0) continue;
        const double q = quantize_to_bit(c, cfg.step, want);
        if (q != c) changed = true;
        c = q;
      }
    }
    if (!changed && pass > 0) break;
    const Plane marked = inverse_coeffs(std::move(coeffs), cfg, l, basis);
    for (int y = 0; y < current.height(); ++y) {
      for (int x = 0; x < current.width(); ++x) {
        const double delta = marked.at(x, y) - luma.at(x, y);
        for (int ch = 0; ch < current.channels(); ++ch) current.at(x, y, ch) += delta;
      }
    }
    current.clamp();
  }
  return current;
}

Bits extract_bits(const Image& img, const QimConfig& cfg, Key key, std::size_t nbits) {
  validate_qim(cfg);
  const int copies = resolve_redundancy(cfg, img.width(), img.height(), nbits);
  const QimLayout l = layout_for(cfg, img.width(), img.height());
  const std::vector<double> basis = dct_matrix(cfg.dct_block);
  const std::vector<std::size_t> order = slot_order(l, key);
  const std::size_t used = nbits * static_cast<std::size_t>(copies);
  const std::vector<std::uint8_t> mask = slot_mask(used + nbits, key);
  Plane coeffs = forward_coeffs(luma_plane(img), cfg, l, basis);
  Bits out(nbits, 0);
  for (std::size_t b = 0; b < nbits; ++b) {
    int ones = 0;
    for (int r = 0; r < copies; ++r) {
      const std::size_t i = b * static_cast<std::size_t>(copies) + r;
      ones += demodulate(slot_ref(coeffs, cfg, l, order[i]), cfg.step) ^ mask[i];
    }
    // Even-copy ties fall to a keyed coin rather than always to zero.
    out[b] = 2 * ones == copies ? mask[used + b] : (2 * ones > copies ? 1 : 0);
  }
  return out;
}

double calibrate_step(const Image& img, const Payload& payload, QimConfig cfg, Key key,
                      double min_psnr, int iterations) {
  auto passes = [&](double step) {
    cfg.step = step;
    return audit::psnr(img, embed_bits(img, payload, cfg, key)) >= min_psnr;
  };
  double lo = 0.0;
  double hi = 2.0;
  if (passes(hi)) return hi;
  for (int i = 0; i < iterations; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (passes(mid)) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  // lo == 0 means even the smallest probed step failed; hand back that step.
  return lo > 0.0 ? lo : hi;
}

// ---- Manifest rules -----------------------------------------------------------------

LabelRuleResult apply_label_rule(const DatasetManifest& manifest,
                                 const std::vector<std::string>& subset, const LabelRule& rule,
                                 Key key, std::string_view spec_ref) {
  if (manifest.task != Task::kClassification || !manifest.class_count) {
    throw Error(ErrorCode::kInvalidArgument, "label rules apply to classification datasets only");
  }
  const int classes = *manifest.class_count;
  if (rule.kind == LabelRule::Kind::kUntargeted && classes < 2) {
    throw Error(ErrorCode::kInvalidArgument, "untargeted label rule needs at least 2 classes");
  }
  if (rule.kind == LabelRule::Kind::kTargeted && (rule.target < 0 || rule.target >= classes)) {
    throw Error(ErrorCode::kLabelOutOfRange, "target label outside class range");
  }
  LabelRuleResult result{manifest, {}};
  for (const std::string& id : subset) {
    const auto idx = result.manifest.find(id);
    if (!idx) throw Error(ErrorCode::kInvalidArgument, "subset id '" + id + "' not in manifest");
    Record& rec = result.manifest.records[*idx];
    const int original = rec.label.value_or(0);
    if (rule.kind == LabelRule::Kind::kTargeted) {
      rec.label = rule.target;
    } else {
      Rng rng(derive_key(derive_key(key, "untargeted-label"), id));
      const int draw = static_cast<int>(rng.index(static_cast<std::uint64_t>(classes - 1)));
      rec.label = draw < original ? draw : draw + 1;
    }
    WatermarkAnnotation a;
    a.record_id = id;
    a.spec_ref = std::string(spec_ref);
    a.original_label = original;
    a.applied_params = {{"label_rule",
                         rule.kind == LabelRule::Kind::kTargeted ? "targeted" : "untargeted"}};
    if (rule.kind == LabelRule::Kind::kTargeted) a.applied_params["target"] = rule.target;
    result.annotations.push_back(std::move(a));
  }
  return result;
}

std::string insert_prompt_trigger(std::string_view caption, std::string_view token,
                                  TriggerPosition position) {
  if (token.empty()) return std::string(caption);
  if (caption.empty()) return std::string(token);
  if (position == TriggerPosition::kPrefix) {
    if (caption == token ||
        (caption.size() > token.size() && caption.substr(0, token.size()) == token &&
         caption[token.size()] == ' ')) {
      return std::string(caption);
    }
    return std::string(token) + " " + std::string(caption);
  }
  if (caption == token ||
      (caption.size() > token.size() &&
       caption.substr(caption.size() - token.size()) == token &&
       caption[caption.size() - token.size() - 1] == ' ')) {
    return std::string(caption);
  }
  return std::string(caption) + " " + std::string(token);
}

bool has_trigger(std::string_view caption, std::string_view token) {
  if (token.empty()) return false;
  std::size_t pos = 0;
  while ((pos = caption.find(token, pos)) != std::string_view::npos) {
    const bool left = pos == 0 || caption[pos - 1] == ' ';
    const std::size_t end = pos + token.size();
    const bool right = end == caption.size() || caption[end] == ' ';
    if (left && right) return true;
    pos = end;
  }
  return false;
}

}  // namespace wmaudit::codecs

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

#include "wmaudit/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>

namespace wmaudit {
namespace {

struct Rgb {
  double r, g, b;
};

struct NamedColor {
  const char* name;
  Rgb rgb;
};

constexpr std::array<NamedColor, 8> kPalette = {{
    {"red", {0.82, 0.18, 0.15}},
    {"green", {0.20, 0.62, 0.25}},
    {"blue", {0.17, 0.32, 0.80}},
    {"yellow", {0.90, 0.80, 0.22}},
    {"purple", {0.55, 0.25, 0.65}},
    {"orange", {0.93, 0.52, 0.16}},
    {"teal", {0.15, 0.58, 0.58}},
    {"gray", {0.55, 0.55, 0.55}},
}};

constexpr std::array<const char*, 3> kShapes = {"circle", "square", "stripe"};
constexpr std::array<const char*, 4> kScenes = {"field", "wall", "sky", "table"};

double smoothstep(double edge0, double edge1, double x) {
  const double t = std::clamp((x - edge0) / (edge1 - edge0), 0.0, 1.0);
  return t * t * (3.0 - 2.0 * t);
}

Rgb jitter(const Rgb& c, Rng& rng, double amount) {
  return {std::clamp(c.r + rng.uniform(-amount, amount), 0.0, 1.0),
          std::clamp(c.g + rng.uniform(-amount, amount), 0.0, 1.0),
          std::clamp(c.b + rng.uniform(-amount, amount), 0.0, 1.0)};
}

}  // namespace

SyntheticImage synthetic_image(Key key, int width, int height, int style) {
  Rng rng(derive_key(key, "synthetic-image"));
  Image img(width, height, 3);

  const std::size_t main_color =
      style >= 0 ? static_cast<std::size_t>(style) % kPalette.size()
                 : static_cast<std::size_t>(rng.index(kPalette.size()));
  const std::size_t bg_color = (main_color + 1 + rng.index(kPalette.size() - 1)) % kPalette.size();
  const std::size_t shape_kind =
      style >= 0 ? static_cast<std::size_t>(style) % kShapes.size()
                 : static_cast<std::size_t>(rng.index(kShapes.size()));
  const std::size_t scene = rng.index(kScenes.size());

  // Background: gradient between a muted background colour and a lighter
  // tint, plus two low-frequency shading waves.
  const Rgb bg0 = jitter(kPalette[bg_color].rgb, rng, 0.08);
  const Rgb bg1 = jitter({0.5 * bg0.r + 0.45, 0.5 * bg0.g + 0.45, 0.5 * bg0.b + 0.45}, rng, 0.05);
  const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double gx = std::cos(angle), gy = std::sin(angle);
  struct Wave {
    double fx, fy, phase, amp;
  };
  std::array<Wave, 2> waves{};
  for (auto& w : waves) {
    w = {rng.uniform(0.5, 2.5), rng.uniform(0.5, 2.5), rng.uniform(0.0, 6.28),
         rng.uniform(0.03, 0.08)};
  }
  for (int y = 0; y < height; ++y) {
    const double v = (y + 0.5) / height;
    for (int x = 0; x < width; ++x) {
      const double u = (x + 0.5) / width;
      const double t = std::clamp(0.5 + 0.7 * ((u - 0.5) * gx + (v - 0.5) * gy), 0.0, 1.0);
      double shade = 0.0;
      for (const auto& w : waves) {
        shade += w.amp * std::sin(2.0 * std::numbers::pi * (w.fx * u + w.fy * v) + w.phase);
      }
      img.at(x, y, 0) = bg0.r * (1 - t) + bg1.r * t + shade;
      img.at(x, y, 1) = bg0.g * (1 - t) + bg1.g * t + shade;
      img.at(x, y, 2) = bg0.b * (1 - t) + bg1.b * t + shade;
    }
  }

  // Foreground shapes; the first one carries the main colour.
  const int n_shapes = 2 + static_cast<int>(rng.index(4));
  const double soft = 1.2 / std::min(width, height);
  for (int s = 0; s < n_shapes; ++s) {
    const Rgb col = s == 0 ? jitter(kPalette[main_color].rgb, rng, 0.06)
                           : jitter(kPalette[rng.index(kPalette.size())].rgb, rng, 0.1);
    const std::size_t kind = s == 0 ? shape_kind : rng.index(kShapes.size());
    const double cx = rng.uniform(0.2, 0.8), cy = rng.uniform(0.2, 0.8);
    const double rx = rng.uniform(0.08, s == 0 ? 0.32 : 0.18);
    const double ry = kind == 0 ? rx * rng.uniform(0.7, 1.3) : rng.uniform(0.08, 0.25);
    const double rot = rng.uniform(0.0, std::numbers::pi);
    const double cr = std::cos(rot), sr = std::sin(rot);
    const double opacity = rng.uniform(0.75, 1.0);
    for (int y = 0; y < height; ++y) {
      const double v = (y + 0.5) / height - cy;
      for (int x = 0; x < width; ++x) {
        const double u = (x + 0.5) / width - cx;
        const double a = (u * cr + v * sr) / rx;
        const double b = (-u * sr + v * cr) / ry;
        double dist;
        if (kind == 0) {
          dist = (std::sqrt(a * a + b * b) - 1.0) * std::min(rx, ry);
        } else if (kind == 1) {
          dist = (std::max(std::abs(a), std::abs(b)) - 1.0) * std::min(rx, ry);
        } else {
          dist = (std::abs(b) - 0.35) * ry;
        }
        const double w = opacity * (1.0 - smoothstep(-soft, soft, dist));
        if (w <= 0.0) continue;
        // Slight internal shading keeps shapes from being perfectly flat.
        const double lit = 0.06 * (a * 0.5 - b * 0.5);
        img.at(x, y, 0) = img.at(x, y, 0) * (1 - w) + (col.r + lit) * w;
        img.at(x, y, 1) = img.at(x, y, 1) * (1 - w) + (col.g + lit) * w;
        img.at(x, y, 2) = img.at(x, y, 2) * (1 - w) + (col.b + lit) * w;
      }
    }
  }

  // Fine texture: mild per-pixel luminance grain.
  const double grain = rng.uniform(0.01, 0.025);
  Rng grain_rng(derive_key(key, "grain"));
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double g = grain * grain_rng.normal();
      for (int c = 0; c < 3; ++c) img.at(x, y, c) += g;
    }
  }
  img.clamp();

  std::string caption = std::string("a ") + kPalette[main_color].name + " " +
                        kShapes[shape_kind] + " over a " + kPalette[bg_color].name + " " +
                        kScenes[scene];
  return {std::move(img), std::move(caption)};
}

Dataset make_synthetic_dataset(const SyntheticOptions& options) {
  Dataset d;
  d.manifest.task = options.task;
  if (options.task == Task::kClassification) d.manifest.class_count = options.classes;
  for (std::size_t i = 0; i < options.count; ++i) {
    char id[32];
    std::snprintf(id, sizeof(id), "img_%05zu", i);
    const int style =
        options.task == Task::kClassification ? static_cast<int>(i % options.classes) : -1;
    SyntheticImage s = synthetic_image(derive_key(options.key, i), options.size,
                                       options.size, style);
    Record r;
    r.id = id;
    r.image = std::string("images/") + id + ".png";
    if (options.task == Task::kClassification) {
      r.label = style;
    } else {
      r.caption = s.caption;
    }
    d.manifest.records.push_back(std::move(r));
    d.images.push_back(std::move(s.image));
  }
  return d;
}

Image noise_image(Key key, int width, int height, int channels) {
  Rng rng(derive_key(key, "noise-image"));
  Image img(width, height, channels);
  for (double& v : img.data()) v = rng.uniform();
  return img;
}

}  // namespace wmaudit

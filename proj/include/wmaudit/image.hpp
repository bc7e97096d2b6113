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

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace wmaudit {

inline constexpr int kMinImageSide = 8;

/// Raster with interleaved channels and real-valued intensities. Pixel values
/// live in [0, 1] at every stage boundary (load, embed, attack); intermediate
/// arithmetic may leave that range before the final clamp.
class Image {
 public:
  Image() = default;
  /// Zero-filled. Throws on width/height < 8 or channels not in {1, 3}.
  Image(int width, int height, int channels);
  Image(int width, int height, int channels, double fill);
  Image(int width, int height, int channels, std::vector<double> data);

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& at(int x, int y, int c) {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }
  double at(int x, int y, int c) const {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  bool same_shape(const Image& other) const {
    return width_ == other.width_ && height_ == other.height_ &&
           channels_ == other.channels_;
  }

  void clamp();
  Image clamped() const;

  friend bool operator==(const Image&, const Image&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<double> data_;
};

/// Single-channel real array with no size floor; used for transform planes,
/// masks and intermediate buffers.
struct Plane {
  int width = 0;
  int height = 0;
  std::vector<double> data;

  Plane() = default;
  Plane(int w, int h, double fill = 0.0)
      : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

  double& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
  double at(int x, int y) const {
    return data[static_cast<std::size_t>(y) * width + x];
  }
};

/// Throws kShapeMismatch if shapes differ.
void require_same_shape(const Image& a, const Image& b, const char* what);

Plane extract_channel(const Image& img, int channel);
void store_channel(Image& img, int channel, const Plane& plane);
/// Mean over channels.
Plane luma_plane(const Image& img);

/// 8-bit quantization with round-half-to-even, then back to [0, 1].
Image quantize8(const Image& img);

/// Lossless 8-bit PNG. Gray and RGB are supported; alpha is dropped.
Image read_png(const std::filesystem::path& path);
void write_png(const Image& img, const std::filesystem::path& path);

/// Content hash over the 8-bit quantized values; stable across platforms.
std::uint64_t image_fingerprint(const Image& img);

/// Bilinear sample with border clamp; (x, y) in pixel-centre coordinates.
double sample_bilinear(const Image& img, double x, double y, int c);

/// Bilinear resize with half-pixel-centre alignment.
Image resize_bilinear(const Image& img, int width, int height);

}  // namespace wmaudit

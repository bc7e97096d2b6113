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

#include "wmaudit/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <string>
#include <string_view>

#include "wmaudit/error.hpp"
#include "wmaudit/rng.hpp"

namespace wmaudit {
namespace {

void check_dims(int width, int height, int channels) {
  if (width < kMinImageSide || height < kMinImageSide) {
    throw Error(ErrorCode::kInvalidArgument,
                "image must be at least 8x8, got " + std::to_string(width) + "x" +
                    std::to_string(height));
  }
  if (channels != 1 && channels != 3) {
    throw Error(ErrorCode::kInvalidArgument,
                "image must have 1 or 3 channels, got " + std::to_string(channels));
  }
}

std::uint8_t to_u8(double v) {
  const double scaled = std::clamp(v, 0.0, 1.0) * 255.0;
  // nearbyint honours the default FE_TONEAREST mode: round half to even.
  return static_cast<std::uint8_t>(std::nearbyint(scaled));
}

}  // namespace

Image::Image(int width, int height, int channels)
    : Image(width, height, channels, 0.0) {}

Image::Image(int width, int height, int channels, double fill)
    : width_(width), height_(height), channels_(channels) {
  check_dims(width, height, channels);
  data_.assign(static_cast<std::size_t>(width) * height * channels, fill);
}

Image::Image(int width, int height, int channels, std::vector<double> data)
    : width_(width), height_(height), channels_(channels), data_(std::move(data)) {
  check_dims(width, height, channels);
  if (data_.size() != static_cast<std::size_t>(width) * height * channels) {
    throw Error(ErrorCode::kShapeMismatch, "image data length does not match shape");
  }
}

void Image::clamp() {
  for (double& v : data_) v = std::clamp(v, 0.0, 1.0);
}

Image Image::clamped() const {
  Image out = *this;
  out.clamp();
  return out;
}

void require_same_shape(const Image& a, const Image& b, const char* what) {
  if (!a.same_shape(b)) {
    throw Error(ErrorCode::kShapeMismatch,
                std::string(what) + ": " + std::to_string(a.width()) + "x" +
                    std::to_string(a.height()) + "x" + std::to_string(a.channels()) +
                    " vs " + std::to_string(b.width()) + "x" +
                    std::to_string(b.height()) + "x" + std::to_string(b.channels()));
  }
}

Plane extract_channel(const Image& img, int channel) {
  Plane p(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) p.at(x, y) = img.at(x, y, channel);
  }
  return p;
}

void store_channel(Image& img, int channel, const Plane& plane) {
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) img.at(x, y, channel) = plane.at(x, y);
  }
}

Plane luma_plane(const Image& img) {
  Plane p(img.width(), img.height());
  const double inv = 1.0 / img.channels();
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      double s = 0.0;
      for (int c = 0; c < img.channels(); ++c) s += img.at(x, y, c);
      p.at(x, y) = s * inv;
    }
  }
  return p;
}

Image quantize8(const Image& img) {
  Image out = img;
  for (double& v : out.data()) v = to_u8(v) / 255.0;
  return out;
}

Image read_png(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw Error(ErrorCode::kMissingFile, path.string());
  }
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.c_str())) {
    throw Error(ErrorCode::kIo, "cannot read PNG " + path.string() + ": " + png.message);
  }
  const bool gray = (png.format & PNG_FORMAT_FLAG_COLOR) == 0;
  png.format = gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  const int channels = gray ? 1 : 3;
  std::vector<png_byte> buffer(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, buffer.data(), 0, nullptr)) {
    png_image_free(&png);
    throw Error(ErrorCode::kIo, "cannot decode PNG " + path.string() + ": " + png.message);
  }
  std::vector<double> data(buffer.size());
  std::transform(buffer.begin(), buffer.end(), data.begin(),
                 [](png_byte b) { return b / 255.0; });
  return Image(static_cast<int>(png.width), static_cast<int>(png.height), channels,
               std::move(data));
}

void write_png(const Image& img, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::vector<png_byte> buffer(img.size());
  std::transform(img.data().begin(), img.data().end(), buffer.begin(), to_u8);
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(img.width());
  png.height = static_cast<png_uint_32>(img.height());
  png.format = img.channels() == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&png, path.c_str(), 0, buffer.data(), 0, nullptr)) {
    throw Error(ErrorCode::kIo, "cannot write PNG " + path.string() + ": " + png.message);
  }
}

std::uint64_t image_fingerprint(const Image& img) {
  std::string bytes;
  bytes.reserve(img.size() + 16);
  bytes += std::to_string(img.width()) + "x" + std::to_string(img.height()) + "x" +
           std::to_string(img.channels()) + ":";
  for (double v : img.data()) bytes.push_back(static_cast<char>(to_u8(v)));
  return fnv1a(bytes);
}

double sample_bilinear(const Image& img, double x, double y, int c) {
  const double max_x = img.width() - 1;
  const double max_y = img.height() - 1;
  x = std::clamp(x, 0.0, max_x);
  y = std::clamp(y, 0.0, max_y);
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const int x1 = std::min(x0 + 1, img.width() - 1);
  const int y1 = std::min(y0 + 1, img.height() - 1);
  const double fx = x - x0;
  const double fy = y - y0;
  const double top = img.at(x0, y0, c) * (1.0 - fx) + img.at(x1, y0, c) * fx;
  const double bottom = img.at(x0, y1, c) * (1.0 - fx) + img.at(x1, y1, c) * fx;
  return top * (1.0 - fy) + bottom * fy;
}

Image resize_bilinear(const Image& img, int width, int height) {
  if (width == img.width() && height == img.height()) return img;
  Image out(width, height, img.channels());
  const double sx = static_cast<double>(img.width()) / width;
  const double sy = static_cast<double>(img.height()) / height;
  for (int y = 0; y < height; ++y) {
    const double src_y = (y + 0.5) * sy - 0.5;
    for (int x = 0; x < width; ++x) {
      const double src_x = (x + 0.5) * sx - 0.5;
      for (int c = 0; c < img.channels(); ++c) {
        out.at(x, y, c) = sample_bilinear(img, src_x, src_y, c);
      }
    }
  }
  return out;
}

}  // namespace wmaudit

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

#include "wmaudit/evasion.hpp"

#include <csetjmp>
#include <cstdio>
#include <jpeglib.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "wmaudit/error.hpp"

namespace wmaudit::evasion {

using nlohmann::json;

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw Error(ErrorCode::kInvalidArgument, msg);
}

// Symmetric reflection: ... b a | a b c ... c b | b a ...
int reflect_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * n;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - 1 - i;
}

}  // namespace

Image crop_resize(const Image& img, double keep) {
  require(keep > 0.0 && keep <= 1.0, "crop keep fraction must be in (0, 1]");
  const double side = std::sqrt(keep);
  const int cw = static_cast<int>(std::floor(side * img.width() + 1e-9));
  const int ch = static_cast<int>(std::floor(side * img.height() + 1e-9));
  require(cw >= kMinImageSide && ch >= kMinImageSide,
          "crop of " + std::to_string(cw) + "x" + std::to_string(ch) + " is below 8 px");
  const int x0 = (img.width() - cw) / 2;
  const int y0 = (img.height() - ch) / 2;
  Image crop(cw, ch, img.channels());
  for (int y = 0; y < ch; ++y) {
    for (int x = 0; x < cw; ++x) {
      for (int c = 0; c < img.channels(); ++c) crop.at(x, y, c) = img.at(x0 + x, y0 + y, c);
    }
  }
  return resize_bilinear(crop, img.width(), img.height());
}

Image rotate(const Image& img, double degrees) {
  const double rad = degrees * std::numbers::pi / 180.0;
  const double cs = std::cos(rad), sn = std::sin(rad);
  const double cx = 0.5 * (img.width() - 1), cy = 0.5 * (img.height() - 1);
  Image out(img.width(), img.height(), img.channels());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      // Inverse map: where does this output pixel come from?
      const double dx = x - cx, dy = y - cy;
      const double sx = cs * dx + sn * dy + cx;
      const double sy = -sn * dx + cs * dy + cy;
      const double fx = std::floor(sx), fy = std::floor(sy);
      const double wx = sx - fx, wy = sy - fy;
      const int x0 = reflect_index(static_cast<int>(fx), img.width());
      const int x1 = reflect_index(static_cast<int>(fx) + 1, img.width());
      const int y0 = reflect_index(static_cast<int>(fy), img.height());
      const int y1 = reflect_index(static_cast<int>(fy) + 1, img.height());
      for (int c = 0; c < img.channels(); ++c) {
        const double top = (1 - wx) * img.at(x0, y0, c) + wx * img.at(x1, y0, c);
        const double bot = (1 - wx) * img.at(x0, y1, c) + wx * img.at(x1, y1, c);
        out.at(x, y, c) = (1 - wy) * top + wy * bot;
      }
    }
  }
  out.clamp();
  return out;
}

Image rescale(const Image& img, double factor) {
  require(factor > 0.0 && factor <= 4.0, "rescale factor must be in (0, 4]");
  const int w = static_cast<int>(std::lround(img.width() * factor));
  const int h = static_cast<int>(std::lround(img.height() * factor));
  require(w >= kMinImageSide && h >= kMinImageSide, "rescaled image would be below 8 px");
  return resize_bilinear(resize_bilinear(img, w, h), img.width(), img.height());
}

std::vector<double> gaussian_kernel(double sigma) {
  require(sigma >= 0.0 && sigma <= 50.0, "blur sigma must be in [0, 50]");
  if (sigma == 0.0) return {1.0};
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += k[i + radius];
  }
  for (double& v : k) v /= sum;
  return k;
}

Image gaussian_blur(const Image& img, double sigma) {
  if (sigma == 0.0) return img;
  const auto k = gaussian_kernel(sigma);
  const int r = static_cast<int>(k.size() / 2);
  const int w = img.width(), h = img.height(), nc = img.channels();
  Image tmp(w, h, nc), out(w, h, nc);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < nc; ++c) {
        double s = 0.0;
        for (int i = -r; i <= r; ++i) s += k[i + r] * img.at(std::clamp(x + i, 0, w - 1), y, c);
        tmp.at(x, y, c) = s;
      }
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < nc; ++c) {
        double s = 0.0;
        for (int i = -r; i <= r; ++i) s += k[i + r] * tmp.at(x, std::clamp(y + i, 0, h - 1), c);
        out.at(x, y, c) = s;
      }
    }
  }
  out.clamp();
  return out;
}

namespace {

struct JpegError {
  jpeg_error_mgr mgr;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void on_jpeg_error(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegError*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

std::vector<unsigned char> to_bytes(const Image& img) {
  const Image q = img.clamped();
  std::vector<unsigned char> bytes(q.size());
  const auto d = q.data();
  for (std::size_t i = 0; i < d.size(); ++i) {
    bytes[i] = static_cast<unsigned char>(std::nearbyint(d[i] * 255.0));
  }
  return bytes;
}

std::vector<unsigned char> encode_jpeg(const Image& img, int quality) {
  std::vector<unsigned char> pixels = to_bytes(img);
  jpeg_compress_struct cinfo{};
  JpegError err{};
  cinfo.err = jpeg_std_error(&err.mgr);
  err.mgr.error_exit = on_jpeg_error;
  unsigned char* buffer = nullptr;
  unsigned long size = 0;
  if (setjmp(err.jump)) {
    jpeg_destroy_compress(&cinfo);
    std::free(buffer);
    throw Error(ErrorCode::kIo, std::string("jpeg encode: ") + err.message);
  }
  jpeg_create_compress(&cinfo);
  jpeg_mem_dest(&cinfo, &buffer, &size);
  cinfo.image_width = static_cast<JDIMENSION>(img.width());
  cinfo.image_height = static_cast<JDIMENSION>(img.height());
  cinfo.input_components = img.channels();
  cinfo.in_color_space = img.channels() == 3 ? JCS_RGB : JCS_GRAYSCALE;
  jpeg_set_defaults(&cinfo);
  jpeg_set_quality(&cinfo, quality, TRUE);
  cinfo.dct_method = JDCT_ISLOW;
  cinfo.optimize_coding = FALSE;
  if (img.channels() == 3) {
    cinfo.comp_info[0].h_samp_factor = 2;
    cinfo.comp_info[0].v_samp_factor = 2;
    for (int c = 1; c < 3; ++c) {
      cinfo.comp_info[c].h_samp_factor = 1;
      cinfo.comp_info[c].v_samp_factor = 1;
    }
  }
  jpeg_start_compress(&cinfo, TRUE);
  const std::size_t stride = static_cast<std::size_t>(img.width()) * img.channels();
  while (cinfo.next_scanline < cinfo.image_height) {
    JSAMPROW row = pixels.data() + cinfo.next_scanline * stride;
    jpeg_write_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_compress(&cinfo);
  jpeg_destroy_compress(&cinfo);
  std::vector<unsigned char> out(buffer, buffer + size);
  std::free(buffer);
  return out;
}

Image decode_jpeg(const std::vector<unsigned char>& data, int channels) {
  jpeg_decompress_struct cinfo{};
  JpegError err{};
  cinfo.err = jpeg_std_error(&err.mgr);
  err.mgr.error_exit = on_jpeg_error;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw Error(ErrorCode::kIo, std::string("jpeg decode: ") + err.message);
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, data.data(), static_cast<unsigned long>(data.size()));
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = channels == 3 ? JCS_RGB : JCS_GRAYSCALE;
  cinfo.dct_method = JDCT_ISLOW;
  cinfo.do_fancy_upsampling = TRUE;
  jpeg_start_decompress(&cinfo);
  const int w = static_cast<int>(cinfo.output_width), h = static_cast<int>(cinfo.output_height);
  std::vector<unsigned char> pixels(static_cast<std::size_t>(w) * h * channels);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = pixels.data() + static_cast<std::size_t>(cinfo.output_scanline) * w * channels;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  std::vector<double> values(pixels.size());
  for (std::size_t i = 0; i < pixels.size(); ++i) values[i] = pixels[i] / 255.0;
  return Image(w, h, channels, std::move(values));
}

}  // namespace

Image jpeg_compress(const Image& img, int quality) {
  require(quality >= 1 && quality <= 100, "jpeg quality must be in [1, 100]");
  return decode_jpeg(encode_jpeg(img, quality), img.channels());
}

std::vector<double> one_hot(std::span<const double> logits) {
  if (logits.empty()) throw Error(ErrorCode::kEmptyInput, "one_hot of empty logits");
  std::vector<double> out(logits.size(), 0.0);
  out[std::max_element(logits.begin(), logits.end()) - logits.begin()] = 1.0;
  return out;
}

std::vector<double> perturb_logits(std::span<const double> logits, double level, Key key) {
  require(level >= 0.0 && level <= 1.0, "logit perturbation level must be in [0, 1]");
  std::vector<double> out(logits.begin(), logits.end());
  if (level == 0.0 || out.empty()) return out;
  double norm = 0.0;
  for (double v : out) norm += v * v;
  norm = std::sqrt(norm);
  // Keyed direction, uniform on the sphere.
  Rng rng(key);
  std::vector<double> u(out.size());
  double un = 0.0;
  do {
    un = 0.0;
    for (double& v : u) {
      v = rng.normal();
      un += v * v;
    }
  } while (un == 0.0);
  un = std::sqrt(un);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += level * norm * u[i] / un;
  return out;
}

// ---- attack specs --------------------------------------------------------------

const std::vector<AttackInfo>& attack_catalog() {
  static const std::vector<AttackInfo> catalog = {
      {"crop", "central crop keeping an area fraction, resized back {keep: 0.8}",
       {{"keep", 0.8}}, false},
      {"rotate", "rotation about the centre; random_sign draws +/- per image {degrees: 15, "
                 "random_sign: true}",
       {{"degrees", 15.0}, {"random_sign", true}}, false},
      {"rescale", "down-sample then up-sample to the original size {factor: 0.5}",
       {{"factor", 0.5}}, false},
      {"blur", "separable Gaussian blur {sigma: 1.0}", {{"sigma", 1.0}}, false},
      {"jpeg", "baseline JPEG round trip {quality: 70}", {{"quality", 70}}, false},
      {"one-hot", "replace output logits by the one-hot argmax {}", json::object(), true},
      {"logit-perturb", "logits + level*|logits|*u along a keyed random direction {level: 0.1}",
       {{"level", 0.1}}, true},
  };
  return catalog;
}

const AttackInfo& find_attack(std::string_view kind) {
  for (const auto& a : attack_catalog()) {
    if (a.kind == kind) return a;
  }
  throw Error(ErrorCode::kUnknownAttack, "no attack named '" + std::string(kind) + "'");
}

namespace {

void check_attack_params(const AttackSpec& s) {
  const json& p = s.params;
  try {
    if (s.kind == "crop") {
      const double keep = p.at("keep").get<double>();
      require(keep > 0.0 && keep <= 1.0, "crop keep must be in (0, 1]");
    } else if (s.kind == "rotate") {
      const double d = p.at("degrees").get<double>();
      require(std::abs(d) <= 360.0, "rotate degrees must be within [-360, 360]");
      (void)p.at("random_sign").get<bool>();
    } else if (s.kind == "rescale") {
      const double f = p.at("factor").get<double>();
      require(f > 0.0 && f <= 4.0, "rescale factor must be in (0, 4]");
    } else if (s.kind == "blur") {
      const double sg = p.at("sigma").get<double>();
      require(sg >= 0.0 && sg <= 50.0, "blur sigma must be in [0, 50]");
    } else if (s.kind == "jpeg") {
      const int q = p.at("quality").get<int>();
      require(q >= 1 && q <= 100, "jpeg quality must be in [1, 100]");
    } else if (s.kind == "logit-perturb") {
      const double l = p.at("level").get<double>();
      require(l >= 0.0 && l <= 1.0, "logit perturbation level must be in [0, 1]");
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, "attack '" + s.kind + "' parameters: " + e.what());
  }
}

std::string format_number(const json& v) {
  if (v.is_number_float()) {
    std::ostringstream os;
    os << v.get<double>();
    return os.str();
  }
  return v.dump();
}

}  // namespace

AttackSpec attack_from_json(const json& j) {
  if (!j.is_object() || !j.contains("kind")) {
    throw Error(ErrorCode::kMissingField, "attack entries need a \"kind\"");
  }
  AttackSpec s;
  s.kind = j.at("kind").get<std::string>();
  const AttackInfo& info = find_attack(s.kind);
  s.params = info.defaults;
  if (j.contains("params")) {
    for (const auto& [k, v] : j.at("params").items()) {
      if (!s.params.contains(k)) {
        throw Error(ErrorCode::kInvalidArgument,
                    "attack '" + s.kind + "' has no parameter '" + k + "'");
      }
      s.params[k] = v;
    }
  }
  if (j.contains("key")) s.key = j.at("key").get<Key>();
  if (j.contains("stage")) {
    const auto st = j.at("stage").get<std::string>();
    if (st == "pre") {
      s.stage = Stage::kPre;
    } else if (st == "post") {
      s.stage = Stage::kPost;
    } else {
      throw Error(ErrorCode::kInvalidArgument, "attack stage must be \"pre\" or \"post\"");
    }
  }
  if (info.on_logits && s.stage == Stage::kPre) {
    throw Error(ErrorCode::kInvalidArgument, "logit attacks only apply to model outputs");
  }
  check_attack_params(s);
  return s;
}

json attack_to_json(const AttackSpec& s) {
  nlohmann::ordered_json j;
  j["kind"] = s.kind;
  j["params"] = nlohmann::ordered_json::parse(s.params.dump());
  j["key"] = s.key;
  j["stage"] = s.stage == Stage::kPre ? "pre" : "post";
  return json::parse(j.dump());
}

std::vector<AttackSpec> parse_chain(const json& j) {
  if (j.is_null()) return {};
  if (!j.is_array()) throw Error(ErrorCode::kParse, "attack chain must be a JSON list");
  std::vector<AttackSpec> chain;
  for (const auto& e : j) chain.push_back(attack_from_json(e));
  return chain;
}

json chain_to_json(const std::vector<AttackSpec>& chain) {
  json out = json::array();
  for (const auto& s : chain) out.push_back(attack_to_json(s));
  return out;
}

std::string chain_label(const std::vector<AttackSpec>& chain) {
  if (chain.empty()) return "none";
  std::string out;
  for (const auto& s : chain) {
    if (!out.empty()) out += "+";
    out += s.kind;
    std::string args;
    for (const auto& [k, v] : s.params.items()) {
      if (!args.empty()) args += ",";
      args += k + "=" + format_number(v);
    }
    if (!args.empty()) out += "(" + args + ")";
    if (s.stage == Stage::kPre) out += "@pre";
  }
  return out;
}

Image apply_attack(const Image& img, const AttackSpec& s, Key instance) {
  const json& p = s.params;
  if (s.kind == "crop") return crop_resize(img, p.at("keep").get<double>());
  if (s.kind == "rotate") {
    double deg = p.at("degrees").get<double>();
    if (p.at("random_sign").get<bool>()) {
      Rng rng(derive_key(derive_key(s.key, "rotate-sign"), instance));
      if (rng.coin()) deg = -deg;
    }
    return rotate(img, deg);
  }
  if (s.kind == "rescale") return rescale(img, p.at("factor").get<double>());
  if (s.kind == "blur") return gaussian_blur(img, p.at("sigma").get<double>());
  if (s.kind == "jpeg") return jpeg_compress(img, p.at("quality").get<int>());
  if (find_attack(s.kind).on_logits) {
    throw Error(ErrorCode::kInvalidArgument, "attack '" + s.kind + "' applies to logits");
  }
  throw Error(ErrorCode::kUnknownAttack, "no attack named '" + s.kind + "'");
}

std::vector<double> apply_logit_attack(std::span<const double> logits, const AttackSpec& s,
                                       Key instance) {
  if (s.kind == "one-hot") return one_hot(logits);
  if (s.kind == "logit-perturb") {
    return perturb_logits(logits, s.params.at("level").get<double>(),
                          derive_key(derive_key(s.key, "logit-noise"), instance));
  }
  throw Error(ErrorCode::kInvalidArgument, "attack '" + s.kind + "' does not apply to logits");
}

Image apply_image_chain(const Image& img, const std::vector<AttackSpec>& chain, Stage stage,
                        Key instance) {
  Image out = img;
  for (const auto& s : chain) {
    if (s.stage != stage || find_attack(s.kind).on_logits) continue;
    out = apply_attack(out, s, instance);
  }
  return out;
}

std::vector<double> apply_logit_chain(std::span<const double> logits,
                                      const std::vector<AttackSpec>& chain, Key instance) {
  std::vector<double> out(logits.begin(), logits.end());
  for (const auto& s : chain) {
    if (!find_attack(s.kind).on_logits) continue;
    out = apply_logit_attack(out, s, instance);
  }
  return out;
}

}  // namespace wmaudit::evasion

// Copyright 2026 The muxgel Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include "muxgel/error.hpp"

namespace muxgel {

/// Planar float image. Channel c occupies data()[c*W*H, (c+1)*W*H), each plane
/// row-major. Unsigned images hold intensities in [0,1]; signed images
/// (tactile residuals) hold differences in [-1,1] and are never clamped by
/// compositing operations.
class Image {
 public:
  Image() = default;
  Image(int width, int height, int channels, float fill = 0.0f,
        bool is_signed = false)
      : width_(width), height_(height), channels_(channels),
        signed_(is_signed) {
    if (width < 0 || height < 0) throw ShapeError("negative image size");
    if (channels != 1 && channels != 3)
      throw ShapeError("images have 1 or 3 channels, got " +
                       std::to_string(channels));
    data_.assign(static_cast<std::size_t>(width) * height * channels, fill);
  }

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  bool is_signed() const { return signed_; }
  void set_signed(bool s) { signed_ = s; }
  bool empty() const { return data_.empty(); }

  std::size_t pixel_count() const {
    return static_cast<std::size_t>(width_) * height_;
  }
  std::size_t size() const { return data_.size(); }

  float& at(int x, int y, int c = 0) { return data_[index(x, y, c)]; }
  float at(int x, int y, int c = 0) const { return data_[index(x, y, c)]; }

  std::span<float> plane(int c) {
    return {data_.data() + static_cast<std::size_t>(c) * pixel_count(),
            pixel_count()};
  }
  std::span<const float> plane(int c) const {
    return {data_.data() + static_cast<std::size_t>(c) * pixel_count(),
            pixel_count()};
  }

  std::vector<float>& data() { return data_; }
  const std::vector<float>& data() const { return data_; }

  bool same_size(const Image& o) const {
    return width_ == o.width_ && height_ == o.height_;
  }
  bool same_shape(const Image& o) const {
    return same_size(o) && channels_ == o.channels_;
  }

  static Image constant(int width, int height, int channels, float value) {
    return Image(width, height, channels, value);
  }

 private:
  std::size_t index(int x, int y, int c) const {
    return (static_cast<std::size_t>(c) * height_ + y) * width_ + x;
  }

  int width_ = 0;
  int height_ = 0;
  int channels_ = 1;
  bool signed_ = false;
  std::vector<float> data_;
};

/// Single-plane weight field in [0,1].
class Mask {
 public:
  Mask() = default;
  Mask(int width, int height, float fill = 0.0f)
      : width_(width), height_(height) {
    if (width < 0 || height < 0) throw ShapeError("negative mask size");
    data_.assign(static_cast<std::size_t>(width) * height, fill);
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }

  float& at(int x, int y) {
    return data_[static_cast<std::size_t>(y) * width_ + x];
  }
  float at(int x, int y) const {
    return data_[static_cast<std::size_t>(y) * width_ + x];
  }

  std::vector<float>& data() { return data_; }
  const std::vector<float>& data() const { return data_; }

  bool same_size(const Image& img) const {
    return width_ == img.width() && height_ == img.height();
  }
  bool same_size(const Mask& o) const {
    return width_ == o.width_ && height_ == o.height_;
  }

  bool is_binary() const {
    return std::all_of(data_.begin(), data_.end(),
                       [](float v) { return v == 0.0f || v == 1.0f; });
  }

  double mean() const {
    if (data_.empty()) return 0.0;
    double s = 0.0;
    for (float v : data_) s += v;
    return s / static_cast<double>(data_.size());
  }

  std::size_t count_nonzero() const {
    return static_cast<std::size_t>(
        std::count_if(data_.begin(), data_.end(), [](float v) { return v != 0.0f; }));
  }

  /// 1 - m. Involutive when the weights are binary or dyadic.
  Mask complement() const {
    Mask out(width_, height_);
    for (std::size_t i = 0; i < data_.size(); ++i) out.data_[i] = 1.0f - data_[i];
    return out;
  }

  Image to_image() const {
    Image img(width_, height_, 1);
    std::copy(data_.begin(), data_.end(), img.data().begin());
    return img;
  }

  /// Builds a mask from a single-channel image, clamping to [0,1].
  static Mask from_image(const Image& img) {
    if (img.channels() != 1)
      throw ShapeError("mask images must be single-channel");
    Mask m(img.width(), img.height());
    for (std::size_t i = 0; i < m.data_.size(); ++i)
      m.data_[i] = std::clamp(img.data()[i], 0.0f, 1.0f);
    return m;
  }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<float> data_;
};

/// Bitwise equality of the pixel payloads (distinguishes -0 and NaN payloads).
inline bool bit_equal(const Image& a, const Image& b) {
  return a.same_shape(b) &&
         std::memcmp(a.data().data(), b.data().data(),
                     a.size() * sizeof(float)) == 0;
}

inline bool bit_equal(const Mask& a, const Mask& b) {
  return a.same_size(b) &&
         std::memcmp(a.data().data(), b.data().data(),
                     a.size() * sizeof(float)) == 0;
}

inline float clamp_unit(float v) { return std::clamp(v, 0.0f, 1.0f); }

/// Clamps to the image's declared range: [0,1], or [-1,1] when signed.
inline void clamp_range(Image& img) {
  const float lo = img.is_signed() ? -1.0f : 0.0f;
  for (float& v : img.data()) v = std::clamp(v, lo, 1.0f);
}

inline Image flip_horizontal(const Image& img) {
  Image out = img;
  for (int c = 0; c < img.channels(); ++c)
    for (int y = 0; y < img.height(); ++y)
      for (int x = 0; x < img.width(); ++x)
        out.at(x, y, c) = img.at(img.width() - 1 - x, y, c);
  return out;
}

inline Mask flip_horizontal(const Mask& m) {
  Mask out = m;
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x) out.at(x, y) = m.at(m.width() - 1 - x, y);
  return out;
}

namespace detail {

inline void require_same_size(int w1, int h1, int w2, int h2, const char* op) {
  if (w1 != w2 || h1 != h2)
    throw ShapeError(std::string(op) + ": size mismatch " + std::to_string(w1) +
                     "x" + std::to_string(h1) + " vs " + std::to_string(w2) +
                     "x" + std::to_string(h2));
}

inline int clamp_index(int i, int n) { return std::clamp(i, 0, n - 1); }

enum class Border { replicate, zero };

/// Correlates one plane with a 1-D kernel along x then y (taps centred on
/// index kernel.size()/2). Accumulates in double.
inline std::vector<double> separable_filter(std::span<const double> in, int w,
                                            int h, std::span<const double> kx,
                                            std::span<const double> ky,
                                            Border border) {
  const int rx = static_cast<int>(kx.size() / 2);
  const int ry = static_cast<int>(ky.size() / 2);
  std::vector<double> tmp(in.size()), out(in.size());
  for (int y = 0; y < h; ++y) {
    const double* row = in.data() + static_cast<std::size_t>(y) * w;
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int t = -rx; t <= rx; ++t) {
        int xx = x + t;
        if (xx < 0 || xx >= w) {
          if (border == Border::zero) continue;
          xx = clamp_index(xx, w);
        }
        s += kx[t + rx] * row[xx];
      }
      tmp[static_cast<std::size_t>(y) * w + x] = s;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int t = -ry; t <= ry; ++t) {
        int yy = y + t;
        if (yy < 0 || yy >= h) {
          if (border == Border::zero) continue;
          yy = clamp_index(yy, h);
        }
        s += ky[t + ry] * tmp[static_cast<std::size_t>(yy) * w + x];
      }
      out[static_cast<std::size_t>(y) * w + x] = s;
    }
  }
  return out;
}

/// Normalized Gaussian taps, radius ceil(3 sigma). sigma <= 0 gives {1}.
inline std::vector<double> gaussian_kernel(double sigma) {
  if (sigma <= 0.0) return {1.0};
  const int r = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * r + 1);
  double s = 0.0;
  for (int t = -r; t <= r; ++t) {
    k[t + r] = std::exp(-0.5 * t * t / (sigma * sigma));
    s += k[t + r];
  }
  for (double& v : k) v /= s;
  return k;
}

inline std::vector<float> gaussian_blur_plane(std::span<const float> in, int w,
                                              int h, double sigma) {
  if (sigma <= 0.0) return {in.begin(), in.end()};
  const auto k = gaussian_kernel(sigma);
  std::vector<double> d(in.begin(), in.end());
  const auto out = separable_filter(d, w, h, k, k, Border::replicate);
  return {out.begin(), out.end()};
}

}  // namespace detail

/// Per-pixel, per-channel product. A single-channel operand broadcasts over
/// the other operand's channels. Result clamped to [0,1].
inline Image hadamard(const Image& a, const Image& b) {
  detail::require_same_size(a.width(), a.height(), b.width(), b.height(),
                            "hadamard");
  if (a.channels() != b.channels() && a.channels() != 1 && b.channels() != 1)
    throw ShapeError("hadamard: channel mismatch");
  const int channels = std::max(a.channels(), b.channels());
  Image out(a.width(), a.height(), channels);
  for (int c = 0; c < channels; ++c) {
    auto pa = a.plane(a.channels() == 1 ? 0 : c);
    auto pb = b.plane(b.channels() == 1 ? 0 : c);
    auto po = out.plane(c);
    for (std::size_t i = 0; i < po.size(); ++i) po[i] = clamp_unit(pa[i] * pb[i]);
  }
  return out;
}

/// m*a + (1-m)*b per pixel, the mask broadcast over channels. Equal operands
/// pass through untouched and the result is held inside [min(a,b), max(a,b)].
inline Image mask_blend(const Mask& m, const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw ShapeError("mask_blend: operand shape mismatch");
  detail::require_same_size(m.width(), m.height(), a.width(), a.height(),
                            "mask_blend");
  Image out(a.width(), a.height(), a.channels(), 0.0f,
            a.is_signed() || b.is_signed());
  const auto& w = m.data();
  for (int c = 0; c < a.channels(); ++c) {
    auto pa = a.plane(c);
    auto pb = b.plane(c);
    auto po = out.plane(c);
    for (std::size_t i = 0; i < po.size(); ++i) {
      const float av = pa[i];
      const float bv = pb[i];
      if (av == bv) {
        po[i] = av;
        continue;
      }
      // The weight pair is derived from whichever of w and 1-w is >= 0.5,
      // where the subtraction is exact; the swapped call with the complement
      // mask then forms the same two products.
      const float wi = w[i];
      float p, q;
      if (wi >= 0.5f) {
        p = wi;
        q = 1.0f - wi;
      } else {
        q = 1.0f - wi;
        p = 1.0f - q;
      }
      const float v = p * av + q * bv;
      po[i] = std::clamp(v, std::min(av, bv), std::max(av, bv));
    }
  }
  return out;
}

/// Number of taps of the disk kernel {dx^2 + dy^2 <= r^2}.
inline int disk_tap_count(double radius) {
  const int r = static_cast<int>(std::floor(radius));
  int n = 0;
  for (int dy = -r; dy <= r; ++dy)
    for (int dx = -r; dx <= r; ++dx)
      if (dx * dx + dy * dy <= radius * radius) ++n;
  return n;
}

/// Defocus blur with a normalized flat disk kernel; edges replicated.
inline Image disk_blur(const Image& img, double radius) {
  if (radius < 0.0) throw ConfigError("disk_blur: negative radius");
  if (radius < 1.0) return img;
  const int r = static_cast<int>(std::floor(radius));
  std::vector<int> offs_x, offs_y;
  for (int dy = -r; dy <= r; ++dy)
    for (int dx = -r; dx <= r; ++dx)
      if (dx * dx + dy * dy <= radius * radius) {
        offs_x.push_back(dx);
        offs_y.push_back(dy);
      }
  const double taps = static_cast<double>(offs_x.size());
  const int w = img.width();
  const int h = img.height();
  Image out(w, h, img.channels(), 0.0f, img.is_signed());
  for (int c = 0; c < img.channels(); ++c) {
    auto src = img.plane(c);
    auto dst = out.plane(c);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double s = 0.0;
        for (std::size_t k = 0; k < offs_x.size(); ++k) {
          const int xx = detail::clamp_index(x + offs_x[k], w);
          const int yy = detail::clamp_index(y + offs_y[k], h);
          s += src[static_cast<std::size_t>(yy) * w + xx];
        }
        dst[static_cast<std::size_t>(y) * w + x] = static_cast<float>(s / taps);
      }
    }
  }
  return out;
}

/// Separable Gaussian blur of every channel, edges replicated.
inline Image gaussian_blur(const Image& img, double sigma) {
  Image out = img;
  for (int c = 0; c < img.channels(); ++c) {
    const auto p = detail::gaussian_blur_plane(img.plane(c), img.width(),
                                               img.height(), sigma);
    std::copy(p.begin(), p.end(), out.plane(c).begin());
  }
  return out;
}

}  // namespace muxgel

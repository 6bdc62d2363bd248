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

#include <png.h>

#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "muxgel/error.hpp"
#include "muxgel/image.hpp"

namespace muxgel {

inline std::uint8_t quantize_u8(float v) {
  return static_cast<std::uint8_t>(std::lround(clamp_unit(v) * 255.0f));
}

inline float dequantize_u8(std::uint8_t v) { return static_cast<float>(v) / 255.0f; }

/// 8-bit PNG export (grayscale for 1 channel, RGB for 3). Values are clamped
/// to [0,1] and rounded.
inline void write_png(const std::filesystem::path& path, const Image& img) {
  const int w = img.width();
  const int h = img.height();
  const int ch = img.channels();
  std::vector<std::uint8_t> buf(static_cast<std::size_t>(w) * h * ch);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < ch; ++c)
        buf[(static_cast<std::size_t>(y) * w + x) * ch + c] = quantize_u8(img.at(x, y, c));

  png_image pi;
  std::memset(&pi, 0, sizeof pi);
  pi.version = PNG_IMAGE_VERSION;
  pi.width = static_cast<png_uint_32>(w);
  pi.height = static_cast<png_uint_32>(h);
  pi.format = ch == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&pi, path.string().c_str(), 0, buf.data(), 0,
                               nullptr)) {
    std::string msg = pi.message;
    png_image_free(&pi);
    throw IoError("cannot write " + path.string() + ": " + msg);
  }
}

inline void write_png(const std::filesystem::path& path, const Mask& m) {
  write_png(path, m.to_image());
}

/// Loads an 8-bit PNG as a 1-channel (grayscale) or 3-channel image.
inline Image read_png(const std::filesystem::path& path) {
  png_image pi;
  std::memset(&pi, 0, sizeof pi);
  pi.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&pi, path.string().c_str()))
    throw IoError("cannot read " + path.string() + ": " + pi.message);
  const bool color = (pi.format & PNG_FORMAT_FLAG_COLOR) != 0;
  pi.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  const int ch = color ? 3 : 1;
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(pi));
  if (!png_image_finish_read(&pi, nullptr, buf.data(), 0, nullptr)) {
    std::string msg = pi.message;
    png_image_free(&pi);
    throw IoError("cannot decode " + path.string() + ": " + msg);
  }
  const int w = static_cast<int>(pi.width);
  const int h = static_cast<int>(pi.height);
  Image img(w, h, ch);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < ch; ++c)
        img.at(x, y, c) = dequantize_u8(buf[(static_cast<std::size_t>(y) * w + x) * ch + c]);
  return img;
}

inline Mask read_png_mask(const std::filesystem::path& path) {
  return Mask::from_image(read_png(path));
}

// MUXF: "MUXF", u32 width, u32 height, u32 channels (all little-endian),
// followed by width*height*channels little-endian float32 in planar order.

namespace detail {

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace detail

inline std::vector<std::uint8_t> encode_muxf(const Image& img) {
  std::vector<std::uint8_t> out;
  out.reserve(16 + img.size() * 4);
  for (char c : {'M', 'U', 'X', 'F'}) out.push_back(static_cast<std::uint8_t>(c));
  detail::put_u32(out, static_cast<std::uint32_t>(img.width()));
  detail::put_u32(out, static_cast<std::uint32_t>(img.height()));
  detail::put_u32(out, static_cast<std::uint32_t>(img.channels()));
  for (float v : img.data()) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    detail::put_u32(out, bits);
  }
  return out;
}

/// Decodes a MUXF buffer. The container carries no range flag; `is_signed`
/// tags the result.
inline Image decode_muxf(const std::vector<std::uint8_t>& buf, bool is_signed,
                         const std::string& what = "MUXF buffer") {
  if (buf.size() < 16 || std::memcmp(buf.data(), "MUXF", 4) != 0)
    throw IoError(what + ": bad MUXF magic");
  const auto w = detail::get_u32(buf.data() + 4);
  const auto h = detail::get_u32(buf.data() + 8);
  const auto ch = detail::get_u32(buf.data() + 12);
  if (ch != 1 && ch != 3) throw IoError(what + ": unsupported channel count");
  const std::size_t n = static_cast<std::size_t>(w) * h * ch;
  if (buf.size() != 16 + n * 4)
    throw IoError(what + ": payload length does not match header");
  Image img(static_cast<int>(w), static_cast<int>(h), static_cast<int>(ch), 0.0f,
            is_signed);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint32_t bits = detail::get_u32(buf.data() + 16 + 4 * i);
    std::memcpy(&img.data()[i], &bits, 4);
  }
  return img;
}

inline void write_bytes(const std::filesystem::path& path,
                        const std::vector<std::uint8_t>& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("write failed: " + path.string());
}

inline std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

inline void write_muxf(const std::filesystem::path& path, const Image& img) {
  write_bytes(path, encode_muxf(img));
}

inline Image read_muxf(const std::filesystem::path& path, bool is_signed = false) {
  return decode_muxf(read_bytes(path), is_signed, path.string());
}

}  // namespace muxgel

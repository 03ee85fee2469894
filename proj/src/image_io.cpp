/*
 * Copyright (c) 2026 The CAIR Authors
 *
 * Licensed under the Apache License, Version 2.0;
 * You may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an 'AS IS' BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "cair/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <vector>

namespace cair {

namespace {

std::vector<uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Tensor<float> from_interleaved(const uint8_t* rgb, int64_t height, int64_t width) {
  Tensor<float> img = Tensor<float>::empty(Shape{1, 3, height, width});
  auto d = img.mutable_data();
  const int64_t plane = height * width;
  for (int64_t i = 0; i < plane; ++i)
    for (int64_t c = 0; c < 3; ++c)
      d[static_cast<size_t>(c * plane + i)] = static_cast<float>(rgb[i * 3 + c]) / 255.0f;
  return img;
}

std::vector<uint8_t> to_interleaved(const Tensor<float>& img, const std::string& path) {
  const Shape& s = img.shape();
  if (s.rank() != 4 || s.n() != 1 || s.c() != 3)
    throw ContractError("cannot write '" + path + "': expected [1,3,H,W], got " + s.str());
  const int64_t plane = s.h() * s.w();
  std::vector<uint8_t> rgb(static_cast<size_t>(plane * 3));
  const auto d = img.data();
  for (int64_t i = 0; i < plane; ++i)
    for (int64_t c = 0; c < 3; ++c) {
      const float v = std::clamp(d[static_cast<size_t>(c * plane + i)], 0.0f, 1.0f);
      rgb[static_cast<size_t>(i * 3 + c)] = static_cast<uint8_t>(std::lround(v * 255.0f));
    }
  return rgb;
}

Tensor<float> decode_png(const std::vector<uint8_t>& bytes, const std::string& path, bool convert) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size()))
    throw IoError("cannot decode PNG '" + path + "': " + image.message);
  if (image.format != PNG_FORMAT_RGB && !convert) {
    png_image_free(&image);
    throw IoError("'" + path + "' is not 8-bit RGB (conversion disabled)");
  }
  image.format = PNG_FORMAT_RGB;
  std::vector<uint8_t> rgb(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, rgb.data(), 0, nullptr))
    throw IoError("cannot decode PNG '" + path + "': " + image.message);
  return from_interleaved(rgb.data(), image.height, image.width);
}

// PPM header token, skipping whitespace and '#' comments.
int64_t ppm_token(const std::vector<uint8_t>& b, size_t& pos, const std::string& path) {
  while (pos < b.size()) {
    if (b[pos] == '#') {
      while (pos < b.size() && b[pos] != '\n') ++pos;
    } else if (std::isspace(b[pos])) {
      ++pos;
    } else {
      break;
    }
  }
  int64_t v = 0;
  size_t start = pos;
  while (pos < b.size() && std::isdigit(b[pos])) {
    v = v * 10 + (b[pos] - '0');
    if (v > (int64_t{1} << 30)) throw IoError("bad PPM header in '" + path + "'");
    ++pos;
  }
  if (pos == start) throw IoError("bad PPM header in '" + path + "'");
  return v;
}

Tensor<float> decode_ppm(const std::vector<uint8_t>& b, const std::string& path, bool convert) {
  const bool gray = b[1] == '5';
  if (gray && !convert) throw IoError("'" + path + "' is grayscale (conversion disabled)");
  size_t pos = 2;
  const int64_t width = ppm_token(b, pos, path);
  const int64_t height = ppm_token(b, pos, path);
  const int64_t maxval = ppm_token(b, pos, path);
  if (maxval < 1 || maxval > 255)
    throw IoError("'" + path + "': only 8-bit PPM is supported (maxval " + std::to_string(maxval) + ")");
  ++pos;  // single whitespace before the raster
  const int64_t channels = gray ? 1 : 3;
  if (width < 1 || height < 1 || b.size() < pos + static_cast<size_t>(width * height * channels))
    throw IoError("truncated PPM '" + path + "'");
  std::vector<uint8_t> rgb(static_cast<size_t>(width * height * 3));
  for (int64_t i = 0; i < width * height; ++i)
    for (int64_t c = 0; c < 3; ++c) {
      const int64_t v = b[pos + static_cast<size_t>(i * channels + (gray ? 0 : c))];
      rgb[static_cast<size_t>(i * 3 + c)] = static_cast<uint8_t>((v * 255 + maxval / 2) / maxval);
    }
  return from_interleaved(rgb.data(), height, width);
}

}  // namespace

Tensor<float> load_image(const std::string& path, LoadOptions opts) {
  const std::vector<uint8_t> bytes = read_file(path);
  static constexpr uint8_t kPngSig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  if (bytes.size() >= 8 && std::memcmp(bytes.data(), kPngSig, 8) == 0)
    return decode_png(bytes, path, opts.convert);
  if (bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == '6' || bytes[1] == '5'))
    return decode_ppm(bytes, path, opts.convert);
  throw IoError("'" + path + "' is neither PNG nor binary PPM");
}

void save_png(const std::string& path, const Tensor<float>& img) {
  const std::vector<uint8_t> rgb = to_interleaved(img, path);
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.shape().w());
  image.height = static_cast<png_uint_32>(img.shape().h());
  image.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&image, path.c_str(), 0, rgb.data(), 0, nullptr))
    throw IoError("cannot write PNG '" + path + "': " + image.message);
}

void save_ppm(const std::string& path, const Tensor<float>& img) {
  const std::vector<uint8_t> rgb = to_interleaved(img, path);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << "P6\n" << img.shape().w() << ' ' << img.shape().h() << "\n255\n";
  out.write(reinterpret_cast<const char*>(rgb.data()), static_cast<std::streamsize>(rgb.size()));
  if (!out) throw IoError("write failed for '" + path + "'");
}

void save_image(const std::string& path, const Tensor<float>& img) {
  if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".ppm") == 0)
    save_ppm(path, img);
  else
    save_png(path, img);
}

}  // namespace cair

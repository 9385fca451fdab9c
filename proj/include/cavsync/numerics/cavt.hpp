// Copyright 2026 The cavsync Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef CAVSYNC_NUMERICS_CAVT_HPP_
#define CAVSYNC_NUMERICS_CAVT_HPP_

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "cavsync/errors.hpp"
#include "cavsync/numerics/tensor.hpp"

// CAVT tensor files: "CAVT", u32 rank, rank x u32 extents, then the payload
// as row-major float32. Every integer and float is little-endian.

namespace cavsync {

/// Plain float32 n-d array, the on-disk representation of data and weights.
struct FloatArray {
  Shape shape;
  std::vector<float> data;

  std::size_t numel() const { return data.size(); }
  bool operator==(const FloatArray&) const = default;
};

inline FloatArray to_float_array(const Tensor& t) {
  FloatArray a{t.shape(), {}};
  a.data.reserve(t.numel());
  for (double v : t.data()) a.data.push_back(static_cast<float>(v));
  return a;
}

inline Tensor to_tensor(const FloatArray& a, bool requires_grad = false) {
  return Tensor(a.shape, std::vector<double>(a.data.begin(), a.data.end()), requires_grad);
}

namespace cavt_detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

inline std::uint32_t get_u32(const unsigned char* p) {
  return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
         (std::uint32_t(p[3]) << 24);
}

}  // namespace cavt_detail

inline std::string encode_cavt(const FloatArray& a) {
  if (a.shape.empty() || shape_numel(a.shape) != a.data.size()) {
    throw ShapeError("encode_cavt: shape " + shape_str(a.shape) + " does not match " +
                     std::to_string(a.data.size()) + " values");
  }
  std::string out = "CAVT";
  cavt_detail::put_u32(out, static_cast<std::uint32_t>(a.shape.size()));
  for (auto e : a.shape) cavt_detail::put_u32(out, static_cast<std::uint32_t>(e));
  for (float f : a.data) cavt_detail::put_u32(out, std::bit_cast<std::uint32_t>(f));
  return out;
}

inline FloatArray decode_cavt(const std::string& bytes, const std::string& origin = "<memory>") {
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < 8 || std::memcmp(p, "CAVT", 4) != 0) {
    throw LoadError(origin + ": not a CAVT tensor (bad magic)");
  }
  const std::uint32_t rank = cavt_detail::get_u32(p + 4);
  if (rank == 0 || bytes.size() < 8 + 4 * std::size_t(rank)) {
    throw LoadError(origin + ": truncated CAVT header");
  }
  FloatArray a;
  for (std::uint32_t i = 0; i < rank; ++i) {
    const std::uint32_t e = cavt_detail::get_u32(p + 8 + 4 * i);
    if (e == 0) throw LoadError(origin + ": zero extent in CAVT header");
    a.shape.push_back(e);
  }
  const std::size_t header = 8 + 4 * std::size_t(rank);
  const std::size_t n = shape_numel(a.shape);
  if (bytes.size() != header + 4 * n) {
    throw LoadError(origin + ": CAVT payload is " + std::to_string(bytes.size() - header) +
                    " bytes, expected " + std::to_string(4 * n) + " for shape " +
                    shape_str(a.shape));
  }
  a.data.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    a.data[i] = std::bit_cast<float>(cavt_detail::get_u32(p + header + 4 * i));
  }
  return a;
}

inline void write_cavt(const std::filesystem::path& path, const FloatArray& a) {
  const std::string bytes = encode_cavt(a);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw LoadError("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), std::streamsize(bytes.size()));
  if (!out) throw LoadError("failed writing " + path.string());
}

inline FloatArray read_cavt(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_cavt(bytes, path.string());
}

}  // namespace cavsync

#endif  // CAVSYNC_NUMERICS_CAVT_HPP_

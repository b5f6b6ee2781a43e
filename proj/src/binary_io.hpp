// Copyright 2026 The promptvc Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef PROMPTVC_BINARY_IO_HPP
#define PROMPTVC_BINARY_IO_HPP

// Little-endian primitives shared by the VTF/VTC/VTM readers and writers.

#include "promptvc/common.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <type_traits>

namespace promptvc::detail {

template <typename T>
T byteswap_if_big(T value) {
  if constexpr (std::endian::native == std::endian::little) {
    return value;
  } else {
    std::array<unsigned char, sizeof(T)> bytes;
    std::memcpy(bytes.data(), &value, sizeof(T));
    std::reverse(bytes.begin(), bytes.end());
    std::memcpy(&value, bytes.data(), sizeof(T));
    return value;
  }
}

class BinaryWriter {
 public:
  explicit BinaryWriter(const std::filesystem::path& path)
      : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw Error(Errc::io_failure, "cannot open for writing: " + path.string());
  }

  void magic(const char (&tag)[5]) { out_.write(tag, 4); }

  template <typename T>
  void put(T value) {
    static_assert(std::is_arithmetic_v<T>);
    value = byteswap_if_big(value);
    out_.write(reinterpret_cast<const char*>(&value), sizeof(T));
  }

  template <typename Derived>
  void put_f32_payload(const Eigen::DenseBase<Derived>& values) {
    for (Index r = 0; r < values.rows(); ++r)
      for (Index c = 0; c < values.cols(); ++c) put(static_cast<float>(values(r, c)));
  }

  void finish() {
    out_.flush();
    if (!out_) throw Error(Errc::io_failure, "write failed: " + path_.string());
  }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

class BinaryReader {
 public:
  explicit BinaryReader(const std::filesystem::path& path)
      : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw Error(Errc::io_failure, "cannot open for reading: " + path.string());
  }

  void expect_magic(const char (&tag)[5]) {
    char got[4] = {};
    in_.read(got, 4);
    if (in_.gcount() != 4) throw Error(Errc::truncated, "truncated header: " + path_.string());
    if (std::memcmp(got, tag, 4) != 0)
      throw Error(Errc::bad_magic, std::string("bad magic (expected ") + tag + "): " + path_.string());
  }

  template <typename T>
  T get() {
    T value{};
    in_.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (in_.gcount() != static_cast<std::streamsize>(sizeof(T)))
      throw Error(Errc::truncated, "truncated file: " + path_.string());
    return byteswap_if_big(value);
  }

  void expect_version(std::uint32_t expected) {
    const auto version = get<std::uint32_t>();
    if (version != expected)
      throw Error(Errc::version_mismatch,
                  "unsupported format version " + std::to_string(version) + ": " + path_.string());
  }

  RowMatrixXf get_f32_payload(std::uint64_t rows, std::uint64_t cols) {
    // Guard the allocation against a corrupt header before reading.
    const auto here = in_.tellg();
    in_.seekg(0, std::ios::end);
    const auto end = in_.tellg();
    in_.seekg(here);
    const std::uint64_t available = static_cast<std::uint64_t>(end - here);
    if (cols != 0 && rows > available / 4 / cols)
      throw Error(Errc::truncated, "truncated payload: " + path_.string());
    RowMatrixXf out(static_cast<Index>(rows), static_cast<Index>(cols));
    const auto bytes = static_cast<std::streamsize>(out.size() * sizeof(float));
    in_.read(reinterpret_cast<char*>(out.data()), bytes);
    if (in_.gcount() != bytes) throw Error(Errc::truncated, "truncated payload: " + path_.string());
    if constexpr (std::endian::native != std::endian::little) {
      for (Index i = 0; i < out.size(); ++i) out.data()[i] = byteswap_if_big(out.data()[i]);
    }
    return out;
  }

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::ifstream in_;
};

}  // namespace promptvc::detail

#endif  // PROMPTVC_BINARY_IO_HPP

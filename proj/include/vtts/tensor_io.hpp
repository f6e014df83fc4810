// SPDX-License-Identifier: Apache-2.0
//
// On-disk formats. All integers little-endian.
//
// Tensor file:  magic "VTTS", version u32, ndim u32, dims u32 each,
//               payload IEEE-754 32-bit values, row-major.
// Checkpoint:   magic "VTTSCKPT", version u32, then named blocks:
//               name length u32, UTF-8 name, ndim u32, dims u32 each,
//               IEEE-754 64-bit values.
// PGM:          binary P5, 8-bit, pixel = round(255 * value).
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "vtts/common.hpp"

namespace vtts::io {

constexpr uint32_t kTensorVersion = 1;
constexpr uint32_t kCheckpointVersion = 1;

struct TensorData {
  std::vector<uint32_t> dims;
  std::vector<float> values;  // row-major, product(dims) entries
};

void write_tensor(const std::string& path, const TensorData& t);
TensorData read_tensor(const std::string& path);
/// Reads only the header; cheap existence/shape validation.
std::vector<uint32_t> read_tensor_dims(const std::string& path);

void write_tensor(const std::string& path, const Mat& m);  // 2D convenience
Mat read_tensor_mat(const std::string& path);

/// Named f64 blocks; map iteration order (lexicographic) is the file order.
struct BlockFile {
  std::map<std::string, std::pair<std::vector<uint32_t>, std::vector<double>>> blocks;

  void put(const std::string& name, std::vector<uint32_t> dims, std::vector<double> values);
  void put_scalar(const std::string& name, double v);
  void put_vector(const std::string& name, const std::vector<double>& v);
  const std::vector<double>& get(const std::string& name) const;
  double get_scalar(const std::string& name) const;
  bool has(const std::string& name) const { return blocks.count(name) != 0; }
};

void write_block_file(const std::string& path, const BlockFile& f);
BlockFile read_block_file(const std::string& path);

void write_pgm(const std::string& path, const Mat& image);

}  // namespace vtts::io

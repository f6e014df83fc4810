// SPDX-License-Identifier: Apache-2.0
#include "vtts/tensor_io.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace vtts::io {

namespace {

void put_u32(std::ostream& os, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xFF),
                        static_cast<unsigned char>((v >> 8) & 0xFF),
                        static_cast<unsigned char>((v >> 16) & 0xFF),
                        static_cast<unsigned char>((v >> 24) & 0xFF)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t get_u32(std::istream& is, const std::string& path) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4))
    throw IoError(path + ": truncated file");
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

void put_f32(std::ostream& os, float v) {
  uint32_t u;
  std::memcpy(&u, &v, 4);
  put_u32(os, u);
}

float get_f32(std::istream& is, const std::string& path) {
  uint32_t u = get_u32(is, path);
  float v;
  std::memcpy(&v, &u, 4);
  return v;
}

void put_f64(std::ostream& os, double v) {
  uint64_t u;
  std::memcpy(&u, &v, 8);
  put_u32(os, static_cast<uint32_t>(u & 0xFFFFFFFFULL));
  put_u32(os, static_cast<uint32_t>(u >> 32));
}

double get_f64(std::istream& is, const std::string& path) {
  uint64_t lo = get_u32(is, path);
  uint64_t hi = get_u32(is, path);
  uint64_t u = lo | (hi << 32);
  double v;
  std::memcpy(&v, &u, 8);
  return v;
}

uint64_t product(const std::vector<uint32_t>& dims) {
  uint64_t p = 1;
  for (uint32_t d : dims) p *= d;
  return p;
}

}  // namespace

void write_tensor(const std::string& path, const TensorData& t) {
  if (t.values.size() != product(t.dims))
    throw IoError(path + ": payload length does not match dims");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path);
  os.write("VTTS", 4);
  put_u32(os, kTensorVersion);
  put_u32(os, static_cast<uint32_t>(t.dims.size()));
  for (uint32_t d : t.dims) put_u32(os, d);
  for (float v : t.values) put_f32(os, v);
  if (!os) throw IoError("write failed: " + path);
}

namespace {

std::vector<uint32_t> read_tensor_header(std::ifstream& is, const std::string& path) {
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, "VTTS", 4) != 0)
    throw IoError(path + ": not a VTTS tensor file");
  uint32_t version = get_u32(is, path);
  if (version != kTensorVersion)
    throw IoError(path + ": unsupported tensor version " + std::to_string(version));
  uint32_t ndim = get_u32(is, path);
  if (ndim > 16) throw IoError(path + ": implausible ndim");
  std::vector<uint32_t> dims(ndim);
  for (auto& d : dims) d = get_u32(is, path);
  return dims;
}

}  // namespace

TensorData read_tensor(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open: " + path);
  TensorData t;
  t.dims = read_tensor_header(is, path);
  uint64_t n = product(t.dims);
  t.values.resize(n);
  for (uint64_t i = 0; i < n; ++i) t.values[i] = get_f32(is, path);
  return t;
}

std::vector<uint32_t> read_tensor_dims(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open: " + path);
  return read_tensor_header(is, path);
}

void write_tensor(const std::string& path, const Mat& m) {
  TensorData t;
  t.dims = {static_cast<uint32_t>(m.rows), static_cast<uint32_t>(m.cols)};
  t.values.assign(m.a.begin(), m.a.end());
  write_tensor(path, t);
}

Mat read_tensor_mat(const std::string& path) {
  TensorData t = read_tensor(path);
  if (t.dims.size() != 2) throw IoError(path + ": expected a 2-D tensor");
  Mat m(static_cast<int>(t.dims[0]), static_cast<int>(t.dims[1]));
  for (size_t i = 0; i < t.values.size(); ++i) m.a[i] = t.values[i];
  return m;
}

void BlockFile::put(const std::string& name, std::vector<uint32_t> dims,
                    std::vector<double> values) {
  if (values.size() != product(dims))
    throw IoError("block " + name + ": payload length does not match dims");
  blocks[name] = {std::move(dims), std::move(values)};
}

void BlockFile::put_scalar(const std::string& name, double v) { put(name, {1}, {v}); }

void BlockFile::put_vector(const std::string& name, const std::vector<double>& v) {
  put(name, {static_cast<uint32_t>(v.size())}, v);
}

const std::vector<double>& BlockFile::get(const std::string& name) const {
  auto it = blocks.find(name);
  if (it == blocks.end()) throw IoError("checkpoint block missing: " + name);
  return it->second.second;
}

double BlockFile::get_scalar(const std::string& name) const {
  const auto& v = get(name);
  if (v.size() != 1) throw IoError("checkpoint block " + name + " is not a scalar");
  return v[0];
}

void write_block_file(const std::string& path, const BlockFile& f) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path);
  os.write("VTTSCKPT", 8);
  put_u32(os, kCheckpointVersion);
  for (const auto& [name, block] : f.blocks) {
    put_u32(os, static_cast<uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u32(os, static_cast<uint32_t>(block.first.size()));
    for (uint32_t d : block.first) put_u32(os, d);
    for (double v : block.second) put_f64(os, v);
  }
  if (!os) throw IoError("write failed: " + path);
}

BlockFile read_block_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open: " + path);
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, "VTTSCKPT", 8) != 0)
    throw IoError(path + ": not a VTTS checkpoint");
  uint32_t version = get_u32(is, path);
  if (version != kCheckpointVersion)
    throw IoError(path + ": unsupported checkpoint version " + std::to_string(version));
  BlockFile f;
  while (true) {
    is.peek();
    if (is.eof()) break;
    uint32_t name_len = get_u32(is, path);
    if (name_len > 4096) throw IoError(path + ": implausible block name length");
    std::string name(name_len, '\0');
    if (!is.read(name.data(), name_len)) throw IoError(path + ": truncated block name");
    uint32_t ndim = get_u32(is, path);
    if (ndim > 16) throw IoError(path + ": implausible block ndim");
    std::vector<uint32_t> dims(ndim);
    for (auto& d : dims) d = get_u32(is, path);
    uint64_t n = product(dims);
    std::vector<double> values(n);
    for (uint64_t i = 0; i < n; ++i) values[i] = get_f64(is, path);
    f.blocks[name] = {std::move(dims), std::move(values)};
  }
  return f;
}

void write_pgm(const std::string& path, const Mat& image) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path);
  os << "P5\n" << image.cols << " " << image.rows << "\n255\n";
  for (double v : image.a) {
    double clamped = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
    unsigned char b = static_cast<unsigned char>(std::lround(255.0 * clamped));
    os.write(reinterpret_cast<const char*>(&b), 1);
  }
  if (!os) throw IoError("write failed: " + path);
}

}  // namespace vtts::io

// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "vtts/tensor_io.hpp"

using namespace vtts;

namespace {

std::string tmp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

std::string read_bytes(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  REQUIRE(is.good());
  return std::string(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("tensor file round-trips bit-exactly for random shapes") {
  Rng rng(321);
  for (int iter = 0; iter < 20; ++iter) {
    io::TensorData t;
    int nd = rng.uniform_int(1, 4);
    for (int d = 0; d < nd; ++d) t.dims.push_back(rng.uniform_int(1, 6));
    size_t n = 1;
    for (auto d : t.dims) n *= d;
    for (size_t i = 0; i < n; ++i)
      t.values.push_back(static_cast<float>(rng.uniform(-100.0, 100.0)));
    std::string path = tmp_path("vtts_t_" + std::to_string(iter) + ".vt");
    io::write_tensor(path, t);
    auto back = io::read_tensor(path);
    CHECK(back.dims == t.dims);
    REQUIRE(back.values.size() == t.values.size());
    for (size_t i = 0; i < n; ++i) CHECK(back.values[i] == t.values[i]);
    std::remove(path.c_str());
  }
}

TEST_CASE("tensor file header layout is as documented") {
  io::TensorData t;
  t.dims = {2, 3};
  t.values = {1, 2, 3, 4, 5, 6};
  std::string path = tmp_path("vtts_hdr.vt");
  io::write_tensor(path, t);
  std::string bytes = read_bytes(path);
  REQUIRE(bytes.size() == 4 + 4 + 4 + 8 + 24);
  CHECK(bytes.substr(0, 4) == "VTTS");
  CHECK(static_cast<unsigned char>(bytes[4]) == 1);  // version u32 LE
  CHECK(static_cast<unsigned char>(bytes[8]) == 2);  // ndim
  CHECK(static_cast<unsigned char>(bytes[12]) == 2);
  CHECK(static_cast<unsigned char>(bytes[16]) == 3);
  std::remove(path.c_str());
}

TEST_CASE("tensor reader rejects bad magic and truncation") {
  std::string path = tmp_path("vtts_bad.vt");
  {
    std::ofstream os(path, std::ios::binary);
    os << "NOPE1234";
  }
  CHECK_THROWS_AS(io::read_tensor(path), IoError);
  {
    std::ofstream os(path, std::ios::binary);
    os << "VTTS";  // truncated header
  }
  CHECK_THROWS_AS(io::read_tensor(path), IoError);
  std::remove(path.c_str());
  CHECK_THROWS_AS(io::read_tensor(path), IoError);  // missing file
}

TEST_CASE("block file round-trips doubles bit-exactly") {
  io::BlockFile f;
  Rng rng(99);
  std::vector<double> v1, v2;
  for (int i = 0; i < 40; ++i) v1.push_back(rng.uniform(-1e6, 1e6));
  for (int i = 0; i < 7; ++i) v2.push_back(rng.normal());
  f.put("alpha.w", {8, 5}, v1);
  f.put_vector("beta.b", v2);
  f.put_scalar("meta.step", 12345.0);
  std::string path = tmp_path("vtts_blocks.ckpt");
  io::write_block_file(path, f);
  auto back = io::read_block_file(path);
  CHECK(back.get("alpha.w") == v1);
  CHECK(back.get("beta.b") == v2);
  CHECK(back.get_scalar("meta.step") == 12345.0);
  CHECK(back.blocks.at("alpha.w").first == std::vector<uint32_t>{8, 5});
  std::string bytes = read_bytes(path);
  CHECK(bytes.substr(0, 8) == "VTTSCKPT");
  std::remove(path.c_str());
  CHECK_THROWS_AS(io::read_block_file(path), IoError);
}

TEST_CASE("checkpoint block layout is as documented") {
  io::BlockFile f;
  f.put("ab", {2}, {1.5, -2.0});
  std::string path = tmp_path("vtts_layout.ckpt");
  io::write_block_file(path, f);
  std::string bytes = read_bytes(path);
  // magic(8) version(4) name_len(4) name(2) ndim(4) dim(4) payload(16)
  REQUIRE(bytes.size() == 8 + 4 + 4 + 2 + 4 + 4 + 16);
  CHECK(bytes.substr(0, 8) == "VTTSCKPT");
  CHECK(static_cast<unsigned char>(bytes[8]) == 1);    // version, LE u32
  CHECK(static_cast<unsigned char>(bytes[12]) == 2);   // name length
  CHECK(bytes.substr(16, 2) == "ab");
  CHECK(static_cast<unsigned char>(bytes[18]) == 1);   // ndim
  CHECK(static_cast<unsigned char>(bytes[22]) == 2);   // dims[0]
  double v0, v1;
  std::memcpy(&v0, bytes.data() + 26, 8);              // IEEE-754 64-bit LE
  std::memcpy(&v1, bytes.data() + 34, 8);
  CHECK(v0 == 1.5);
  CHECK(v1 == -2.0);
  std::remove(path.c_str());
}

TEST_CASE("pgm export writes P5 with rounded 8-bit pixels") {
  Mat img(2, 3, 0.0);
  img.at(0, 0) = 1.0;
  img.at(0, 1) = 0.5;
  img.at(1, 2) = 2.0;  // clamped
  std::string path = tmp_path("vtts_img.pgm");
  io::write_pgm(path, img);
  std::string bytes = read_bytes(path);
  std::string header = "P5\n3 2\n255\n";
  REQUIRE(bytes.size() == header.size() + 6);
  CHECK(bytes.substr(0, header.size()) == header);
  CHECK(static_cast<unsigned char>(bytes[header.size() + 0]) == 255);
  CHECK(static_cast<unsigned char>(bytes[header.size() + 1]) == 128);
  CHECK(static_cast<unsigned char>(bytes[header.size() + 5]) == 255);
  std::remove(path.c_str());
}

// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "vagg/errors.hpp"
#include "vagg/io.hpp"
#include "vagg/synthdata.hpp"

using namespace vagg;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "vagg_test_io";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("dataset round trip is exact") {
  GenConfig g;
  g.num_subjects = 7;
  g.seed = 3;
  Dataset d = generate(g);
  d[0].still[0] = 1e-310;  // subnormal
  d[1].frames[2][5] = -0.0;
  std::stringstream ss;
  write_dataset(ss, d);
  const Dataset back = read_dataset(ss);
  CHECK(back == d);
  CHECK(std::signbit(back[1].frames[2][5]));

  const fs::path p = scratch("d.jsonl");
  save_dataset(p, d);
  CHECK(load_dataset(p) == d);
}

TEST_CASE("dataset reader accepts unlabelled and out-of-order frames") {
  std::stringstream ss;
  ss << R"({"subject":"b","kind":"frame","video":"b_v0","frame":1,"values":[3,4]})" << '\n'
     << R"({"subject":"a","kind":"still","values":[1,2]})" << "\n\n"
     << R"({"subject":"b","kind":"frame","video":"b_v0","frame":0,"values":[5,6]})" << '\n'
     << R"({"subject":"b","kind":"still","values":[7,8]})" << '\n'
     << R"({"subject":"a","kind":"frame","video":"a_v0","frame":0,"values":[9,10]})" << '\n';
  const Dataset d = read_dataset(ss);
  REQUIRE(d.size() == 2);
  CHECK(d[0].id == "b");
  CHECK(d[0].frames == std::vector<Embedding>{{5, 6}, {3, 4}});
  CHECK(d[0].corrupted.empty());
  CHECK(d[1].still == Embedding{1, 2});
}

TEST_CASE("dataset reader rejects bad input") {
  auto bad = [](const std::string& text) {
    std::stringstream ss(text);
    CHECK_THROWS_AS(read_dataset(ss), ValidationError);
  };
  bad("{not json\n");
  bad(R"({"subject":"a","kind":"still","values":[1,2]})" "\n");  // no frames
  bad(R"({"subject":"a","kind":"frame","video":"v","frame":0,"values":[1]})" "\n");  // no still
  bad(R"({"subject":"a","kind":"still","values":[1,2]})" "\n" R"({"subject":"a","kind":"frame","video":"v","frame":0,"values":[1]})" "\n");
  bad(R"({"subject":"a","kind":"blob","values":[1]})" "\n");
  bad(R"({"subject":"a","kind":"still","values":[1]})" "\n" R"({"subject":"a","kind":"still","values":[1]})" "\n");
  bad(R"({"subject":"a","kind":"still","values":[1]})" "\n"
      R"({"subject":"a","kind":"frame","video":"v","frame":0,"values":[1]})" "\n"
      R"({"subject":"a","kind":"frame","video":"w","frame":1,"values":[1]})" "\n");
  bad(R"({"subject":"a","kind":"still","values":[]})" "\n");
  bad(R"({"subject":"a","kind":"still","values":["x"]})" "\n");
  CHECK_THROWS_AS(load_dataset(scratch("missing.jsonl")), ValidationError);
}

TEST_CASE("checkpoint round trip is bit-identical") {
  Checkpoint c;
  c.encoder = EncoderConfig::make(8, 2, 2);
  c.train.seed = 12;
  c.loss_trace = {0.5, 0.25, 0.125};
  c.train_fraction = 0.25;
  c.split_seed = 99;
  c.params = init_params(c.encoder, 4);
  c.params.layers[1].b2[0] = -0.0;
  const fs::path m = scratch("ck.json");
  save_checkpoint(m, c);
  CHECK(fs::exists(blob_path_for(m)));
  CHECK(fs::file_size(blob_path_for(m)) == parameter_count(c.params) * 8);
  const Checkpoint back = load_checkpoint(m);
  CHECK(back.encoder == c.encoder);
  CHECK(back.train == c.train);
  CHECK(back.loss_trace == c.loss_trace);
  CHECK(back.train_fraction == c.train_fraction);
  CHECK(back.split_seed == c.split_seed);
  CHECK(encode_params(back.params) == encode_params(c.params));
}

TEST_CASE("checkpoint blob layout") {
  const EncoderConfig cfg = EncoderConfig::make(2, 1, 1);
  EncoderParams p = EncoderParams::zeros(cfg);
  p.layers[0].wq[0](0, 0) = 1.0;
  p.layers[0].b2[1] = -2.0;
  const auto blob = encode_params(p);
  double first, last;
  std::memcpy(&first, blob.data(), 8);
  std::memcpy(&last, blob.data() + blob.size() - 8, 8);
  CHECK(first == 1.0);
  CHECK(last == -2.0);
  CHECK(blob[7] == 0x3f);  // little-endian high byte of 1.0
  CHECK(decode_params(blob, cfg) == p);
  CHECK_THROWS_AS(decode_params({1, 2, 3}, cfg), ValidationError);
}

TEST_CASE("checkpoint validation") {
  Checkpoint c;
  c.encoder = EncoderConfig::make(4, 2, 1);
  c.params = init_params(c.encoder, 1);
  const fs::path m = scratch("v.json");
  save_checkpoint(m, c);

  {
    std::fstream f(blob_path_for(m), std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(3);
    f.put('\x7f');
  }
  CHECK_THROWS_AS(load_checkpoint(m), ValidationError);

  save_checkpoint(m, c);
  fs::resize_file(blob_path_for(m), 16);
  CHECK_THROWS_AS(load_checkpoint(m), ValidationError);

  std::ofstream(scratch("junk.json")) << "{\"format\":\"other\"}";
  CHECK_THROWS_AS(load_checkpoint(scratch("junk.json")), ValidationError);
  CHECK_THROWS_AS(save_checkpoint(scratch("x.bin"), c), ValidationError);
}

TEST_CASE("csv number formatting") {
  CHECK(format_double(0.1) == "0.10000000000000001");
  CHECK(format_double(1.0) == "1");
  CHECK(format_double(0.25) == "0.25");
  CHECK(std::stod(format_double(1.0 / 3.0)) == 1.0 / 3.0);
}

#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "skpd/io.hpp"

using namespace skpd;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "skpd_io_tests";
  fs::create_directories(dir);
  return dir / name;
}

std::vector<unsigned char> slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("SKT roundtrip is bit exact") {
  oracle::TestRng rng(1);
  for (const Dims& d : {Dims{3, 4, 5}, Dims{7}, Dims{2, 2}, Dims{1, 2, 3, 4}}) {
    NdArray a = rng.array(d);
    const auto path = scratch("a.skt").string();
    write_skt(path, a);
    NdArray b = read_skt(path);
    CHECK(b == a);
    write_skt(scratch("b.skt").string(), b);
    CHECK(slurp(path) == slurp(scratch("b.skt")));
  }
  NdArray special({4}, {0.0, -0.0, 1e-310, -1.5e300});
  NdArray back = decode_skt(encode_skt(special));
  CHECK(std::signbit(back[1]));
  CHECK(back == special);
}

TEST_CASE("SKT header layout") {
  NdArray a({2, 3}, 1.0);
  auto bytes = encode_skt(a);
  REQUIRE(bytes.size() == 4 + 2 + 2 + 16 + 48);
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "SKPD");
  CHECK(bytes[4] == 1);
  CHECK(bytes[5] == 0);
  CHECK(bytes[6] == 2);
  CHECK(bytes[8] == 2);
  CHECK(bytes[16] == 3);
}

TEST_CASE("SKT errors are distinct") {
  NdArray a({3, 4}, 2.0);
  auto bytes = encode_skt(a);

  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(decode_skt(bad_magic), SktBadMagic);

  auto bad_version = bytes;
  bad_version[4] = 9;
  try {
    decode_skt(bad_version);
    FAIL("expected SktBadVersion");
  } catch (const SktBadVersion& e) {
    CHECK(e.version() == 9);
  }

  auto cut = bytes;
  cut.resize(cut.size() - 5);
  try {
    decode_skt(cut);
    FAIL("expected SktTruncated");
  } catch (const SktTruncated& e) {
    CHECK(e.expected_bytes() == 120);
    CHECK(e.actual_bytes() == 115);
    const std::string msg = e.what();
    CHECK(msg.find("120") != std::string::npos);
    CHECK(msg.find("115") != std::string::npos);
  }
  std::vector<unsigned char> header_only(bytes.begin(), bytes.begin() + 10);
  CHECK_THROWS_AS(decode_skt(header_only), SktTruncated);
  CHECK_THROWS_AS(read_skt(scratch("missing.skt").string() + ".nope"), IoError);
}

TEST_CASE("PGM scaling") {
  const auto path = scratch("c.pgm").string();
  write_pgm(path, NdArray({3, 5}, 4.2));
  NdArray g = read_pgm(path);
  CHECK(g.dims() == Dims{3, 5});
  for (double v : g.values()) CHECK(v == 128.0);

  NdArray ramp({2, 3}, {-1.0, 0.0, 0.5, 1.0, 2.0, 3.0});
  write_pgm(path, ramp);
  g = read_pgm(path);
  CHECK(g[0] == 0.0);
  CHECK(g[5] == 255.0);
  for (std::size_t i = 1; i < 6; ++i) CHECK(g[i] >= g[i - 1]);

  NdArray mask({2, 2}, {0, 1, 1, 0});
  write_mask_pgm(path, mask);
  g = read_pgm(path);
  CHECK(g.values() == std::vector<double>{0, 255, 255, 0});
}

TEST_CASE("CSV roundtrip") {
  oracle::TestRng rng(2);
  NdArray a = rng.array({4, 7});
  a[3] = 1e-300;
  const auto path = scratch("a.csv").string();
  write_csv(path, a);
  NdArray b = read_csv(path);
  REQUIRE(b.dims() == a.dims());
  CHECK(oracle::max_abs_diff(a, b) <= 1e-12);
}

TEST_CASE("slices and heatmap export") {
  oracle::TestRng rng(3);
  NdArray v = rng.array({3, 4, 5});
  NdArray s = slice(v, 1, 2);
  CHECK(s.dims() == Dims{3, 5});
  CHECK(s(2, 4) == v(2, 2, 4));
  NdArray s0 = slice(v, 0, 1);
  CHECK(s0(3, 0) == v(1, 3, 0));
  CHECK_THROWS(slice(v, 3, 0));

  const auto path = scratch("h.pgm").string();
  export_heatmap(v, path, "pgm");
  CHECK(read_pgm(path).dims() == Dims{4, 5});
  export_heatmap(s, scratch("h.csv").string(), "csv");
  CHECK(oracle::max_abs_diff(read_csv(scratch("h.csv").string()), s) <= 1e-12);
  CHECK_THROWS(export_heatmap(s, path, "png"));
  CHECK_THROWS_AS(write_pgm("/nonexistent-dir/x.pgm", s), IoError);
}

TEST_CASE("manifest roundtrip") {
  Manifest m;
  m.set("kind", "multi_term");
  m.set("rank", "3");
  m.set("lambda_tgt", format_double(0.1));
  m.set("rank", "2");
  const auto path = scratch("manifest.txt").string();
  m.write(path);
  Manifest r = Manifest::read(path);
  CHECK(r.entries() == m.entries());
  CHECK(r.get("rank") == "2");
  CHECK(std::stod(r.get("lambda_tgt")) == 0.1);
  CHECK(r.get_or("missing", "x") == "x");
  CHECK_THROWS_AS(r.get("missing"), IoError);
  CHECK(format_double(1.0 / 3.0) == "0.3333333333333333");
}

#include <doctest.h>

#include <cstdint>
#include <fstream>

#include "pf/flow_io.hpp"
#include "pf/image.hpp"
#include "test_util.hpp"

using namespace pf;

namespace {

void write_bytes(const std::string& path, const std::vector<std::uint8_t>& b) {
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(b.data()), b.size());
}

std::vector<std::uint8_t> read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_SUITE("image") {

TEST_CASE("ppm of white pixels loads as ones") {
  testutil::TempDir td("ppm");
  std::vector<std::uint8_t> file{'P', '6', '\n', '2', ' ', '2', '\n',
                                 '2', '5', '5', '\n'};
  for (int i = 0; i < 12; ++i) file.push_back(255);
  write_bytes(td.file("w.ppm"), file);
  Image img = load_image(td.file("w.ppm"));
  CHECK(img.width == 2);
  CHECK(img.height == 2);
  CHECK(img.channels == 3);
  for (double v : img.data) CHECK(v == doctest::Approx(1.0));
}

TEST_CASE("pgm gradient normalizes by maxval") {
  testutil::TempDir td("pgm");
  std::vector<std::uint8_t> file{'P', '5', '\n', '2', '5', '6', ' ', '1',
                                 '\n', '2', '5', '5', '\n'};
  for (int i = 0; i < 256; ++i) file.push_back(static_cast<std::uint8_t>(i));
  write_bytes(td.file("g.pgm"), file);
  Image img = load_image(td.file("g.pgm"));
  CHECK(img.channels == 1);
  for (int i = 0; i < 256; ++i)
    CHECK(img.at(i, 0) == doctest::Approx(i / 255.0));
}

TEST_CASE("comments and odd maxval are honored") {
  testutil::TempDir td("pgm2");
  std::string header = "P5\n# a comment\n2 1\n# another\n100\n";
  std::vector<std::uint8_t> file(header.begin(), header.end());
  file.push_back(50);
  file.push_back(100);
  write_bytes(td.file("c.pgm"), file);
  Image img = load_image(td.file("c.pgm"));
  CHECK(img.at(0, 0) == doctest::Approx(0.5));
  CHECK(img.at(1, 0) == doctest::Approx(1.0));
}

TEST_CASE("truncated file raises a decode error naming the path") {
  testutil::TempDir td("trunc");
  std::vector<std::uint8_t> file{'P', '5', '\n', '4', ' ', '4', '\n',
                                 '2', '5', '5', '\n', 1, 2, 3};
  write_bytes(td.file("t.pgm"), file);
  CHECK_THROWS_WITH_AS(load_image(td.file("t.pgm")),
                       doctest::Contains("t.pgm"), std::runtime_error);
}

TEST_CASE("save and reload round-trips quantized values") {
  testutil::TempDir td("rt");
  Image img = testutil::noise_image(9, 7, 5);
  save_image(img, td.file("n.pgm"));
  Image back = load_image(td.file("n.pgm"));
  REQUIRE(back.width == 9);
  REQUIRE(back.height == 7);
  for (size_t i = 0; i < img.data.size(); ++i)
    CHECK(back.data[i] == doctest::Approx(img.data[i]).epsilon(0.005));
}

TEST_CASE("sample_bilinear basics") {
  Image img(3, 3, 1);
  img.at(0, 0) = 0.0;
  img.at(1, 0) = 1.0;
  CHECK(sample_bilinear(img, 1, 0) == doctest::Approx(1.0));
  CHECK(sample_bilinear(img, 0.5, 0) == doctest::Approx(0.5));
  CHECK(sample_bilinear(img, -5, -5) == doctest::Approx(img.at(0, 0)));
  CHECK(sample_bilinear(img, 50, 50) == doctest::Approx(img.at(2, 2)));
}

TEST_CASE("luma weights") {
  Image img(1, 1, 3);
  img.at(0, 0, 0) = 1.0;
  CHECK(img.luma(0, 0) == doctest::Approx(0.299));
  img.at(0, 0, 0) = 0;
  img.at(0, 0, 1) = 1.0;
  CHECK(img.luma(0, 0) == doctest::Approx(0.587));
}

TEST_CASE("warp_backward with zero and constant flows") {
  Image img = testutil::noise_image(12, 10, 3);
  SUBCASE("zero flow is identity") {
    FlowField flow(12, 10);
    std::fill(flow.valid.begin(), flow.valid.end(), 1);
    Image out = warp_backward(img, flow);
    for (size_t i = 0; i < img.data.size(); ++i)
      CHECK(out.data[i] == doctest::Approx(img.data[i]));
  }
  SUBCASE("constant flow (5,0) samples 5 px to the right") {
    FlowField flow(12, 10);
    std::fill(flow.valid.begin(), flow.valid.end(), 1);
    std::fill(flow.u.begin(), flow.u.end(), 5.f);
    Image out = warp_backward(img, flow);
    for (int y = 0; y < 10; ++y)
      for (int x = 0; x + 5 < 12; ++x)
        CHECK(out.at(x, y) == doctest::Approx(img.at(x + 5, y)));
  }
  SUBCASE("invalid pixels go black or copy the nearest valid value") {
    FlowField flow(12, 10);
    std::fill(flow.valid.begin(), flow.valid.end(), 1);
    flow.valid[flow.idx(4, 4)] = 0;
    Image black = warp_backward(img, flow, HoleMode::black);
    CHECK(black.at(4, 4) == doctest::Approx(0.0));
    Image near = warp_backward(img, flow, HoleMode::nearest);
    // a 4-neighbor of (4,4) provided the value
    bool matches_neighbor =
        near.at(4, 4) == doctest::Approx(img.at(3, 4)).epsilon(1e-12) ||
        near.at(4, 4) == doctest::Approx(img.at(5, 4)).epsilon(1e-12) ||
        near.at(4, 4) == doctest::Approx(img.at(4, 3)).epsilon(1e-12) ||
        near.at(4, 4) == doctest::Approx(img.at(4, 5)).epsilon(1e-12);
    CHECK(matches_neighbor);
  }
}

TEST_CASE("flo single-pixel byte layout") {
  testutil::TempDir td("flo1");
  FlowField flow(1, 1);
  flow.u[0] = 3.f;
  flow.v[0] = -2.f;
  flow.valid[0] = 1;
  write_flo(flow, td.file("a.flo"));
  auto bytes = read_bytes(td.file("a.flo"));
  REQUIRE(bytes.size() == 20);
  // 202021.25f = 0x48454950 ("PIEH" little-endian)
  CHECK(bytes[0] == 'P');
  CHECK(bytes[1] == 'I');
  CHECK(bytes[2] == 'E');
  CHECK(bytes[3] == 'H');
  CHECK(bytes[4] == 1);   // width int32
  CHECK(bytes[8] == 1);   // height int32
  // u = 3.0f -> 0x40400000, v = -2.0f -> 0xC0000000
  CHECK(bytes[12 + 3] == 0x40);
  CHECK(bytes[12 + 2] == 0x40);
  CHECK(bytes[16 + 3] == 0xC0);
  CHECK(bytes[16 + 2] == 0x00);
}

TEST_CASE("flo round trip is bit-exact and sidecar carries validity") {
  testutil::TempDir td("flo2");
  Rng rng(77);
  FlowField flow(6, 5);
  for (size_t i = 0; i < flow.u.size(); ++i) {
    flow.u[i] = static_cast<float>(rng.uniform(-30, 30));
    flow.v[i] = static_cast<float>(rng.uniform(-30, 30));
    flow.valid[i] = rng.index(3) != 0;
    flow.score[i] = static_cast<float>(rng.uniform(0, 2));
  }
  write_flo(flow, td.file("b.flo"));
  CHECK(std::filesystem::exists(td.file("b.flo.meta")));
  FlowField back = read_flo(td.file("b.flo"));
  REQUIRE(back.width == 6);
  REQUIRE(back.height == 5);
  CHECK(back.u == flow.u);
  CHECK(back.v == flow.v);
  CHECK(back.valid == flow.valid);
  CHECK(back.score == flow.score);
}

TEST_CASE("all-valid zero-score flow writes no sidecar and removes stale ones") {
  testutil::TempDir td("flo3");
  FlowField flow(2, 2);
  std::fill(flow.valid.begin(), flow.valid.end(), 1);
  flow.valid[0] = 0;
  write_flo(flow, td.file("c.flo"));
  CHECK(std::filesystem::exists(td.file("c.flo.meta")));
  flow.valid[0] = 1;
  write_flo(flow, td.file("c.flo"));
  CHECK(!std::filesystem::exists(td.file("c.flo.meta")));
  FlowField back = read_flo(td.file("c.flo"));
  CHECK(back.all_valid());
}

TEST_CASE("bad magic is rejected") {
  testutil::TempDir td("flo4");
  std::vector<std::uint8_t> file(20, 0);
  write_bytes(td.file("bad.flo"), file);
  CHECK_THROWS(read_flo(td.file("bad.flo")));
}

}  // TEST_SUITE

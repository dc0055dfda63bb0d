#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <fstream>
#include <set>

#include "gridvlad/binary_io.hpp"
#include "gridvlad/core_types.hpp"
#include "support.hpp"

using namespace gridvlad;
using testing::TempDir;

namespace {

void write_raw(const std::filesystem::path& p, const std::string& magic, std::vector<std::uint32_t> header,
               std::size_t floats) {
  std::ofstream f(p, std::ios::binary);
  f.write(magic.data(), 4);
  for (auto h : header) f.write(reinterpret_cast<const char*>(&h), 4);
  for (std::size_t n = 0; n < floats; ++n) {
    const float v = static_cast<float>(n);
    f.write(reinterpret_cast<const char*>(&v), 4);
  }
}

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream f(p);
  f << text;
}

}  // namespace

TEST_CASE("grid construction validates payload length and finiteness") {
  CHECK_NOTHROW(DescriptorGrid(2, 2, 3, std::vector<float>(24, 0.f)));
  CHECK_THROWS_WITH_AS(DescriptorGrid(2, 2, 3, std::vector<float>(23, 0.f)), doctest::Contains("payload mismatch"),
                       Error);
  std::vector<float> bad(24, 0.f);
  bad[5] = std::numeric_limits<float>::quiet_NaN();
  CHECK_THROWS_AS(DescriptorGrid(2, 2, 3, bad), Error);
  bad[5] = std::numeric_limits<float>::infinity();
  CHECK_THROWS_AS(DescriptorGrid(2, 2, 3, bad), Error);
  CHECK_THROWS_AS(DescriptorGrid(0, 2, 3, {}), Error);
}

TEST_CASE("descriptor indexing follows [t][i][j][k]") {
  std::vector<float> data(2 * 2 * 2 * 3);
  for (std::size_t n = 0; n < data.size(); ++n) data[n] = static_cast<float>(n);
  DescriptorGrid g(2, 2, 3, data);
  CHECK(g.descriptor_count() == 8);
  const auto d = g.descriptor(1, 0, 1);
  // offset ((1*2 + 0)*2 + 1)*3 = 15
  CHECK(d[0] == 15.f);
  CHECK(d[2] == 17.f);
  CHECK(g.descriptor(5)[0] == 15.f);
}

TEST_CASE("read_dgt: shape of a 2x2x2x3 file") {
  TempDir dir;
  const auto p = dir / "a.dgt";
  write_raw(p, "DGT1", {1, 2, 2, 3}, 24);
  const auto g = read_dgt(p);
  CHECK(g.frames() == 2);
  CHECK(g.grid_size() == 2);
  CHECK(g.dim() == 3);
  CHECK(g.data().size() == 24);
  CHECK(g.descriptor(1, 1, 1)[2] == 23.f);
}

TEST_CASE("read_dgt: header claiming 24 floats with 23 present is a payload mismatch") {
  TempDir dir;
  const auto p = dir / "short.dgt";
  write_raw(p, "DGT1", {1, 2, 2, 3}, 23);
  CHECK_THROWS_WITH_AS(read_dgt(p), doctest::Contains("payload mismatch"), Error);
  write_raw(p, "DGT1", {1, 2, 2, 3}, 25);
  CHECK_THROWS_WITH_AS(read_dgt(p), doctest::Contains("payload mismatch"), Error);
}

TEST_CASE("read_dgt: malformed headers") {
  TempDir dir;
  const auto p = dir / "bad.dgt";
  write_raw(p, "DGT2", {1, 1, 1, 1}, 1);
  CHECK_THROWS_WITH_AS(read_dgt(p), doctest::Contains("malformed header"), Error);
  write_raw(p, "DGT1", {7, 1, 1, 1}, 1);
  CHECK_THROWS_WITH_AS(read_dgt(p), doctest::Contains("malformed header"), Error);
  write_raw(p, "DGT1", {1, 1}, 0);
  CHECK_THROWS_WITH_AS(read_dgt(p), doctest::Contains("malformed header"), Error);
  write_raw(p, "DGT1", {1, 0, 1, 1}, 0);
  CHECK_THROWS_AS(read_dgt(p), Error);
  CHECK_THROWS_AS(read_dgt(dir / "missing.dgt"), Error);
}

TEST_CASE("read_dgt: non-finite payload rejected") {
  TempDir dir;
  const auto p = dir / "nan.dgt";
  {
    std::ofstream f(p, std::ios::binary);
    f.write("DGT1", 4);
    for (std::uint32_t h : {1u, 1u, 1u, 2u}) f.write(reinterpret_cast<const char*>(&h), 4);
    const float v[2] = {1.f, std::numeric_limits<float>::quiet_NaN()};
    f.write(reinterpret_cast<const char*>(v), 8);
  }
  CHECK_THROWS_WITH_AS(read_dgt(p), doctest::Contains("non-finite"), Error);
}

TEST_CASE("write_dgt: zero 1x1x1 grid stores one 0.0 payload float") {
  TempDir dir;
  const auto p = dir / "z.dgt";
  write_dgt(DescriptorGrid(1, 1, 1), p);
  CHECK(std::filesystem::file_size(p) == 4 + 16 + 4);
  std::ifstream f(p, std::ios::binary);
  char buf[24];
  f.read(buf, 24);
  CHECK(std::memcmp(buf, "DGT1", 4) == 0);
  float v;
  std::memcpy(&v, buf + 20, 4);
  CHECK(v == 0.0f);
  CHECK(read_dgt(p) == DescriptorGrid(1, 1, 1));
}

TEST_CASE("write_dgt: a=7, D=512 header fields") {
  TempDir dir;
  const auto p = dir / "vgg.dgt";
  write_dgt(DescriptorGrid(1, 7, 512), p);
  std::ifstream f(p, std::ios::binary);
  char buf[20];
  f.read(buf, 20);
  std::uint32_t h[4];
  std::memcpy(h, buf + 4, 16);
  CHECK(h[0] == 1);
  CHECK(h[1] == 1);
  CHECK(h[2] == 7);
  CHECK(h[3] == 512);
  const auto g = read_dgt(p);
  CHECK(g.grid_size() == 7);
  CHECK(g.dim() == 512);
}

TEST_CASE("write_dgt then read_dgt is bitwise identical over 100 random grids") {
  TempDir dir;
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> dim(1, 5);
  for (int trial = 0; trial < 100; ++trial) {
    const auto g = testing::random_grid(rng, dim(rng), dim(rng), dim(rng), 100.0);
    const auto p = dir / ("r" + std::to_string(trial) + ".dgt");
    write_dgt(g, p);
    const auto back = read_dgt(p);
    REQUIRE(back.data().size() == g.data().size());
    CHECK(std::memcmp(back.data().data(), g.data().data(), g.data().size() * sizeof(float)) == 0);
    CHECK(back == g);
  }
}

TEST_CASE("write_dgt to an unwritable destination fails") {
  CHECK_THROWS_AS(write_dgt(DescriptorGrid(1, 1, 1), "/nonexistent-dir/x/y.dgt"), Error);
}

TEST_CASE("parse_manifest: 23 classes and 20 groups") {
  TempDir dir;
  std::string text = "# sample_id\tpath\tclass_label\tgroup_id\n";
  for (int c = 1; c <= 23; ++c) {
    for (int u = 1; u <= 20; ++u) {
      text += "s" + std::to_string(c) + "_" + std::to_string(u) + "\tgrids/x.dgt\t" + std::to_string(c) + "\tuser" +
              std::to_string(u) + "\n";
    }
  }
  write_text(dir / "m.tsv", text);
  const auto m = parse_manifest(dir / "m.tsv");
  CHECK(m.classes == 23);
  CHECK(m.samples.size() == 23 * 20);
  CHECK(m.warnings.empty());
  std::set<std::string> groups;
  for (const auto& s : m.samples) groups.insert(s.group_id);
  CHECK(groups.size() == 20);
  CHECK(m.samples.front().sample_id == "s1_1");
  CHECK(m.samples.back().sample_id == "s23_20");
  CHECK(m.samples.front().path == dir.path() / "grids/x.dgt");
}

TEST_CASE("parse_manifest: empty sample list is valid") {
  TempDir dir;
  write_text(dir / "m.tsv", "# nothing here\n");
  const auto m = parse_manifest(dir / "m.tsv");
  CHECK(m.samples.empty());
  CHECK(m.classes == 0);
}

TEST_CASE("parse_manifest: duplicate id is named in the error") {
  TempDir dir;
  write_text(dir / "m.tsv", "a\tx.dgt\t1\tu1\nb\tx.dgt\t2\tu1\na\ty.dgt\t1\tu2\n");
  CHECK_THROWS_WITH_AS(parse_manifest(dir / "m.tsv"), doctest::Contains("duplicate sample_id 'a'"), Error);
}

TEST_CASE("parse_manifest: label range, missing fields, declared class count") {
  TempDir dir;
  write_text(dir / "m.tsv", "# classes: 3\na\tx.dgt\t4\tu1\n");
  CHECK_THROWS_WITH_AS(parse_manifest(dir / "m.tsv"), doctest::Contains("label"), Error);
  write_text(dir / "m.tsv", "a\tx.dgt\t0\tu1\n");
  CHECK_THROWS_AS(parse_manifest(dir / "m.tsv"), Error);
  write_text(dir / "m.tsv", "a\tx.dgt\t1\n");
  CHECK_THROWS_WITH_AS(parse_manifest(dir / "m.tsv"), doctest::Contains("missing field"), Error);
  write_text(dir / "m.tsv", "a\tx.dgt\t1\t\n");
  CHECK_THROWS_AS(parse_manifest(dir / "m.tsv"), Error);
  write_text(dir / "m.tsv", "a\tx.dgt\tone\tu1\n");
  CHECK_THROWS_AS(parse_manifest(dir / "m.tsv"), Error);
  CHECK_THROWS_AS(parse_manifest(dir / "absent.tsv"), Error);

  write_text(dir / "m.tsv", "# classes: 3\na\tx.dgt\t1\tu1\nb\t/abs/y.dgt\t3\tu2\n");
  const auto m = parse_manifest(dir / "m.tsv");
  CHECK(m.classes == 3);
  REQUIRE(m.warnings.size() == 1);
  CHECK(m.warnings[0].find("2") != std::string::npos);
  CHECK(m.class_counts() == std::vector<std::size_t>{1, 0, 1});
  CHECK(m.samples[1].path == std::filesystem::path("/abs/y.dgt"));
}

TEST_CASE("write_manifest round trip") {
  TempDir dir;
  DatasetManifest m;
  m.classes = 4;
  m.samples = {{"x1", 2, "g1", "grids/x1.dgt"}, {"x2", 4, "g2", "/tmp/x2.dgt"}};
  write_manifest(m, dir / "m.tsv");
  const auto back = parse_manifest(dir / "m.tsv");
  CHECK(back.classes == 4);
  REQUIRE(back.samples.size() == 2);
  CHECK(back.samples[0].sample_id == "x1");
  CHECK(back.samples[0].class_label == 2);
  CHECK(back.samples[0].group_id == "g1");
  CHECK(back.samples[0].path == dir.path() / "grids/x1.dgt");
  CHECK(back.samples[1].path == std::filesystem::path("/tmp/x2.dgt"));
}

TEST_CASE("write_dataset and load_dataset round trip, shape consistency") {
  TempDir dir;
  std::mt19937_64 rng(3);
  Dataset ds;
  ds.manifest.classes = 2;
  for (int n = 0; n < 4; ++n) {
    ds.manifest.samples.push_back({"v" + std::to_string(n), 1 + n % 2, "g" + std::to_string(n / 2), ""});
    ds.grids.push_back(testing::random_grid(rng, 2 + n, 2, 3));
  }
  const auto mpath = write_dataset(ds, dir.path());
  const auto loaded = load_dataset(parse_manifest(mpath));
  REQUIRE(loaded.size() == 4);
  for (int n = 0; n < 4; ++n) CHECK(loaded.grids[n] == ds.grids[n]);

  // Inconsistent D across files is rejected at load time.
  write_dgt(testing::random_grid(rng, 2, 2, 4), dir / "grids/v3.dgt");
  CHECK_THROWS_AS(load_dataset(parse_manifest(mpath)), Error);
}

TEST_CASE("collect_descriptors caps and is seeded") {
  std::mt19937_64 rng(5);
  const auto g1 = testing::random_grid(rng, 3, 2, 2);
  const auto g2 = testing::random_grid(rng, 2, 2, 2);
  std::vector<const DescriptorGrid*> grids{&g1, &g2};
  const auto all = collect_descriptors(grids, 0, 1);
  CHECK(all.rows() == 20);
  CHECK(all(13, 1) == doctest::Approx(g2.descriptor(1)[1]));
  const auto a = collect_descriptors(grids, 7, 42);
  const auto b = collect_descriptors(grids, 7, 42);
  const auto c = collect_descriptors(grids, 7, 43);
  CHECK(a.rows() == 7);
  CHECK(a == b);
  CHECK(a != c);
  // Every sampled row is some original descriptor, in order.
  Eigen::Index next = 0;
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    while (next < all.rows() && all.row(next) != a.row(r)) ++next;
    CHECK(next < all.rows());
    ++next;
  }
}

TEST_CASE("blob reader reports truncation and trailing bytes") {
  TempDir dir;
  const auto p = dir / "x.blob";
  {
    io::BlobWriter w(p, "TST1", 1);
    w.u32(3);
    w.f64(2.5);
    w.finish();
  }
  {
    io::BlobReader r(p, "TST1");
    CHECK(r.version() == 1);
    CHECK(r.u32() == 3);
    CHECK(r.f64() == 2.5);
    CHECK_NOTHROW(r.expect_end());
  }
  {
    io::BlobReader r(p, "TST1");
    r.u32();
    CHECK_THROWS_WITH_AS(r.expect_end(), doctest::Contains("payload mismatch"), Error);
    r.f64();
    CHECK_THROWS_WITH_AS(r.u32(), doctest::Contains("payload mismatch"), Error);
  }
  CHECK_THROWS_WITH_AS(io::BlobReader(p, "ABC1"), doctest::Contains("malformed header"), Error);
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "gridvlad/aggregator.hpp"
#include "gridvlad/classify.hpp"
#include "gridvlad/vlad.hpp"
#include "support.hpp"

using namespace gridvlad;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

bool has(const std::string& text, const std::string& needle) { return text.find(needle) != std::string::npos; }

/// Small biased dataset on disk: signal in the center cell, first leaf.
std::string make_data(const testing::TempDir& dir, const std::string& extra_a = "3") {
  const auto r = run({"synth-gen", "--out", (dir / "data").string(), "--classes", "3", "--per-class", "9",
                      "--groups", "3", "--T", "4", "--a", extra_a, "--dim", "6", "--L", "1", "--signal-cells",
                      "2,2", "--signal-segments", "1", "--mu", "4", "--seed", "3"});
  REQUIRE(r.code == 0);
  return (dir / "data" / "manifest.tsv").string();
}

}  // namespace

TEST_CASE("synth-gen prints its resolved config and writes a readable manifest") {
  testing::TempDir dir;
  const auto r = run({"synth-gen", "--out", (dir / "d").string(), "--classes", "2", "--per-class", "3",
                      "--groups", "2", "--T", "2", "--a", "2", "--dim", "3"});
  CHECK(r.code == 0);
  CHECK(r.out.rfind("# resolved config\nsubcommand=synth-gen\n", 0) == 0);
  CHECK(has(r.out, "threads="));
  const auto m = parse_manifest(dir / "d" / "manifest.tsv");
  CHECK(m.samples.size() == 6);
  CHECK(m.classes == 2);
}

TEST_CASE("bad input gives a nonzero exit and an error line") {
  testing::TempDir dir;
  CHECK(run({}).code != 0);
  CHECK(run({"evaluate", "--manifest", "x", "--bogus-flag", "1"}).code != 0);
  const auto missing = run({"evaluate", "--manifest", (dir / "nope.tsv").string()});
  CHECK(missing.code != 0);
  CHECK(has(missing.err, "error:"));
  const auto cells = run({"synth-gen", "--out", (dir / "d").string(), "--a", "2", "--signal-cells", "3,1"});
  CHECK(cells.code != 0);
  CHECK(has(cells.err, "outside"));
  const auto method = run({"evaluate", "--manifest", "x", "--method", "vlad"});
  CHECK(method.code != 0);
}

TEST_CASE("N_sp beyond a^2 is rejected with the grid size in the message") {
  testing::TempDir dir;
  const auto r0 = run({"synth-gen", "--out", (dir / "d").string(), "--classes", "2", "--per-class", "2",
                       "--groups", "2", "--T", "2", "--a", "7", "--dim", "3"});
  REQUIRE(r0.code == 0);
  const auto r = run({"evaluate", "--manifest", (dir / "d" / "manifest.tsv").string(), "--method", "dsar",
                      "--N-sp", "50", "--K", "2", "--D", "2"});
  CHECK(r.code != 0);
  CHECK(has(r.err, "N_sp exceeds a^2=49"));
  const auto t = run({"evaluate", "--manifest", (dir / "d" / "manifest.tsv").string(), "--N-tmp", "9", "--L", "2"});
  CHECK(t.code != 0);
  CHECK(has(t.err, "N_tmp exceeds 2^(L+1)-1=7"));
}

TEST_CASE("flags that a method ignores produce a warning") {
  testing::TempDir dir;
  const auto manifest = make_data(dir);
  const auto r = run({"evaluate", "--manifest", manifest, "--method", "lcd", "--N-sp", "3", "--K", "4", "--D", "4"});
  CHECK(r.code == 0);
  CHECK(has(r.err, "warning: --N-sp is ignored for method lcd"));
  CHECK(has(r.out, "method=lcd"));
  CHECK(has(r.out, "K=4"));
  CHECK(has(r.out, "accuracy="));
}

TEST_CASE("evaluate twice with one seed gives byte-identical reports") {
  testing::TempDir dir;
  const auto manifest = make_data(dir);
  std::vector<std::string> args{"evaluate", "--manifest", manifest, "--method", "dstar", "--K", "4", "--D", "4",
                                "--N-sp", "2", "--N-tmp", "2", "--L", "1", "--iters", "2", "--seed", "9"};
  auto a = args, b = args;
  a.insert(a.end(), {"--report", (dir / "a.txt").string(), "--confusion", (dir / "a.csv").string()});
  b.insert(b.end(), {"--report", (dir / "b.txt").string()});
  REQUIRE(run(a).code == 0);
  REQUIRE(run(b).code == 0);
  const auto ra = slurp(dir / "a.txt");
  CHECK(!ra.empty());
  CHECK(ra == slurp(dir / "b.txt"));
  CHECK(has(slurp(dir / "a.csv"), "true\\predicted"));
  const auto stdout_run = run(args);
  CHECK(has(stdout_run.out, ra));
}

TEST_CASE("evaluate with score fusion") {
  testing::TempDir dir;
  const auto manifest = make_data(dir);
  const auto r = run({"evaluate", "--manifest", manifest, "--method", "dsar", "--K", "4", "--D", "4", "--N-sp",
                      "2", "--fuse-with", "lcd"});
  CHECK(r.code == 0);
  CHECK(has(r.out, "fusion source lcd"));
  CHECK(has(r.out, "fusion source dsar"));
}

TEST_CASE("step-by-step pipeline and heatmap export") {
  testing::TempDir dir;
  const auto manifest = make_data(dir);
  const auto pca = (dir / "p.pca").string(), cb = (dir / "c.cbk").string(), w = (dir / "w").string(),
             reps = (dir / "reps").string(), svm = (dir / "m.svm").string(), hm = (dir / "hm").string();
  REQUIRE(run({"fit-pca", "--manifest", manifest, "--out", pca, "--D", "4"}).code == 0);
  REQUIRE(run({"fit-codebook", "--manifest", manifest, "--pca", pca, "--out", cb, "--K", "4"}).code == 0);
  const auto tw = run({"train-weights", "--manifest", manifest, "--pca", pca, "--codebook", cb, "--out", w,
                       "--method", "dstar", "--N-sp", "1", "--N-tmp", "1", "--L", "1", "--iters", "2"});
  REQUIRE(tw.code == 0);
  CHECK(has(tw.out, "iteration 2:"));
  REQUIRE(run({"encode", "--manifest", manifest, "--pca", pca, "--codebook", cb, "--weights", w, "--out", reps,
               "--method", "dstar"})
              .code == 0);
  const auto rep = load_representation(std::filesystem::path(reps) / "c01_s0000.vrp");
  CHECK(rep.method == Method::Dstar);
  CHECK(rep.vector.size() == 4 * 4);
  CHECK(std::abs(rep.vector.norm() - 1.0) < 1e-5);
  const auto tc = run({"train-classifier", "--manifest", manifest, "--reps", reps, "--out", svm});
  REQUIRE(tc.code == 0);
  CHECK(load_model(svm).classes() == 3);

  const auto h = run({"export-heatmap", "--weights", w, "--out", hm});
  REQUIRE(h.code == 0);
  const auto spatial = slurp(hm + "_spatial.csv");
  std::istringstream rows(spatial);
  std::string line;
  std::vector<std::vector<double>> grid;
  while (std::getline(rows, line)) {
    std::vector<double> row;
    std::istringstream cells(line);
    std::string v;
    while (std::getline(cells, v, ',')) row.push_back(std::stod(v));
    grid.push_back(row);
  }
  REQUIRE(grid.size() == 3);
  REQUIRE(grid[1].size() == 3);
  // The signal cell dominates the learned spatial weight.
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      if (i != 1 || j != 1) CHECK(grid[1][1] > grid[i][j]);
  const auto temporal = slurp(hm + "_temporal.csv");
  CHECK(temporal.rfind("level,segment,magnitude\n", 0) == 0);
  CHECK(has(temporal, "1,1,"));
  CHECK(has(temporal, "1,2,"));

  CHECK(run({"encode", "--manifest", manifest, "--pca", pca, "--codebook", cb, "--out", reps, "--method", "dsar"})
            .code != 0);
  CHECK(run({"export-heatmap", "--weights", w, "--out", hm, "--component", "5"}).code != 0);
}

TEST_CASE("sweep prints a table and keeps going past failing cells") {
  testing::TempDir dir;
  const auto manifest = make_data(dir);
  const auto r = run({"sweep", "--manifest", manifest, "--method", "dsar", "--K-list", "2,4", "--D-list", "4",
                      "--N-sp-list", "1,10"});
  CHECK(r.code == 0);
  CHECK(has(r.out, "failed"));
  CHECK(has(r.out, "cell.1=K:2,D:4,N_sp:1"));
  CHECK(has(r.out, "cell.3=K:4,D:4,N_sp:1"));
  CHECK(!has(r.out, "cell.2="));
  const auto all_bad = run({"sweep", "--manifest", manifest, "--method", "dsar", "--K", "2", "--D", "4",
                            "--N-sp-list", "10,11"});
  CHECK(all_bad.code != 0);
}

TEST_CASE("GRIDVLAD_THREADS takes precedence over --threads") {
  testing::TempDir dir;
  const auto before = thread_count();
  ::setenv("GRIDVLAD_THREADS", "1", 1);
  auto r = run({"--threads", "3", "synth-gen", "--out", (dir / "a").string(), "--per-class", "1", "--T", "1"});
  CHECK(r.code == 0);
  CHECK(thread_count() == before);
  ::unsetenv("GRIDVLAD_THREADS");
  r = run({"--threads", "3", "synth-gen", "--out", (dir / "b").string(), "--per-class", "1", "--T", "1"});
  CHECK(r.code == 0);
  CHECK(has(r.out, "threads=3"));
  set_thread_count(before);
}

#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "tvc/bench.hpp"
#include "tvc/error.hpp"

using namespace tvc;
using namespace tvc::bench;

namespace {

BenchConfig quick(Subcommand sub, Shape dims) {
  BenchConfig cfg;
  cfg.subcommand = sub;
  cfg.dims = std::move(dims);
  cfg.iterations = 3;
  cfg.fill = FillKind::ones;
  return cfg;
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::stringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) rows.push_back(split_line(line));
  return rows;
}

}  // namespace

TEST_CASE("presets") {
  CHECK(resolve_dims("paper:d3") == Shape::hypersquare(979, 3));
  CHECK(resolve_dims("paper:d10") == Shape::hypersquare(8, 10));
  CHECK(resolve_dims("desk:d3") == Shape::hypersquare(64, 3));
  CHECK(resolve_dims("desk:d10") == Shape::hypersquare(4, 10));
  CHECK(resolve_dims("3,4") == Shape{3, 4});
  CHECK_THROWS_AS(resolve_dims("paper:d11"), ConfigError);
  CHECK_THROWS_AS(resolve_dims("desk:dx"), ConfigError);
  CHECK(parse_fill("ramp") == FillKind::ramp);
  CHECK(parse_assembly("gather-copy") == AssemblyStrategy::gather_copy);
  CHECK_THROWS_AS(parse_fill("zeros"), ConfigError);
}

TEST_CASE("tvc touched memory per iteration") {
  auto cfg = quick(Subcommand::tvc, Shape::hypersquare(8, 3));
  cfg.mode = 1;
  const auto r = run_bench(cfg);
  CHECK(r.touched_measured == 512 + 8 + 64);
  CHECK(r.touched_predicted == r.touched_measured);
  CHECK(r.iterations == 3);
  CHECK(r.p_effective == 1);
  CHECK(r.it_sp == r.it_s);
  CHECK(r.bytes_s > 0);
}

TEST_CASE("distributed runs audit their counters") {
  for (index_t k = 0; k < 3; ++k) {
    auto cfg = quick(Subcommand::dtvc, Shape{8, 6, 4});
    cfg.workers = 3;
    cfg.vl = 1;
    cfg.split = 1;
    cfg.mode = k;
    const auto r = run_bench(cfg);
    CHECK(r.p_effective == 3);
    CHECK(r.touched_measured == r.touched_predicted);
    CHECK(r.it_sp == doctest::Approx(r.it_s / 3));
  }
  for (bool classical : {false, true}) {
    auto cfg = quick(Subcommand::hopm, Shape::hypersquare(8, 3));
    cfg.workers = 4;
    cfg.vl = 1;
    cfg.split = 2;
    cfg.classical_hopm = classical;
    cfg.sweeps = 2;
    const auto r = run_bench(cfg);
    CHECK(r.p_effective == 4);
    CHECK(r.touched_measured == r.touched_predicted);
  }
}

TEST_CASE("effective worker count is reported") {
  auto cfg = quick(Subcommand::dtvc, Shape{16, 4});
  cfg.workers = 3;
  cfg.vl = 8;
  const auto r = run_bench(cfg);
  CHECK(r.p_requested == 3);
  CHECK(r.p_effective == 2);
}

TEST_CASE("infeasible configurations") {
  auto message = [](BenchConfig cfg) {
    try {
      run_bench(cfg);
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  auto cfg = quick(Subcommand::dtvc, Shape{16, 4});
  cfg.workers = 17;
  CHECK(message(cfg).find("at most 2 effective") != std::string::npos);
  cfg.vl = 1;
  CHECK(message(cfg).find("at most 16 effective") != std::string::npos);
  cfg.workers = 5;
  cfg.split = 1;
  CHECK(message(cfg).find("at most 4 effective") != std::string::npos);
  auto bad = quick(Subcommand::tvc, Shape{4, 4});
  bad.mode = 2;
  CHECK_THROWS_AS(run_bench(bad), ConfigError);
  bad.mode = 0;
  bad.iterations = 0;
  bad.seconds = 0;
  CHECK_THROWS_AS(run_bench(bad), ConfigError);
}

TEST_CASE("counter obliviousness across a sweep") {
  auto cfg = quick(Subcommand::tvc, Shape::hypersquare(6, 3));
  cfg.iterations = 1;
  const auto summary = sweep(cfg, SweepAxis::mode);
  REQUIRE(summary.runs.size() == 3);
  for (const auto& r : summary.runs) CHECK(r.touched_measured == summary.runs[0].touched_measured);

  auto dcfg = quick(Subcommand::dtvc, Shape::hypersquare(4, 3));
  dcfg.iterations = 1;
  dcfg.peak_bandwidth = 1e9;
  const auto grid = sweep(dcfg);
  CHECK(grid.runs.size() == 9);
  CHECK(grid.order == 3);
  CHECK(grid.bandwidth.mean > 0);
}

TEST_CASE("sample statistics") {
  const Stats s = sample_stats({2, 4, 4, 4, 5, 5, 7, 9});
  CHECK(s.mean == 5);
  CHECK(s.stddev == doctest::Approx(2.138089935));
  CHECK(sample_stats({3}).stddev == 0);
}

TEST_CASE("stream triad") {
  std::vector<double> a;
  const auto t = stream_triad(1000, 0, 3.0, &a, 1);
  CHECK(t.passes == 1);
  CHECK(t.touched_per_pass == 3000);
  for (double v : a) CHECK(v == 7.0);
  const auto timed = stream_triad(1 << 16, 0.05);
  CHECK(timed.bandwidth > 0);
  CHECK_THROWS_AS(stream_triad(0), ConfigError);
}

TEST_CASE("csv layout and round trip") {
  auto cfg = quick(Subcommand::tvc, Shape{5, 3, 4});
  cfg.mode = 2;
  const auto r = run_bench(cfg);
  std::ostringstream out;
  emit_csv({r}, out);
  const auto text = out.str();
  CHECK(text.find('\r') == std::string::npos);
  const auto rows = parse_csv(text);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0] == split_line(std::string(kCsvHeader)));
  const auto& row = rows[1];
  REQUIRE(row.size() == 17);
  CHECK(row[0] == "tvc");
  CHECK(row[1] == "3");
  CHECK(row[2] == "5x3x4");
  CHECK(row[3] == "2");
  CHECK(row[7] == "f64");
  CHECK(std::stoul(row[8]) == r.iterations);
  auto same = [](const std::string& cell, double v) {
    return doctest::Approx(std::stod(cell)).epsilon(1e-15) == v;
  };
  CHECK(same(row[9], r.elapsed));
  CHECK(same(row[10], r.it_s));
  CHECK(same(row[11], r.it_sp));
  CHECK(same(row[12], r.bytes_s));
  CHECK(row[13] == "NA");
  CHECK(same(row[14], r.touched_predicted));
  CHECK(same(row[15], r.touched_measured));
  CHECK(same(row[16], r.stddev_pct));
  CHECK_THROWS_AS(emit_csv({}, out), ConfigError);
}

TEST_CASE("deterministic csv is reproducible") {
  auto cfg = quick(Subcommand::hopm, Shape{4, 4, 4});
  cfg.deterministic = true;
  cfg.workers = 2;
  cfg.vl = 1;
  std::ostringstream a, b;
  emit_csv({run_bench(cfg)}, a);
  emit_csv({run_bench(cfg)}, b);
  CHECK(a.str() == b.str());
  CHECK(a.str().find("NA") != std::string::npos);
  cfg.iterations = 0;
  CHECK_THROWS_AS(run_bench(cfg), ConfigError);
}

TEST_CASE("csv files") {
  const std::string path = "test_bench_out.csv";
  emit_csv({run_bench(quick(Subcommand::tvc, Shape{3, 3}))}, path);
  std::ifstream in(path);
  std::string first, second, third;
  std::getline(in, first);
  std::getline(in, second);
  CHECK(first == kCsvHeader);
  CHECK_FALSE(second.empty());
  CHECK_FALSE(std::getline(in, third));
  std::remove(path.c_str());
  CHECK_THROWS_AS(emit_csv({run_bench(quick(Subcommand::tvc, Shape{3, 3}))}, "/nonexistent/dir/x.csv"), ResourceError);
}

TEST_CASE("cost csv") {
  std::ostringstream out;
  emit_cost_csv({cost::evaluate(cost::CostQuery{3, 4, 2, 2})}, out);
  const auto rows = parse_csv(out.str());
  REQUIRE(rows.size() == 2);
  CHECK(rows[1][0] == "3");
  CHECK(rows[1][4] == "120");
  CHECK(rows[1][5] == "204");
  CHECK(rows[1][9] == "8");
}

TEST_CASE("reduced precision benchmarks run") {
  for (const char* mode : {"f32", "f32f64", "f16f32", "bf16f32"}) {
    auto cfg = quick(Subcommand::hopm, Shape{6, 5, 4});
    cfg.precision = PrecisionMode::parse(mode);
    cfg.workers = 2;
    cfg.vl = 1;
    const auto r = run_bench(cfg);
    CHECK(r.touched_measured == r.touched_predicted);
  }
}

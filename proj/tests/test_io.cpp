#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "ecm/gauss.hpp"
#include "ecm/io.hpp"
#include "ecm/simulate.hpp"
#include "ecm/types.hpp"

using namespace ecm;

namespace {

gauss::Rect2D rect(double xa, double xb, double ya, double yb) {
  return {{xa, xb}, {ya, yb}};
}

sim::SurveyDesign tiny_design() {
  sim::SurveyDesign d;
  d.times = {0.25, 1.0 / 3.0, 2.7182818284590452};
  d.cells = {
      {rect(-0.1, 0.1, -0.1, 0.1), rect(0.3, 0.5, -0.1, 0.1)},
      {rect(-1.0, -0.5, 0.0, 0.5)},
      {rect(0.0, 0.125, 0.0, 0.0625), rect(0.25, 0.375, 0.5, 0.625),
       rect(-0.375, -0.25, -0.625, -0.5)},
  };
  return d;
}

CountArrangement tiny_counts() {
  CountArrangement c;
  c.schedule.m = {2, 1, 3};
  c.counts = {{7, 0}, {123456789012345}, {1, 2, 3}};
  return c;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::string s((std::istreambuf_iterator<char>(in)),
                std::istreambuf_iterator<char>());
  return s;
}

struct TempPaths {
  std::string counts = "io_test_counts.csv";
  std::string times = "io_test_times.csv";
  ~TempPaths() {
    std::remove(counts.c_str());
    std::remove(times.c_str());
  }
};

}  // namespace

TEST_SUITE("io") {

TEST_CASE("doubles round-trip through the text format") {
  for (double v : {0.1, 1.0 / 3.0, 2.7182818284590452, -1e-300, 6.02e23,
                   0.0, -0.25}) {
    CHECK(std::stod(io::format_double(v)) == v);
  }
}

TEST_CASE("counts round-trip exactly") {
  TempPaths p;
  const auto design = tiny_design();
  const auto counts = tiny_counts();
  io::write_counts_csv(p.counts, design, counts);
  io::write_times_csv(p.times, design.times);
  io::CountsFile back = io::read_counts_csv(p.counts, p.times);
  REQUIRE(back.design.times.size() == 3);
  for (int k = 0; k < 3; ++k) {
    CHECK(back.design.times[k] == design.times[k]);
    REQUIRE(back.design.cells[k].size() == design.cells[k].size());
    for (size_t l = 0; l < design.cells[k].size(); ++l) {
      CHECK(back.design.cells[k][l].x.lo == design.cells[k][l].x.lo);
      CHECK(back.design.cells[k][l].x.hi == design.cells[k][l].x.hi);
      CHECK(back.design.cells[k][l].y.lo == design.cells[k][l].y.lo);
      CHECK(back.design.cells[k][l].y.hi == design.cells[k][l].y.hi);
    }
    CHECK(back.counts.counts[k] == counts.counts[k]);
  }
}

TEST_CASE("version fields are written and enforced") {
  TempPaths p;
  io::write_counts_csv(p.counts, tiny_design(), tiny_counts());
  io::write_times_csv(p.times, tiny_design().times);
  CHECK(slurp(p.counts).rfind("format_version,1\n", 0) == 0);
  CHECK(slurp(p.times).rfind("format_version,1\n", 0) == 0);

  // future version must be refused, not misread
  std::string body = slurp(p.counts);
  body.replace(body.find(",1"), 2, ",9");
  io::write_text_atomic(p.counts, body);
  CHECK_THROWS(io::read_counts_csv(p.counts, p.times));
}

TEST_CASE("malformed rows report their line number") {
  TempPaths p;
  io::write_counts_csv(p.counts, tiny_design(), tiny_counts());
  io::write_times_csv(p.times, tiny_design().times);

  std::string body = slurp(p.counts);
  body += "2,9,0,1,0,1,not_a_count\n";
  io::write_text_atomic(p.counts, body);
  bool threw = false;
  try {
    io::read_counts_csv(p.counts, p.times);
  } catch (const std::runtime_error& e) {
    threw = true;
    // 1 version line + 1 header + 6 data rows, appended row is line 9
    CHECK(std::string(e.what()).find("9") != std::string::npos);
  }
  CHECK(threw);
}

TEST_CASE("schedule mismatch between the two files throws") {
  TempPaths p;
  io::write_counts_csv(p.counts, tiny_design(), tiny_counts());
  io::write_times_csv(p.times, {0.25, 1.0 / 3.0});  // one time short
  CHECK_THROWS(io::read_counts_csv(p.counts, p.times));
}

TEST_CASE("atomic write leaves no temp file behind") {
  TempPaths p;
  io::write_text_atomic(p.counts, "format_version,1\nhello\n");
  CHECK(slurp(p.counts) == "format_version,1\nhello\n");
  // overwrite in place
  io::write_text_atomic(p.counts, "format_version,1\nbye\n");
  CHECK(slurp(p.counts) == "format_version,1\nbye\n");
  int strays = 0;
  for (const auto& entry : std::filesystem::directory_iterator(".")) {
    const std::string name = entry.path().filename().string();
    if (name.find("io_test_counts") != std::string::npos &&
        name != "io_test_counts.csv")
      ++strays;
  }
  CHECK(strays == 0);
}

TEST_CASE("missing file errors mention the path") {
  bool threw = false;
  try {
    io::read_text("no_such_file_anywhere.csv");
  } catch (const std::exception& e) {
    threw = true;
    CHECK(std::string(e.what()).find("no_such_file_anywhere") !=
          std::string::npos);
  }
  CHECK(threw);
}

}  // TEST_SUITE

#include "ecm/io.hpp"

#include <cerrno>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace ecm::io {

namespace {

[[noreturn]] void fail(const std::string& msg) {
  throw std::runtime_error(msg);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::stringstream ss(line);
  while (std::getline(ss, cur, ',')) {
    if (!cur.empty() && cur.back() == '\r') cur.pop_back();
    out.push_back(cur);
  }
  return out;
}

double parse_double(const std::string& s, const std::string& where) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    fail(where + ": not a number: '" + s + "'");
  }
  if (used != s.size()) fail(where + ": trailing characters in '" + s + "'");
  return v;
}

std::int64_t parse_int(const std::string& s, const std::string& where) {
  std::size_t used = 0;
  std::int64_t v = 0;
  try {
    v = std::stoll(s, &used);
  } catch (const std::exception&) {
    fail(where + ": not an integer: '" + s + "'");
  }
  if (used != s.size()) fail(where + ": trailing characters in '" + s + "'");
  return v;
}

void expect_version_line(std::istream& in, const std::string& path) {
  std::string line;
  if (!std::getline(in, line)) fail(path + ": empty file");
  std::vector<std::string> f = split(line);
  if (f.size() != 2 || f[0] != "format_version")
    fail(path + ": missing format_version line");
  if (parse_int(f[1], path) != kFormatVersion)
    fail(path + ": unsupported format_version " + f[1]);
}

}  // namespace

void write_text_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail("cannot open " + tmp + " for writing");
    out << content;
    out.flush();
    if (!out) fail("write failed for " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    fail("rename " + tmp + " -> " + path + ": " + std::strerror(errno));
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_counts_csv(const std::string& path,
                      const sim::SurveyDesign& design,
                      const CountArrangement& counts) {
  design.validate();
  counts.validate();
  if (counts.schedule.m != design.schedule().m)
    fail("counts do not follow the design's schedule");

  std::ostringstream out;
  out << "format_version," << kFormatVersion << "\n";
  out << "time_index,cell_index,x_lo,x_hi,y_lo,y_hi,count\n";
  for (std::size_t k = 0; k < design.cells.size(); ++k)
    for (std::size_t l = 0; l < design.cells[k].size(); ++l) {
      const gauss::Rect2D& c = design.cells[k][l];
      out << k << ',' << l << ',' << format_double(c.x.lo) << ','
          << format_double(c.x.hi) << ',' << format_double(c.y.lo) << ','
          << format_double(c.y.hi) << ',' << counts.counts[k][l] << "\n";
    }
  write_text_atomic(path, out.str());
}

void write_times_csv(const std::string& path,
                     const std::vector<double>& times) {
  std::ostringstream out;
  out << "format_version," << kFormatVersion << "\n";
  out << "time_index,t\n";
  for (std::size_t k = 0; k < times.size(); ++k)
    out << k << ',' << format_double(times[k]) << "\n";
  write_text_atomic(path, out.str());
}

CountsFile read_counts_csv(const std::string& counts_path,
                           const std::string& times_path) {
  // Times first: they fix the number of rows per time index.
  std::ifstream tin(times_path);
  if (!tin) fail("cannot open " + times_path);
  expect_version_line(tin, times_path);
  std::string line;
  if (!std::getline(tin, line) || split(line) != std::vector<std::string>{"time_index", "t"})
    fail(times_path + ": bad header");
  std::vector<double> times;
  int tline = 2;
  while (std::getline(tin, line)) {
    ++tline;
    if (line.empty() || line == "\r") continue;
    const std::string where = times_path + " line " + std::to_string(tline);
    std::vector<std::string> f = split(line);
    if (f.size() != 2) fail(where + ": expected 2 columns");
    if (parse_int(f[0], where) != static_cast<std::int64_t>(times.size()))
      fail(where + ": time_index must increase from 0 without gaps");
    times.push_back(parse_double(f[1], where));
  }
  if (times.empty()) fail(times_path + ": no times");

  std::ifstream cin_(counts_path);
  if (!cin_) fail("cannot open " + counts_path);
  expect_version_line(cin_, counts_path);
  if (!std::getline(cin_, line) ||
      split(line) != std::vector<std::string>{"time_index", "cell_index",
                                              "x_lo", "x_hi", "y_lo", "y_hi",
                                              "count"})
    fail(counts_path + ": bad header");

  CountsFile out;
  out.design.times = times;
  out.design.cells.resize(times.size());
  out.counts.counts.resize(times.size());
  int cline = 2;
  while (std::getline(cin_, line)) {
    ++cline;
    if (line.empty() || line == "\r") continue;
    const std::string where = counts_path + " line " + std::to_string(cline);
    std::vector<std::string> f = split(line);
    if (f.size() != 7) fail(where + ": expected 7 columns");
    const std::int64_t k = parse_int(f[0], where);
    const std::int64_t l = parse_int(f[1], where);
    if (k < 0 || k >= static_cast<std::int64_t>(times.size()))
      fail(where + ": time_index out of range");
    if (l != static_cast<std::int64_t>(out.design.cells[k].size()))
      fail(where + ": cell_index must increase from 0 within each time");
    gauss::Rect2D cell{{parse_double(f[2], where), parse_double(f[3], where)},
                       {parse_double(f[4], where), parse_double(f[5], where)}};
    const std::int64_t count = parse_int(f[6], where);
    if (count < 0) fail(where + ": negative count");
    out.design.cells[k].push_back(cell);
    out.counts.counts[k].push_back(count);
  }
  out.design.validate();
  out.counts.schedule = out.design.schedule();
  out.counts.validate();
  return out;
}

}  // namespace ecm::io

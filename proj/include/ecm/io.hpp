#pragma once

#include <string>
#include <vector>

#include "ecm/simulate.hpp"
#include "ecm/types.hpp"

namespace ecm::io {

// Bumped when any on-disk layout changes incompatibly.
inline constexpr int kFormatVersion = 1;

// Writes content to path via a sibling temp file and rename, so
// readers never observe a half-written file.
void write_text_atomic(const std::string& path, const std::string& content);

std::string read_text(const std::string& path);

// Doubles printed with enough digits to round-trip exactly.
std::string format_double(double v);

// Long-format counts file, one row per (time, cell) with the cell
// geometry inline:
//   format_version,1
//   time_index,cell_index,x_lo,x_hi,y_lo,y_hi,count
// The companion times file maps time_index to the actual time:
//   format_version,1
//   time_index,t
void write_counts_csv(const std::string& path,
                      const sim::SurveyDesign& design,
                      const CountArrangement& counts);
void write_times_csv(const std::string& path,
                     const std::vector<double>& times);

struct CountsFile {
  sim::SurveyDesign design;
  CountArrangement counts;
};

// Reads both files back; validates geometry, schedule coherence and
// the version fields.  Throws std::runtime_error with line numbers.
CountsFile read_counts_csv(const std::string& counts_path,
                           const std::string& times_path);

}  // namespace ecm::io

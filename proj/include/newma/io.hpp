#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "newma/detectors.hpp"

namespace newma {

// Streaming reader for sample CSVs: one sample per row, comma-separated
// numeric columns. Lines starting with '#' are skipped, as are the first
// skip_rows data lines (for files with header rows). The dimension is fixed
// by the first parsed row.
class CsvSampleReader {
 public:
  explicit CsvSampleReader(std::istream& in, int skip_rows = 0);

  bool next(Eigen::VectorXd& out);
  int dim() const { return dim_; }
  long rows_read() const { return rows_; }

 private:
  std::istream& in_;
  int skip_remaining_ = 0;
  int dim_ = 0;
  long rows_ = 0;
  std::string line_;
};

// Whole-file loads; samples land one per column.
Eigen::MatrixXd read_csv_samples(const std::string& path, int skip_rows = 0);

void write_csv_row(std::ostream& out, const Eigen::Ref<const Eigen::VectorXd>& row);

std::vector<long> read_change_points(const std::string& path);
void write_change_points(const std::string& path, const std::vector<long>& points,
                         const std::string& manifest_hash);

// Trace lines: {"t":123,"stat":0.0412,"thresh":0.0390,"flag":true}; stat and
// thresh are null before the detector statistic is valid. The first line of a
// trace file is a meta object carrying the manifest hash.
void write_trace_line(std::ostream& out, const StepResult& r);

struct TraceFile {
  std::vector<StepResult> steps;
  std::string manifest_hash;
};

TraceFile read_trace(const std::string& path);

// Shortest round-trip decimal text for a double (to_chars).
std::string format_double(double value);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace newma

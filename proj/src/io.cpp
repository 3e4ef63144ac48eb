#include "newma/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "newma/errors.hpp"

namespace newma {

CsvSampleReader::CsvSampleReader(std::istream& in, int skip_rows)
    : in_(in), skip_remaining_(skip_rows) {}

bool CsvSampleReader::next(Eigen::VectorXd& out) {
  while (std::getline(in_, line_)) {
    if (line_.empty()) continue;
    if (line_[0] == '#') continue;
    if (skip_remaining_ > 0) {
      --skip_remaining_;
      continue;
    }
    std::vector<double> values;
    values.reserve(dim_ > 0 ? static_cast<std::size_t>(dim_) : 8);
    const char* cursor = line_.c_str();
    for (;;) {
      char* end = nullptr;
      const double v = std::strtod(cursor, &end);
      if (end == cursor)
        throw InputError("csv: cannot parse number in line '" + line_ + "'");
      values.push_back(v);
      cursor = end;
      while (*cursor == ' ' || *cursor == '\t') ++cursor;
      if (*cursor == ',') {
        ++cursor;
        continue;
      }
      if (*cursor == '\0' || *cursor == '\r') break;
      throw InputError("csv: unexpected character in line '" + line_ + "'");
    }
    if (dim_ == 0) dim_ = static_cast<int>(values.size());
    if (static_cast<int>(values.size()) != dim_)
      throw InputError("csv: row " + std::to_string(rows_ + 1) + " has " +
                       std::to_string(values.size()) + " columns, expected " +
                       std::to_string(dim_));
    out = Eigen::Map<const Eigen::VectorXd>(values.data(), dim_);
    ++rows_;
    return true;
  }
  return false;
}

Eigen::MatrixXd read_csv_samples(const std::string& path, int skip_rows) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  CsvSampleReader reader(in, skip_rows);
  std::vector<Eigen::VectorXd> rows;
  Eigen::VectorXd x;
  while (reader.next(x)) rows.push_back(x);
  if (rows.empty()) throw InputError("csv: no samples in '" + path + "'");
  Eigen::MatrixXd samples(rows.front().size(), static_cast<long>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    samples.col(static_cast<long>(i)) = rows[i];
  return samples;
}

std::string format_double(double value) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

void write_csv_row(std::ostream& out, const Eigen::Ref<const Eigen::VectorXd>& row) {
  for (long i = 0; i < row.size(); ++i) {
    if (i) out.put(',');
    out << format_double(row[i]);
  }
  out.put('\n');
}

std::vector<long> read_change_points(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::vector<long> points;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    try {
      points.push_back(std::stol(line));
    } catch (const std::exception&) {
      throw InputError("change points: cannot parse line '" + line + "'");
    }
  }
  return points;
}

void write_change_points(const std::string& path, const std::vector<long>& points,
                         const std::string& manifest_hash) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  if (!manifest_hash.empty()) out << "# manifest:" << manifest_hash << "\n";
  for (long p : points) out << p << "\n";
  if (!out) throw IoError("failed writing '" + path + "'");
}

void write_trace_line(std::ostream& out, const StepResult& r) {
  out << "{\"t\":" << r.t << ",\"stat\":";
  if (r.valid && std::isfinite(r.statistic))
    out << format_double(r.statistic);
  else
    out << "null";
  out << ",\"thresh\":";
  if (r.valid && std::isfinite(r.threshold))
    out << format_double(r.threshold);
  else
    out << "null";
  out << ",\"flag\":" << (r.flagged ? "true" : "false") << "}\n";
}

TraceFile read_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  TraceFile trace;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw InputError("trace line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!j.contains("t")) {
      if (j.contains("manifest_hash"))
        trace.manifest_hash = j["manifest_hash"].get<std::string>();
      continue;
    }
    StepResult r;
    r.t = j.at("t").get<long>();
    const auto& stat = j.at("stat");
    r.valid = !stat.is_null();
    r.statistic = r.valid ? stat.get<double>() : std::nan("");
    const auto& thresh = j.at("thresh");
    r.threshold = thresh.is_null() ? std::nan("") : thresh.get<double>();
    r.flagged = j.at("flag").get<bool>();
    trace.steps.push_back(r);
  }
  return trace;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << content;
  if (!out) throw IoError("failed writing '" + path + "'");
}

}  // namespace newma

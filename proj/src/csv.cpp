#include "spinclock/csv.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace spinclock {

std::string csv_format(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", x);
  return buf;
}

CsvBuilder::CsvBuilder(const std::vector<std::string>& header)
    : n_cols_(header.size()) {
  for (size_t i = 0; i < header.size(); ++i) {
    if (i) out_ += ',';
    out_ += header[i];
  }
  out_ += '\n';
}

void CsvBuilder::begin_row() {
  row_open_ = true;
  first_field_ = true;
  cur_cols_ = 0;
}

void CsvBuilder::add(double x) { add(csv_format(x)); }
void CsvBuilder::add(int x) { add(std::to_string(x)); }
void CsvBuilder::add(long x) { add(std::to_string(x)); }

void CsvBuilder::add(const std::string& s) {
  if (!row_open_) throw std::logic_error("CsvBuilder: add outside a row");
  if (!first_field_) out_ += ',';
  out_ += s;
  first_field_ = false;
  ++cur_cols_;
}

void CsvBuilder::end_row() {
  if (cur_cols_ != n_cols_)
    throw std::logic_error("CsvBuilder: row has " + std::to_string(cur_cols_) +
                           " fields, header has " + std::to_string(n_cols_));
  out_ += '\n';
  row_open_ = false;
}

void write_file_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw std::runtime_error("short write to " + tmp.string());
  }
  fs::rename(tmp, target);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream oss;
  oss << in.rdbuf();
  return oss.str();
}

}  // namespace spinclock

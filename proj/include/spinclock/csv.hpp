#pragma once

#include <string>
#include <vector>

namespace spinclock {

// Fixed CSV dialect: comma separated, '.' decimal, header row, LF endings,
// numbers formatted with %.12g. Reruns with identical inputs produce
// byte-identical files.
std::string csv_format(double x);

class CsvBuilder {
 public:
  explicit CsvBuilder(const std::vector<std::string>& header);

  void begin_row();
  void add(double x);
  void add(int x);
  void add(long x);
  void add(const std::string& s);
  void end_row();

  const std::string& str() const { return out_; }

 private:
  std::string out_;
  bool row_open_ = false;
  bool first_field_ = true;
  size_t n_cols_ = 0;
  size_t cur_cols_ = 0;
};

// Write via a temp file and rename, so readers never observe partial output.
void write_file_atomic(const std::string& path, const std::string& content);

std::string read_file(const std::string& path);

}  // namespace spinclock

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace malfuse {

// Shortest decimal string that parses back to the identical double.
std::string format_real(double value);

// Strict parsers: the whole token must be consumed.
bool try_parse_real(std::string_view text, double& out);
double parse_real(std::string_view text);
std::int64_t parse_int(std::string_view text);

std::string_view trim(std::string_view text);
std::vector<std::string_view> split(std::string_view text, char sep);
std::vector<std::string> split_lines(std::string_view text);

std::string read_file(const std::filesystem::path& path);

// Writes through a sibling temp file and renames it into place, so readers
// never observe a partially written artifact.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

// Line-oriented "key<TAB>value" records used by the structured text formats.
class RecordReader {
 public:
  explicit RecordReader(std::string_view text, std::string source = "<text>");

  bool done() const { return pos_ >= lines_.size(); }
  std::size_t line_number() const { return pos_ + 1; }

  // Returns the value of the next record and checks its key.
  std::string expect(std::string_view key);
  double expect_real(std::string_view key);
  std::int64_t expect_int(std::string_view key);
  void expect_line(std::string_view exact);
  std::string_view peek_key() const;

  [[noreturn]] void fail(const std::string& message) const;

 private:
  std::vector<std::string> lines_;
  std::size_t pos_ = 0;
  std::string source_;
};

}  // namespace malfuse

#include "malfuse/text_io.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <system_error>

namespace malfuse {

std::string format_real(double value) {
  std::array<char, 64> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  if (ec != std::errc()) throw std::runtime_error("format_real: to_chars failed");
  return std::string(buf.data(), end);
}

bool try_parse_real(std::string_view text, double& out) {
  text = trim(text);
  if (text.empty()) return false;
  if (text.front() == '+') text.remove_prefix(1);
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

double parse_real(std::string_view text) {
  double v = 0.0;
  if (!try_parse_real(text, v)) {
    throw std::invalid_argument("not a real number: '" + std::string(text) + "'");
  }
  return v;
}

std::int64_t parse_int(std::string_view text) {
  text = trim(text);
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size()) {
    throw std::invalid_argument("not an integer: '" + std::string(text) + "'");
  }
  return v;
}

std::string_view trim(std::string_view text) {
  const auto ws = " \t\r\n";
  const auto b = text.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = text.find_last_not_of(ws);
  return text.substr(b, e - b + 1);
}

std::vector<std::string_view> split(std::string_view text, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = text.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(text.substr(start));
      return out;
    }
    out.push_back(text.substr(start, pos - start));
    start = pos + 1;
  }
}

std::vector<std::string> split_lines(std::string_view text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    auto pos = text.find('\n', start);
    if (pos == std::string_view::npos) pos = text.size();
    std::string_view line = text.substr(start, pos - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.emplace_back(line);
    start = pos + 1;
  }
  return lines;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  namespace fs = std::filesystem;
  const fs::path dir = path.has_parent_path() ? path.parent_path() : fs::path(".");
  if (!fs::is_directory(dir)) {
    throw std::runtime_error("output directory does not exist: " + dir.string());
  }
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write file: " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      std::error_code ignored;
      fs::remove(tmp, ignored);
      throw std::runtime_error("short write: " + tmp.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    std::error_code ignored;
    fs::remove(tmp, ignored);
    throw std::runtime_error("cannot rename " + tmp.string() + " -> " + path.string() + ": " +
                             ec.message());
  }
}

RecordReader::RecordReader(std::string_view text, std::string source)
    : lines_(split_lines(text)), source_(std::move(source)) {}

std::string_view RecordReader::peek_key() const {
  if (done()) return {};
  std::string_view line = lines_[pos_];
  return line.substr(0, line.find('\t'));
}

std::string RecordReader::expect(std::string_view key) {
  if (done()) fail("unexpected end of file, expected '" + std::string(key) + "'");
  const std::string& line = lines_[pos_];
  const auto tab = line.find('\t');
  if (tab == std::string::npos || std::string_view(line).substr(0, tab) != key) {
    fail("expected record '" + std::string(key) + "'");
  }
  ++pos_;
  return line.substr(tab + 1);
}

double RecordReader::expect_real(std::string_view key) {
  const std::string v = expect(key);
  double out = 0.0;
  if (!try_parse_real(v, out)) {
    --pos_;
    fail("bad real for '" + std::string(key) + "'");
  }
  return out;
}

std::int64_t RecordReader::expect_int(std::string_view key) {
  const std::string v = expect(key);
  try {
    return parse_int(v);
  } catch (const std::invalid_argument&) {
    --pos_;
    fail("bad integer for '" + std::string(key) + "'");
  }
}

void RecordReader::expect_line(std::string_view exact) {
  if (done() || lines_[pos_] != exact) fail("expected '" + std::string(exact) + "'");
  ++pos_;
}

void RecordReader::fail(const std::string& message) const {
  throw std::runtime_error(source_ + ":" + std::to_string(line_number()) + ": " + message);
}

}  // namespace malfuse

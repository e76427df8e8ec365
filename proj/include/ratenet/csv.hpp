#pragma once

// Minimal RFC-4180 CSV writer with deterministic number formatting.
//
// Doubles are printed with std::to_chars shortest round-trip form, so the
// text is a pure function of the bit pattern — identical runs produce
// byte-identical files regardless of locale or platform printf quirks.
// Rows end in LF and files are opened in binary mode to keep that true on
// every platform.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace ratenet {

namespace csv {

inline std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  if (res.ec != std::errc())
    throw std::runtime_error("csv: double formatting failed");
  return std::string(buf, res.ptr);
}

inline std::string format_int(std::int64_t x) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  if (res.ec != std::errc())
    throw std::runtime_error("csv: integer formatting failed");
  return std::string(buf, res.ptr);
}

// Quote a field only when RFC 4180 requires it.
inline std::string escape(std::string_view field) {
  const bool needs_quotes =
      field.find_first_of(",\"\r\n") != std::string_view::npos;
  if (!needs_quotes) return std::string(field);
  std::string out;
  out.reserve(field.size() + 2);
  out.push_back('"');
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace csv

// Buffered writer; content is assembled in memory and flushed on close so a
// failed run never leaves a half-written file behind the checksum.
class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header) {
    row(std::move(header));
  }

  void row(const std::vector<std::string>& fields) {
    bool first = true;
    for (const auto& f : fields) {
      if (!first) buf_.push_back(',');
      first = false;
      buf_ += csv::escape(f);
    }
    buf_.push_back('\n');
  }

  const std::string& content() const { return buf_; }

  void write_file(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("csv: cannot open " + path);
    out.write(buf_.data(), static_cast<std::streamsize>(buf_.size()));
    if (!out) throw std::runtime_error("csv: write failed on " + path);
  }

 private:
  std::string buf_;
};

}  // namespace ratenet

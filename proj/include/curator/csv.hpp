#pragma once

#include <istream>
#include <string>
#include <vector>

namespace curator {

/// Streaming RFC-4180 reader: quoted cells, doubled quotes, embedded
/// newlines, CRLF or LF line endings, optional UTF-8 BOM.
class CsvReader {
 public:
  explicit CsvReader(std::istream& in, char delimiter = ',') : in_(in), delim_(delimiter) {
    if (in_.peek() == 0xEF) {
      char bom[3];
      in_.read(bom, 3);
      if (!(static_cast<unsigned char>(bom[1]) == 0xBB && static_cast<unsigned char>(bom[2]) == 0xBF)) {
        in_.clear();
        in_.seekg(0);
      }
    }
  }

  /// Reads the next record; false at end of input.
  bool next(std::vector<std::string>& row) {
    row.clear();
    if (in_.peek() == std::char_traits<char>::eof()) return false;

    std::string cell;
    bool quoted = false;
    bool cell_was_quoted = false;
    for (;;) {
      const int c = in_.get();
      if (c == std::char_traits<char>::eof()) {
        row.push_back(std::move(cell));
        ++line_;
        return true;
      }
      const char ch = static_cast<char>(c);
      if (quoted) {
        if (ch == '"') {
          if (in_.peek() == '"') {
            in_.get();
            cell.push_back('"');
          } else {
            quoted = false;
          }
        } else {
          if (ch == '\n') ++embedded_newlines_;
          cell.push_back(ch);
        }
        continue;
      }
      if (ch == '"' && cell.empty() && !cell_was_quoted) {
        quoted = true;
        cell_was_quoted = true;
      } else if (ch == delim_) {
        row.push_back(std::move(cell));
        cell.clear();
        cell_was_quoted = false;
      } else if (ch == '\r' && in_.peek() == '\n') {
        // swallowed; the '\n' ends the record
      } else if (ch == '\n') {
        row.push_back(std::move(cell));
        ++line_;
        return true;
      } else {
        cell.push_back(ch);
      }
    }
  }

  /// Number of records consumed so far (1-based line of the last record, ignoring embedded newlines).
  std::size_t record_number() const noexcept { return line_; }

 private:
  std::istream& in_;
  char delim_;
  std::size_t line_ = 0;
  std::size_t embedded_newlines_ = 0;
};

/// Quotes a cell when needed for writing CSV.
inline std::string csv_escape(const std::string& cell) {
  if (cell.find_first_of(",\"\r\n") == std::string::npos) return cell;
  std::string out = "\"";
  for (char c : cell) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out += '"';
  return out;
}

}  // namespace curator

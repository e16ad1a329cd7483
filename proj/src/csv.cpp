#include "nbsmooth/csv.hpp"

#include <algorithm>
#include <fstream>

#include "nbsmooth/error.hpp"

namespace nbs::csv {

std::vector<std::string> split_line(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.emplace_back(line.substr(start));
      return out;
    }
    out.emplace_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

std::size_t Document::column(std::string_view name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) {
    throw DataIntegrityError("missing column '" + std::string(name) + "'");
  }
  return static_cast<std::size_t>(it - header.begin());
}

bool Document::has_column(std::string_view name) const {
  return std::find(header.begin(), header.end(), name) != header.end();
}

Document read(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot open '" + file.string() + "'");
  Document doc;
  std::string line;
  if (!std::getline(in, line)) {
    throw FormatError("empty CSV file '" + file.string() + "'");
  }
  doc.header = split_line(line);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto fields = split_line(line);
    if (fields.size() != doc.header.size()) {
      throw FormatError(file.string() + ":" + std::to_string(line_no) +
                        ": expected " + std::to_string(doc.header.size()) +
                        " fields, got " + std::to_string(fields.size()));
    }
    doc.rows.push_back(std::move(fields));
  }
  return doc;
}

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string checked_field(std::string_view field) {
  if (field.find_first_of(",\n\r") != std::string_view::npos) {
    throw FormatError("CSV field contains a separator: '" +
                      std::string(field) + "'");
  }
  return std::string(field);
}

}  // namespace nbs::csv

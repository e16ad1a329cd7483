#pragma once

#include <cstdio>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace nbs::csv {

/// Unquoted comma-separated fields. None of the toolkit's tables need
/// quoting; writers reject fields containing commas or newlines.
std::vector<std::string> split_line(std::string_view line);

struct Document {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Index of a header column; throws DataIntegrityError naming the column
  /// when absent.
  std::size_t column(std::string_view name) const;
  bool has_column(std::string_view name) const;
};

Document read(const std::filesystem::path& file);

/// Fixed 9-significant-digit rendering used by every CSV writer.
std::string format_number(double v);

std::string checked_field(std::string_view field);

}  // namespace nbs::csv

#include "nbsmooth/tables.hpp"

#include <algorithm>
#include <fstream>

#include "nbsmooth/csv.hpp"
#include "nbsmooth/error.hpp"

namespace nbs {

namespace {
const char* const kMetaColumns[] = {"clip_id", "machine", "section", "domain",
                                    "label"};

double parse_number(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw FormatError("bad number '" + s + "' in " + what);
  }
}
}  // namespace

bool ScoreTable::has_column(const std::string& name) const {
  return std::find(columns.begin(), columns.end(), name) != columns.end();
}

const std::vector<double>& ScoreTable::column(const std::string& name) const {
  const auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end()) {
    throw DataIntegrityError("score table has no column '" + name + "'");
  }
  return values[static_cast<std::size_t>(it - columns.begin())];
}

void ScoreTable::set_column(const std::string& name, std::vector<double> v) {
  if (v.size() != rows.size()) {
    throw ShapeError("column '" + name + "' has " + std::to_string(v.size()) +
                     " values for " + std::to_string(rows.size()) + " rows");
  }
  const auto it = std::find(columns.begin(), columns.end(), name);
  if (it != columns.end()) {
    values[static_cast<std::size_t>(it - columns.begin())] = std::move(v);
    return;
  }
  columns.push_back(name);
  values.push_back(std::move(v));
}

void write_score_table(const std::filesystem::path& file, const ScoreTable& table) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw IoError("cannot write '" + file.string() + "'");
  out << "clip_id,machine,section,domain,label";
  for (const auto& c : table.columns) out << ',' << csv::checked_field(c);
  out << '\n';
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& m = table.rows[r];
    out << csv::checked_field(m.clip_id) << ',' << csv::checked_field(m.machine)
        << ',' << m.section << ',' << to_string(m.domain) << ','
        << to_string(m.label);
    for (const auto& col : table.values) out << ',' << csv::format_number(col[r]);
    out << '\n';
  }
}

ScoreTable read_score_table(const std::filesystem::path& file) {
  const auto doc = csv::read(file);
  std::size_t idx[5];
  for (int i = 0; i < 5; ++i) {
    if (!doc.has_column(kMetaColumns[i])) {
      throw DataIntegrityError(file.string() + ": missing column '" +
                               kMetaColumns[i] + "'");
    }
    idx[i] = doc.column(kMetaColumns[i]);
  }
  ScoreTable t;
  std::vector<std::size_t> score_idx;
  for (std::size_t c = 0; c < doc.header.size(); ++c) {
    if (std::find(std::begin(idx), std::end(idx), c) == std::end(idx)) {
      t.columns.push_back(doc.header[c]);
      score_idx.push_back(c);
    }
  }
  t.values.assign(t.columns.size(), {});
  for (const auto& row : doc.rows) {
    ClipMeta m;
    m.clip_id = row[idx[0]];
    m.machine = row[idx[1]];
    m.section = static_cast<int>(parse_number(row[idx[2]], "section"));
    m.domain = parse_domain(row[idx[3]]);
    m.label = parse_label(row[idx[4]]);
    m.split = Split::Test;
    t.rows.push_back(std::move(m));
    for (std::size_t j = 0; j < score_idx.size(); ++j) {
      t.values[j].push_back(parse_number(row[score_idx[j]], t.columns[j]));
    }
  }
  return t;
}

Eigen::Index EmbeddingTable::find(const std::string& clip_id) const {
  const auto it = index_.find(clip_id);
  return it == index_.end() ? -1 : it->second;
}

void EmbeddingTable::rebuild_index() {
  index_.clear();
  for (std::size_t i = 0; i < clip_ids.size(); ++i) {
    if (!index_.emplace(clip_ids[i], static_cast<Eigen::Index>(i)).second) {
      throw DataIntegrityError("duplicate clip_id '" + clip_ids[i] +
                               "' in embedding table");
    }
  }
}

void write_embedding_table(const std::filesystem::path& file,
                           const EmbeddingTable& table) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw IoError("cannot write '" + file.string() + "'");
  out << "clip_id";
  for (Eigen::Index c = 0; c < table.values.cols(); ++c) out << ",e" << c;
  out << '\n';
  for (std::size_t r = 0; r < table.clip_ids.size(); ++r) {
    out << csv::checked_field(table.clip_ids[r]);
    for (Eigen::Index c = 0; c < table.values.cols(); ++c) {
      out << ',' << csv::format_number(table.values(static_cast<Eigen::Index>(r), c));
    }
    out << '\n';
  }
}

EmbeddingTable read_embedding_table(const std::filesystem::path& file) {
  const auto doc = csv::read(file);
  if (doc.header.empty() || doc.header.front() != "clip_id") {
    throw DataIntegrityError(file.string() + ": first column must be 'clip_id'");
  }
  EmbeddingTable t;
  const auto dim = static_cast<Eigen::Index>(doc.header.size() - 1);
  t.values.resize(static_cast<Eigen::Index>(doc.rows.size()), dim);
  for (std::size_t r = 0; r < doc.rows.size(); ++r) {
    t.clip_ids.push_back(doc.rows[r][0]);
    for (Eigen::Index c = 0; c < dim; ++c) {
      t.values(static_cast<Eigen::Index>(r), c) =
          parse_number(doc.rows[r][static_cast<std::size_t>(c + 1)], "embedding");
    }
  }
  t.rebuild_index();
  return t;
}

}  // namespace nbs

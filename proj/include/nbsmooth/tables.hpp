#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "nbsmooth/corpus.hpp"

namespace nbs {

/// Per-clip score table: clip_id,machine,section,domain,label followed by
/// one or more named score columns (score_gen, score_smooth, score_gmm, ...).
struct ScoreTable {
  std::vector<ClipMeta> rows;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> values;  // values[column][row]

  std::size_t size() const { return rows.size(); }
  bool has_column(const std::string& name) const;
  /// Throws DataIntegrityError naming the column when absent.
  const std::vector<double>& column(const std::string& name) const;
  /// Adds or replaces a column.
  void set_column(const std::string& name, std::vector<double> v);
};

void write_score_table(const std::filesystem::path& file, const ScoreTable& table);
/// Missing metadata columns raise DataIntegrityError naming the column.
ScoreTable read_score_table(const std::filesystem::path& file);

/// clip_id followed by one column per embedding dimension (e0, e1, ...).
struct EmbeddingTable {
  std::vector<std::string> clip_ids;
  Eigen::MatrixXd values;  // one row per clip

  std::size_t size() const { return clip_ids.size(); }
  /// Row of a clip, or -1.
  Eigen::Index find(const std::string& clip_id) const;
  void rebuild_index();

 private:
  std::unordered_map<std::string, Eigen::Index> index_;
};

void write_embedding_table(const std::filesystem::path& file,
                           const EmbeddingTable& table);
EmbeddingTable read_embedding_table(const std::filesystem::path& file);

}  // namespace nbs

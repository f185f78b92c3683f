#pragma once

#include "m4n/trainer.hpp"

#include <cstdint>
#include <optional>
#include <string>

namespace m4n {

struct ParseError : std::runtime_error {
  ParseError(const std::string& file, std::size_t line, const std::string& msg)
      : std::runtime_error(file + ":" + std::to_string(line) + ": " + msg), line(line) {}
  std::size_t line;
};

struct LoadedDataset {
  Dataset data;
  TaskSpec task;
};

// Tabular CSV: header feature_0..feature_{d-1},label; one-based labels.
// Sequence TSV: seq_id<TAB>label_string<TAB>f,f,...|f,f,...|... where letter
//   'a' + (r - 1) encodes state r and every sequence has the same length.
// Ranking CSV: feature_* columns followed by rank_1..rank_M.
//
// `states` fixes k (multiclass/ordinal) or R (chain); otherwise the largest
// label seen is used.
LoadedDataset load_dataset(const std::string& path, TaskKind kind, std::optional<int> states = std::nullopt);

LoadedDataset parse_tabular(std::istream& in, const std::string& name, TaskKind kind, std::optional<int> states);
LoadedDataset parse_sequences(std::istream& in, const std::string& name, std::optional<int> states);
LoadedDataset parse_rankings(std::istream& in, const std::string& name);

/// Writes `data` in the grammar matching the task kind.
void write_dataset(std::ostream& out, const Dataset& data, const TaskSpec& task);
void write_dataset(const std::string& path, const Dataset& data, const TaskSpec& task);

/// Label in the file grammar (class index, letter string or rank list).
std::string format_label(const TaskSpec& task, const Label& label);

/// 64-bit FNV-1a of the file bytes.
std::uint64_t fnv1a_file(const std::string& path);
std::uint64_t fnv1a(const std::string& bytes, std::uint64_t h = 0xcbf29ce484222325ULL);

}  // namespace m4n

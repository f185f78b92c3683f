#include "m4n/dataset_io.hpp"

#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace m4n {
namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

double parse_double(const std::string& tok, const std::string& file, std::size_t line) {
  if (tok.empty()) throw ParseError(file, line, "empty numeric field");
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(tok.c_str(), &end);
  if (end != tok.c_str() + tok.size() || errno == ERANGE || !std::isfinite(v)) {
    throw ParseError(file, line, "invalid number '" + tok + "'");
  }
  return v;
}

int parse_int(const std::string& tok, const std::string& file, std::size_t line) {
  if (tok.empty()) throw ParseError(file, line, "empty integer field");
  char* end = nullptr;
  errno = 0;
  const long v = std::strtol(tok.c_str(), &end, 10);
  if (end != tok.c_str() + tok.size() || errno == ERANGE || v < -1000000 || v > 1000000) {
    throw ParseError(file, line, "invalid integer '" + tok + "'");
  }
  return static_cast<int>(v);
}

Matrix to_matrix(const std::vector<std::vector<double>>& rows, std::size_t d) {
  Matrix x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < d; ++j) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  }
  return x;
}

std::string number(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

}  // namespace

LoadedDataset parse_tabular(std::istream& in, const std::string& name, TaskKind kind, std::optional<int> states) {
  if (kind != TaskKind::multiclass && kind != TaskKind::ordinal) {
    throw std::invalid_argument("tabular files hold multiclass or ordinal data");
  }
  std::string line;
  std::size_t lineno = 1;
  if (!std::getline(in, line)) throw ParseError(name, 1, "missing header");
  strip_cr(line);
  const std::vector<std::string> header = split(line, ',');
  if (header.size() < 2 || header.back() != "label") throw ParseError(name, 1, "header must end with 'label'");
  const std::size_t d = header.size() - 1;
  for (std::size_t j = 0; j < d; ++j) {
    if (header[j] != "feature_" + std::to_string(j)) {
      throw ParseError(name, 1, "expected column 'feature_" + std::to_string(j) + "', found '" + header[j] + "'");
    }
  }
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  std::vector<std::size_t> label_lines;
  while (std::getline(in, line)) {
    ++lineno;
    strip_cr(line);
    if (line.empty()) continue;
    const std::vector<std::string> tok = split(line, ',');
    if (tok.size() != d + 1) {
      throw ParseError(name, lineno, "expected " + std::to_string(d + 1) + " fields, found " + std::to_string(tok.size()));
    }
    std::vector<double> row(d);
    for (std::size_t j = 0; j < d; ++j) row[j] = parse_double(tok[j], name, lineno);
    const int y = parse_int(tok[d], name, lineno);
    if (y < 1) throw ParseError(name, lineno, "labels are one-based, found " + tok[d]);
    rows.push_back(std::move(row));
    labels.push_back(y);
    label_lines.push_back(lineno);
  }
  if (rows.empty()) throw ParseError(name, lineno, "no examples");
  int k = 0;
  for (int y : labels) k = std::max(k, y);
  if (states) {
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] > *states) {
        throw ParseError(name, label_lines[i], "label " + std::to_string(labels[i]) + " exceeds declared " +
                                                   std::to_string(*states) + " classes");
      }
    }
    k = *states;
  }
  if (k < 2) throw ParseError(name, lineno, "need at least 2 classes");
  LoadedDataset out{{to_matrix(rows, d), {}}, kind == TaskKind::multiclass ? TaskSpec::multiclass(k) : TaskSpec::ordinal(k)};
  for (int y : labels) out.data.labels.push_back({y});
  return out;
}

LoadedDataset parse_sequences(std::istream& in, const std::string& name, std::optional<int> states) {
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::vector<double>> rows;
  std::vector<Label> labels;
  std::size_t length = 0, dim = 0;
  int max_state = 0;
  while (std::getline(in, line)) {
    ++lineno;
    strip_cr(line);
    if (line.empty()) continue;
    const std::vector<std::string> tok = split(line, '\t');
    if (tok.size() != 3) throw ParseError(name, lineno, "expected 3 tab-separated fields, found " + std::to_string(tok.size()));
    const std::string& lab = tok[1];
    if (lab.empty()) throw ParseError(name, lineno, "empty label string");
    const std::vector<std::string> blocks = split(tok[2], '|');
    if (blocks.size() != lab.size()) {
      throw ParseError(name, lineno, "label string has " + std::to_string(lab.size()) + " positions but " +
                                         std::to_string(blocks.size()) + " feature blocks");
    }
    if (length == 0) length = lab.size();
    if (lab.size() != length) {
      throw ParseError(name, lineno, "sequence length " + std::to_string(lab.size()) + " differs from " +
                                         std::to_string(length) + " (fixed-length sequences required)");
    }
    Label y(length);
    std::vector<double> row;
    for (std::size_t m = 0; m < length; ++m) {
      const char c = lab[m];
      if (c < 'a' || c > 'z') throw ParseError(name, lineno, std::string("invalid state letter '") + c + "'");
      y[m] = c - 'a' + 1;
      max_state = std::max(max_state, y[m]);
      const std::vector<std::string> f = split(blocks[m], ',');
      if (dim == 0) dim = f.size();
      if (f.size() != dim) throw ParseError(name, lineno, "position " + std::to_string(m + 1) + " has " +
                                                               std::to_string(f.size()) + " features, expected " +
                                                               std::to_string(dim));
      for (const std::string& t : f) row.push_back(parse_double(t, name, lineno));
    }
    if (states && max_state > *states) {
      throw ParseError(name, lineno, "state exceeds declared " + std::to_string(*states) + " states");
    }
    rows.push_back(std::move(row));
    labels.push_back(std::move(y));
  }
  if (rows.empty()) throw ParseError(name, lineno, "no examples");
  const int R = states ? *states : max_state;
  if (R < 2) throw ParseError(name, lineno, "need at least 2 states");
  LoadedDataset out{{to_matrix(rows, length * dim), std::move(labels)},
                    TaskSpec::chain(static_cast<int>(length), R)};
  return out;
}

LoadedDataset parse_rankings(std::istream& in, const std::string& name) {
  std::string line;
  std::size_t lineno = 1;
  if (!std::getline(in, line)) throw ParseError(name, 1, "missing header");
  strip_cr(line);
  const std::vector<std::string> header = split(line, ',');
  std::size_t d = 0;
  while (d < header.size() && header[d] == "feature_" + std::to_string(d)) ++d;
  const std::size_t M = header.size() - d;
  if (M < 2) throw ParseError(name, 1, "need at least rank_1, rank_2 columns");
  for (std::size_t m = 0; m < M; ++m) {
    if (header[d + m] != "rank_" + std::to_string(m + 1)) {
      throw ParseError(name, 1, "expected column 'rank_" + std::to_string(m + 1) + "', found '" + header[d + m] + "'");
    }
  }
  const TaskSpec task = TaskSpec::ranking(static_cast<int>(M));
  std::vector<std::vector<double>> rows;
  std::vector<Label> labels;
  while (std::getline(in, line)) {
    ++lineno;
    strip_cr(line);
    if (line.empty()) continue;
    const std::vector<std::string> tok = split(line, ',');
    if (tok.size() != header.size()) {
      throw ParseError(name, lineno, "expected " + std::to_string(header.size()) + " fields, found " + std::to_string(tok.size()));
    }
    std::vector<double> row(d);
    for (std::size_t j = 0; j < d; ++j) row[j] = parse_double(tok[j], name, lineno);
    Label y(M);
    for (std::size_t m = 0; m < M; ++m) y[m] = parse_int(tok[d + m], name, lineno);
    try {
      validate_label(task, y);
    } catch (const InvalidLabel& e) {
      throw ParseError(name, lineno, e.what());
    }
    rows.push_back(std::move(row));
    labels.push_back(std::move(y));
  }
  if (rows.empty()) throw ParseError(name, lineno, "no examples");
  return {{to_matrix(rows, d), std::move(labels)}, task};
}

LoadedDataset load_dataset(const std::string& path, TaskKind kind, std::optional<int> states) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open dataset '" + path + "'");
  switch (kind) {
    case TaskKind::multiclass:
    case TaskKind::ordinal:
      return parse_tabular(in, path, kind, states);
    case TaskKind::chain:
      return parse_sequences(in, path, states);
    case TaskKind::ranking:
      return parse_rankings(in, path);
  }
  throw std::logic_error("unreachable");
}

std::string format_label(const TaskSpec& task, const Label& label) {
  validate_label(task, label);
  std::string out;
  switch (task.kind()) {
    case TaskKind::multiclass:
    case TaskKind::ordinal:
      return std::to_string(label[0]);
    case TaskKind::chain:
      for (int s : label) out.push_back(static_cast<char>('a' + s - 1));
      return out;
    case TaskKind::ranking:
      for (std::size_t m = 0; m < label.size(); ++m) out += (m ? "," : "") + std::to_string(label[m]);
      return out;
  }
  return out;
}

void write_dataset(std::ostream& out, const Dataset& data, const TaskSpec& task) {
  const Eigen::Index cols = data.inputs.cols();
  if (task.kind() == TaskKind::chain) {
    const int M = task.layout().parts;
    if (cols % M != 0) throw LayoutMismatch("sequence inputs are not divisible by the length");
    const Eigen::Index d = cols / M;
    for (std::size_t i = 0; i < data.size(); ++i) {
      out << "seq" << i << '\t' << format_label(task, data.labels[i]) << '\t';
      for (int m = 0; m < M; ++m) {
        for (Eigen::Index j = 0; j < d; ++j) {
          out << (j ? "," : "") << number(data.inputs(static_cast<Eigen::Index>(i), m * d + j));
        }
        out << (m + 1 < M ? "|" : "\n");
      }
    }
    return;
  }
  for (Eigen::Index j = 0; j < cols; ++j) out << "feature_" << j << ',';
  if (task.kind() == TaskKind::ranking) {
    for (int m = 1; m <= task.layout().parts; ++m) out << "rank_" << m << (m < task.layout().parts ? "," : "\n");
  } else {
    out << "label\n";
  }
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) out << number(data.inputs(static_cast<Eigen::Index>(i), j)) << ',';
    out << format_label(task, data.labels[i]) << '\n';
  }
}

void write_dataset(const std::string& path, const Dataset& data, const TaskSpec& task) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  write_dataset(out, data, task);
}

std::uint64_t fnv1a(const std::string& bytes, std::uint64_t h) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t fnv1a_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open dataset '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return fnv1a(ss.str());
}

}  // namespace m4n

#include "igniter/word_vectors.hpp"

#include <charconv>
#include <fstream>
#include <vector>

namespace igniter {

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) fields.push_back(line.substr(i, j - i));
    i = j;
  }
  return fields;
}

bool parse_double(std::string_view sv, double& out) {
  const char* first = sv.data();
  const char* last = sv.data() + sv.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

bool is_integer(std::string_view sv) {
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(sv.data(), sv.data() + sv.size(), v);
  return ec == std::errc() && ptr == sv.data() + sv.size();
}

}  // namespace

WordEmbeddingTable load_word_vectors(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open for reading: " + path);

  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> tokens;
  std::vector<std::vector<double>> rows;
  int g1 = -1;
  WordEmbeddingTable table;

  while (std::getline(in, line)) {
    ++line_no;
    const auto fields = split_fields(line);
    if (fields.empty()) continue;
    // "vocab_size dim" header: exactly two integer fields on the first line.
    if (line_no == 1 && fields.size() == 2 && is_integer(fields[0]) && is_integer(fields[1])) {
      continue;
    }
    if (fields.size() < 2) {
      throw parse_error(path + ":" + std::to_string(line_no) + ": expected 'token v1 ... vg'");
    }
    const int dim = static_cast<int>(fields.size()) - 1;
    if (g1 < 0) {
      g1 = dim;
    } else if (dim != g1) {
      throw parse_error(path + ":" + std::to_string(line_no) + ": dimension " +
                        std::to_string(dim) + " != " + std::to_string(g1));
    }
    std::string token(fields[0]);
    if (table.index.map.count(token)) continue;  // first occurrence wins
    std::vector<double> row(static_cast<std::size_t>(dim));
    for (int d = 0; d < dim; ++d) {
      if (!parse_double(fields[static_cast<std::size_t>(d) + 1], row[static_cast<std::size_t>(d)])) {
        throw parse_error(path + ":" + std::to_string(line_no) + ": bad float '" +
                          std::string(fields[static_cast<std::size_t>(d) + 1]) + "'");
      }
    }
    table.index.map.emplace(std::move(token), static_cast<std::int32_t>(rows.size()));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw parse_error(path + ": no word vectors found");

  table.g1 = g1;
  table.vectors = Mat<double>::Zero(static_cast<Eigen::Index>(rows.size()) + 2, g1);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (int d = 0; d < g1; ++d) {
      table.vectors(static_cast<Eigen::Index>(i), d) = rows[i][static_cast<std::size_t>(d)];
    }
  }
  table.index.pad_id = static_cast<std::int32_t>(rows.size());
  table.index.oov_id = static_cast<std::int32_t>(rows.size()) + 1;
  return table;
}

}  // namespace igniter

#pragma once

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "typedom/error.hpp"
#include "typedom/io.hpp"

namespace typedom {

enum class EmbeddingFormat { plain_text, text_with_count_header };

// Read-only word -> vector table. Vectors are stored contiguously in
// insertion order so the table re-serializes in the order it was read.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  explicit EmbeddingTable(std::size_t dim) : dim_(dim) {}

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return words_.size(); }
  bool empty() const noexcept { return words_.empty(); }
  const std::vector<std::string>& words() const noexcept { return words_; }

  // Returns false (and leaves the table untouched) when the word is already
  // present: the first occurrence wins.
  bool insert(std::string word, std::span<const double> vec) {
    if (vec.size() != dim_) {
      throw Error(ErrorKind::input, "vector for '" + word + "' has " +
                                        std::to_string(vec.size()) + " components, expected " +
                                        std::to_string(dim_));
    }
    for (double x : vec) {
      if (!std::isfinite(x)) {
        throw Error(ErrorKind::parse, "non-finite component for '" + word + "'");
      }
    }
    if (index_.contains(word)) return false;
    index_.emplace(word, words_.size());
    words_.push_back(std::move(word));
    data_.insert(data_.end(), vec.begin(), vec.end());
    return true;
  }

  const double* find(std::string_view word) const {
    auto it = index_.find(std::string(word));
    if (it == index_.end()) return nullptr;
    return data_.data() + it->second * dim_;
  }

  std::span<const double> at(std::size_t i) const {
    return {data_.data() + i * dim_, dim_};
  }

 private:
  std::size_t dim_ = 0;
  std::vector<std::string> words_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<double> data_;
};

struct LabelVector {
  std::string label;
  std::vector<double> vector;
  bool resolved = false;
};

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    if (i >= line.size()) break;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
    out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

inline std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

}  // namespace detail

inline EmbeddingTable parse_embeddings(const std::string& text, EmbeddingFormat format) {
  const auto lines = io::split_lines(text);
  std::size_t header_dim = 0;
  std::size_t first = 0;
  if (format == EmbeddingFormat::text_with_count_header) {
    if (lines.empty()) throw Error(ErrorKind::empty, "empty embedding file");
    auto fields = detail::split_fields(lines[0]);
    double count = 0, dim = 0;
    if (fields.size() != 2 || !io::parse_real(fields[0], count) ||
        !io::parse_real(fields[1], dim) || dim < 1) {
      throw Error(ErrorKind::parse, "malformed count header at line 1");
    }
    header_dim = static_cast<std::size_t>(dim);
    first = 1;
  }

  EmbeddingTable table;
  bool have_dim = false;
  std::vector<double> vec;
  for (std::size_t i = first; i < lines.size(); ++i) {
    const std::size_t lineno = i + 1;
    auto fields = detail::split_fields(lines[i]);
    if (fields.empty()) continue;
    if (fields.size() < 2) {
      throw Error(ErrorKind::parse, "no vector components at line " + std::to_string(lineno));
    }
    const std::size_t dim = fields.size() - 1;
    if (!have_dim) {
      if (header_dim != 0 && dim != header_dim) {
        throw Error(ErrorKind::parse, "dimension mismatch at line " + std::to_string(lineno));
      }
      table = EmbeddingTable(dim);
      have_dim = true;
    } else if (dim != table.dim()) {
      throw Error(ErrorKind::parse, "dimension mismatch at line " + std::to_string(lineno));
    }
    vec.assign(dim, 0.0);
    for (std::size_t d = 0; d < dim; ++d) {
      if (!io::parse_real(fields[d + 1], vec[d]) || !std::isfinite(vec[d])) {
        throw Error(ErrorKind::parse, "invalid component at line " + std::to_string(lineno));
      }
    }
    table.insert(std::string(fields[0]), vec);
  }
  if (table.empty()) throw Error(ErrorKind::empty, "empty embedding file");
  return table;
}

inline EmbeddingTable load_embeddings(const std::filesystem::path& path,
                                      EmbeddingFormat format = EmbeddingFormat::plain_text) {
  return parse_embeddings(io::read_file(path), format);
}

inline std::string serialize_embeddings(const EmbeddingTable& table, EmbeddingFormat format) {
  std::string out;
  if (format == EmbeddingFormat::text_with_count_header) {
    out += std::to_string(table.size()) + " " + std::to_string(table.dim()) + "\n";
  }
  for (std::size_t i = 0; i < table.size(); ++i) {
    out += table.words()[i];
    for (double x : table.at(i)) {
      out += ' ';
      out += io::format_real(x);
    }
    out += '\n';
  }
  return out;
}

// Splits a label into lookup tokens on spaces, hyphens and underscores.
inline std::vector<std::string> label_tokens(std::string_view label) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char c : label) {
    if (c == ' ' || c == '-' || c == '_') {
      if (!cur.empty()) tokens.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

// Mean of the vectors of the label's tokens. Each token is looked up as
// written, then lower-cased. A label with no known token is unresolved and
// carries a zero vector.
inline LabelVector embed_label(std::string_view label, const EmbeddingTable& table) {
  LabelVector out{std::string(label), std::vector<double>(table.dim(), 0.0), false};
  std::size_t found = 0;
  for (const auto& tok : label_tokens(label)) {
    const double* v = table.find(tok);
    if (v == nullptr) v = table.find(detail::ascii_lower(tok));
    if (v == nullptr) continue;
    for (std::size_t d = 0; d < table.dim(); ++d) out.vector[d] += v[d];
    ++found;
  }
  if (found > 0) {
    out.resolved = true;
    if (found > 1) {
      for (double& x : out.vector) x /= static_cast<double>(found);
    }
  }
  return out;
}

inline std::vector<LabelVector> embed_labels(std::span<const std::string> labels,
                                             const EmbeddingTable& table) {
  std::vector<LabelVector> out;
  out.reserve(labels.size());
  for (const auto& l : labels) out.push_back(embed_label(l, table));
  return out;
}

inline double cosine(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) {
    throw Error(ErrorKind::input, "cosine of vectors with different lengths");
  }
  double dot = 0, nu = 0, nv = 0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  if (nu == 0 || nv == 0) {
    throw Error(ErrorKind::numerical, "undefined similarity for a zero vector");
  }
  double c = dot / (std::sqrt(nu) * std::sqrt(nv));
  if (c > 1) c = 1;
  if (c < -1) c = -1;
  return c;
}

}  // namespace typedom

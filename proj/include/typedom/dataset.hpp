#pragma once

#include <algorithm>
#include <cstddef>
#include <filesystem>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "typedom/domains.hpp"
#include "typedom/error.hpp"
#include "typedom/io.hpp"

namespace typedom {

struct Span {
  std::size_t start = 0;
  std::size_t end = 0;
  friend bool operator==(const Span&, const Span&) = default;
};

// A sentence with a highlighted mention and its gold label set. Labels keep
// their input order and hold no duplicates.
struct Example {
  std::string id;
  std::string sentence;
  Span mention;
  std::vector<std::string> labels;
  friend bool operator==(const Example&, const Example&) = default;
};

// Number of code points in a UTF-8 string; mention offsets count characters.
inline std::size_t utf8_length(std::string_view s) {
  std::size_t n = 0;
  for (unsigned char c : s) {
    if ((c & 0xC0) != 0x80) ++n;
  }
  return n;
}

inline void validate(const Example& ex) {
  const std::size_t len = utf8_length(ex.sentence);
  if (!(ex.mention.start < ex.mention.end && ex.mention.end <= len)) {
    throw Error(ErrorKind::input, "example " + ex.id + ": mention span [" + std::to_string(ex.mention.start) +
                                      ", " + std::to_string(ex.mention.end) + ") is invalid for a sentence of " +
                                      std::to_string(len) + " characters");
  }
}

inline Example parse_example(std::string_view line, std::size_t lineno) {
  const std::string where = "line " + std::to_string(lineno);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error&) {
    throw Error(ErrorKind::parse, "malformed example at " + where);
  }
  Example ex;
  try {
    ex.id = j.at("id").get<std::string>();
    ex.sentence = j.at("sentence").get<std::string>();
    const auto& m = j.at("mention");
    if (!m.is_array() || m.size() != 2) throw Error(ErrorKind::parse, "mention must be [start, end] at " + where);
    const auto start = m[0].get<long long>();
    const auto end = m[1].get<long long>();
    if (start < 0 || end < 0) {
      throw Error(ErrorKind::input, "example " + ex.id + ": negative mention offset at " + where);
    }
    ex.mention = {static_cast<std::size_t>(start), static_cast<std::size_t>(end)};
    std::set<std::string> seen;
    for (const auto& l : j.at("labels")) {
      auto s = l.get<std::string>();
      if (seen.insert(s).second) ex.labels.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorKind::parse, "malformed example at " + where);
  }
  try {
    validate(ex);
  } catch (const Error& e) {
    throw Error(e.kind(), std::string(e.what()) + " (" + where + ")");
  }
  return ex;
}

inline std::vector<Example> parse_examples(const std::string& text) {
  std::vector<Example> out;
  const auto lines = io::split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].find_first_not_of(" \t") == std::string::npos) continue;
    out.push_back(parse_example(lines[i], i + 1));
  }
  return out;
}

inline std::vector<Example> load_examples(const std::filesystem::path& path) {
  return parse_examples(io::read_file(path));
}

inline std::string serialize_example(const Example& ex) {
  nlohmann::ordered_json j;
  j["id"] = ex.id;
  j["sentence"] = ex.sentence;
  j["mention"] = {ex.mention.start, ex.mention.end};
  j["labels"] = ex.labels;
  return j.dump();
}

inline std::string serialize_examples(std::span<const Example> examples) {
  std::string out;
  for (const auto& ex : examples) {
    out += serialize_example(ex);
    out += '\n';
  }
  return out;
}

inline void save_examples(std::span<const Example> examples, const std::filesystem::path& path) {
  io::write_atomic(path, serialize_examples(examples));
}

// Appends the synthetic label of every cluster (at every preference) that
// contains one of the example's labels. Original labels keep their order;
// new synthetic labels follow in lexicographic order.
inline Example augment_example(Example ex, const DomainSet& domains) {
  std::set<std::string> present(ex.labels.begin(), ex.labels.end());
  std::set<std::string> extra;
  for (const auto& label : ex.labels) {
    for (const Cluster* c : domains.clusters_of(label)) {
      if (!present.contains(c->id)) extra.insert(c->id);
    }
  }
  ex.labels.insert(ex.labels.end(), extra.begin(), extra.end());
  return ex;
}

inline std::vector<Example> augment_examples(std::span<const Example> examples, const DomainSet& domains) {
  std::vector<Example> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) out.push_back(augment_example(ex, domains));
  return out;
}

}  // namespace typedom

#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "typedom/error.hpp"
#include "typedom/io.hpp"

namespace typedom {

// Unordered label pair, stored with a < b.
struct LabelPair {
  std::string a;
  std::string b;

  LabelPair() = default;
  LabelPair(std::string x, std::string y) : a(std::move(x)), b(std::move(y)) {
    if (a == b) throw Error(ErrorKind::input, "a label cannot pair with itself: '" + a + "'");
    if (b < a) std::swap(a, b);
  }

  friend auto operator<=>(const LabelPair&, const LabelPair&) = default;
};

struct ScoredPair {
  LabelPair pair;
  double score = 0;  // contradiction probability
  bool accepted = false;
};

// Scored within-domain pairs; the accepted ones are treated as conceptual
// neighbours (mutually exclusive labels).
class CNPairSet {
 public:
  CNPairSet() = default;

  CNPairSet(std::vector<ScoredPair> pairs, double threshold) : pairs_(std::move(pairs)), threshold_(threshold) {
    std::sort(pairs_.begin(), pairs_.end(), [](const auto& x, const auto& y) { return x.pair < y.pair; });
    for (std::size_t i = 0; i < pairs_.size(); ++i) {
      const auto& p = pairs_[i];
      if (i > 0 && pairs_[i - 1].pair == p.pair) {
        throw Error(ErrorKind::input, "duplicate pair (" + p.pair.a + ", " + p.pair.b + ")");
      }
      if (!std::isfinite(p.score) || p.score < 0 || p.score > 1) {
        throw Error(ErrorKind::input, "pair score outside [0, 1] for (" + p.pair.a + ", " + p.pair.b + ")");
      }
      if (p.accepted) {
        partners_[p.pair.a].insert(p.pair.b);
        partners_[p.pair.b].insert(p.pair.a);
      }
    }
  }

  // Every pair accepted.
  static CNPairSet accept_all(std::vector<LabelPair> pairs) {
    std::vector<ScoredPair> scored;
    for (auto& p : pairs) scored.push_back({std::move(p), 1.0, true});
    return CNPairSet(std::move(scored), 0.0);
  }

  const std::vector<ScoredPair>& pairs() const noexcept { return pairs_; }
  double threshold() const noexcept { return threshold_; }

  bool conflicts(std::string_view x, std::string_view y) const {
    auto it = partners_.find(x);
    return it != partners_.end() && it->second.contains(y);
  }

  std::size_t accepted_count() const {
    return static_cast<std::size_t>(std::count_if(pairs_.begin(), pairs_.end(), [](const auto& p) { return p.accepted; }));
  }

 private:
  std::vector<ScoredPair> pairs_;
  double threshold_ = 0;
  std::map<std::string, std::set<std::string, std::less<>>, std::less<>> partners_;
};

// JSONL `{"a", "b", "score"[, "accepted"]}`. Without "accepted", a line
// counts as accepted.
inline std::vector<ScoredPair> parse_scored_pairs(const std::string& text) {
  std::vector<ScoredPair> out;
  const auto lines = io::split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].find_first_not_of(" \t") == std::string::npos) continue;
    try {
      auto j = nlohmann::json::parse(lines[i]);
      ScoredPair sp{LabelPair(j.at("a").get<std::string>(), j.at("b").get<std::string>()),
                    j.at("score").get<double>(), j.value("accepted", true)};
      out.push_back(std::move(sp));
    } catch (const nlohmann::json::exception&) {
      throw Error(ErrorKind::parse, "malformed scored pair at line " + std::to_string(i + 1));
    }
  }
  return out;
}

inline std::string serialize_scored_pairs(std::span<const ScoredPair> pairs, bool with_accepted) {
  std::string out;
  for (const auto& p : pairs) {
    nlohmann::ordered_json j;
    j["a"] = p.pair.a;
    j["b"] = p.pair.b;
    j["score"] = p.score;
    if (with_accepted) j["accepted"] = p.accepted;
    out += j.dump();
    out += '\n';
  }
  return out;
}

inline CNPairSet load_cn_pairs(const std::filesystem::path& path) {
  auto pairs = parse_scored_pairs(io::read_file(path));
  double threshold = 1.0;
  for (const auto& p : pairs) {
    if (p.accepted) threshold = std::min(threshold, p.score);
  }
  return CNPairSet(std::move(pairs), threshold);
}

}  // namespace typedom

#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "typedom/cn_pairs.hpp"
#include "typedom/dataset.hpp"
#include "typedom/domains.hpp"
#include "typedom/error.hpp"
#include "typedom/eval.hpp"
#include "typedom/io.hpp"
#include "typedom/postprocess.hpp"

namespace typedom {

// Bumped whenever the query wording changes; cached scores are keyed on it.
inline constexpr std::string_view kTemplateVersion = "category-is-v1";

inline std::string category_sentence(std::string_view label) {
  return "The category is " + std::string(label);
}

// Every unordered pair of real labels that share a cluster at some
// preference, deduplicated and sorted.
inline std::vector<LabelPair> candidate_pairs(const DomainSet& domains,
                                              std::string_view prefix = kSyntheticPrefix) {
  std::set<LabelPair> pairs;
  for (const auto& clustering : domains.clusterings()) {
    for (const auto& cl : clustering.clusters) {
      for (std::size_t i = 0; i < cl.members.size(); ++i) {
        if (is_synthetic(cl.members[i], prefix)) continue;
        for (std::size_t j = i + 1; j < cl.members.size(); ++j) {
          if (is_synthetic(cl.members[j], prefix)) continue;
          pairs.emplace(cl.members[i], cl.members[j]);
        }
      }
    }
  }
  return {pairs.begin(), pairs.end()};
}

struct NLIQuery {
  std::string premise;
  std::string hypothesis;
  std::string premise_label;
  std::string hypothesis_label;
};

inline NLIQuery make_query(const std::string& first, const std::string& second) {
  return {category_sentence(first), category_sentence(second), first, second};
}

// Two queries per pair, one per orientation.
inline std::vector<NLIQuery> build_queries(std::span<const LabelPair> pairs) {
  std::vector<NLIQuery> out;
  out.reserve(2 * pairs.size());
  for (const auto& p : pairs) {
    out.push_back(make_query(p.a, p.b));
    out.push_back(make_query(p.b, p.a));
  }
  return out;
}

struct NLIProbabilities {
  double entailment = 0;
  double neutral = 0;
  double contradiction = 0;
};

inline constexpr double kProbabilitySumTolerance = 1e-4;

inline void check_probabilities(const NLIProbabilities& p) {
  const double sum = p.entailment + p.neutral + p.contradiction;
  const bool finite = std::isfinite(p.entailment) && std::isfinite(p.neutral) && std::isfinite(p.contradiction);
  if (!finite || p.entailment < 0 || p.neutral < 0 || p.contradiction < 0 ||
      std::abs(sum - 1.0) > kProbabilitySumTolerance) {
    throw Error(ErrorKind::protocol, "scorer returned probabilities that do not form a distribution (sum " +
                                         io::format_real(sum) + ")");
  }
}

class ContradictionScorer {
 public:
  virtual ~ContradictionScorer() = default;
  // One result per query, in query order.
  virtual std::vector<NLIProbabilities> score(std::span<const NLIQuery> queries) = 0;
};

// Replays scores from a scored-pair file. A line (a, b, s) answers the query
// with premise a and hypothesis b; when only the reverse orientation is on
// file, that score is used for both.
class FixtureScorer : public ContradictionScorer {
 public:
  FixtureScorer() = default;

  explicit FixtureScorer(std::span<const ScoredPair> oriented) {
    for (const auto& p : oriented) add(p.pair.a, p.pair.b, p.score);
  }

  static FixtureScorer from_text(const std::string& text) {
    FixtureScorer f;
    const auto lines = io::split_lines(text);
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (lines[i].find_first_not_of(" \t") == std::string::npos) continue;
      try {
        auto j = nlohmann::json::parse(lines[i]);
        f.add(j.at("a").get<std::string>(), j.at("b").get<std::string>(), j.at("score").get<double>());
      } catch (const nlohmann::json::exception&) {
        throw Error(ErrorKind::parse, "malformed fixture entry at line " + std::to_string(i + 1));
      }
    }
    return f;
  }

  static FixtureScorer load(const std::filesystem::path& path) { return from_text(io::read_file(path)); }

  void add(const std::string& premise, const std::string& hypothesis, double contradiction) {
    if (!std::isfinite(contradiction) || contradiction < 0 || contradiction > 1) {
      throw Error(ErrorKind::input, "fixture score outside [0, 1] for (" + premise + ", " + hypothesis + ")");
    }
    scores_.emplace(std::pair{premise, hypothesis}, contradiction);
  }

  std::vector<NLIProbabilities> score(std::span<const NLIQuery> queries) override {
    std::vector<NLIProbabilities> out;
    std::set<LabelPair> missing;
    for (const auto& q : queries) {
      auto v = lookup(q.premise_label, q.hypothesis_label);
      if (!v) v = lookup(q.hypothesis_label, q.premise_label);
      if (!v) {
        missing.emplace(q.premise_label, q.hypothesis_label);
        continue;
      }
      out.push_back({0.0, 1.0 - *v, *v});
    }
    if (!missing.empty()) {
      std::string msg = "fixture has no score for " + std::to_string(missing.size()) + " pair(s):";
      for (const auto& p : missing) msg += " (" + p.a + ", " + p.b + ")";
      throw Error(ErrorKind::missing_fixture, msg);
    }
    return out;
  }

 private:
  std::optional<double> lookup(const std::string& a, const std::string& b) const {
    auto it = scores_.find({a, b});
    if (it == scores_.end()) return std::nullopt;
    return it->second;
  }

  std::map<std::pair<std::string, std::string>, double> scores_;
};

// On-disk cache of contradiction probabilities keyed by
// (premise label, hypothesis label, template version).
class ScoreCache {
 public:
  ScoreCache() = default;
  explicit ScoreCache(std::filesystem::path path) : path_(std::move(path)) {
    if (!std::filesystem::exists(path_)) return;
    const auto lines = io::read_lines(path_);
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (lines[i].empty()) continue;
      try {
        auto j = nlohmann::json::parse(lines[i]);
        entries_[{j.at("premise").get<std::string>(), j.at("hypothesis").get<std::string>(),
                  j.at("template").get<std::string>()}] = j.at("contradiction").get<double>();
      } catch (const nlohmann::json::exception&) {
        throw Error(ErrorKind::parse, "malformed cache entry at line " + std::to_string(i + 1) + " of " +
                                          path_.string());
      }
    }
  }

  std::optional<double> get(const NLIQuery& q) const {
    auto it = entries_.find({q.premise_label, q.hypothesis_label, std::string(kTemplateVersion)});
    if (it == entries_.end()) return std::nullopt;
    return it->second;
  }

  void put(const NLIQuery& q, double contradiction) {
    entries_[{q.premise_label, q.hypothesis_label, std::string(kTemplateVersion)}] = contradiction;
  }

  std::size_t size() const noexcept { return entries_.size(); }

  void save() const {
    if (path_.empty()) return;
    std::string out;
    for (const auto& [key, v] : entries_) {
      nlohmann::ordered_json j;
      j["premise"] = std::get<0>(key);
      j["hypothesis"] = std::get<1>(key);
      j["template"] = std::get<2>(key);
      j["contradiction"] = v;
      out += j.dump();
      out += '\n';
    }
    io::write_atomic(path_, out);
  }

 private:
  std::filesystem::path path_;
  std::map<std::tuple<std::string, std::string, std::string>, double> entries_;
};

// Scores each pair as the mean contradiction probability of its two
// orientations. Queries already in `cache` are not sent to the scorer.
inline std::vector<ScoredPair> score_pairs(std::span<const NLIQuery> queries, ContradictionScorer& scorer,
                                           ScoreCache* cache = nullptr) {
  std::vector<std::optional<double>> probs(queries.size());
  std::vector<NLIQuery> pending;
  std::vector<std::size_t> pending_idx;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    if (cache != nullptr) probs[i] = cache->get(queries[i]);
    if (!probs[i]) {
      pending.push_back(queries[i]);
      pending_idx.push_back(i);
    }
  }
  if (!pending.empty()) {
    const auto results = scorer.score(pending);
    if (results.size() != pending.size()) {
      throw Error(ErrorKind::protocol, "scorer returned " + std::to_string(results.size()) + " results for " +
                                           std::to_string(pending.size()) + " queries");
    }
    for (std::size_t i = 0; i < results.size(); ++i) {
      check_probabilities(results[i]);
      probs[pending_idx[i]] = results[i].contradiction;
      if (cache != nullptr) cache->put(pending[i], results[i].contradiction);
    }
    if (cache != nullptr) cache->save();
  }

  std::map<LabelPair, std::pair<double, int>> acc;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    auto& slot = acc[LabelPair(queries[i].premise_label, queries[i].hypothesis_label)];
    slot.first += *probs[i];
    slot.second += 1;
  }
  std::vector<ScoredPair> out;
  out.reserve(acc.size());
  for (const auto& [pair, s] : acc) out.push_back({pair, s.first / s.second, false});
  return out;
}

inline CNPairSet filter_pairs(std::vector<ScoredPair> scored, double threshold) {
  for (auto& p : scored) p.accepted = p.score >= threshold;
  return CNPairSet(std::move(scored), threshold);
}

inline const std::vector<double>& default_cn_grid() {
  static const std::vector<double> grid{0.50, 0.55, 0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90, 0.95};
  return grid;
}

struct SweepPoint {
  double threshold = 0;
  double macro_f1 = 0;
  std::size_t accepted_pairs = 0;
};

struct SweepResult {
  double threshold = 0;
  double macro_f1 = 0;
  std::vector<SweepPoint> points;  // grid order
};

// Dev macro-F1 after the full post-processing pipeline with the pairs
// accepted at `threshold`.
inline double dev_macro_f1(std::span<const Prediction> dev, std::span<const Example> gold,
                           std::span<const ScoredPair> scored, double threshold, const DomainSet& domains,
                           const PostprocessOptions& opts = {}) {
  const CNPairSet cn = filter_pairs({scored.begin(), scored.end()}, threshold);
  std::vector<Prediction> processed;
  processed.reserve(dev.size());
  for (const auto& p : dev) processed.push_back(pipeline(p, domains, cn, opts).first);
  return macro_prf(processed, gold).macro_f1;
}

// Picks the grid threshold with the best dev macro-F1; ties go to the higher
// threshold.
inline SweepResult threshold_sweep(std::span<const Prediction> dev, std::span<const Example> gold,
                                   std::span<const ScoredPair> scored, std::span<const double> grid,
                                   const DomainSet& domains, const PostprocessOptions& opts = {}) {
  if (dev.empty()) throw Error(ErrorKind::empty, "threshold sweep needs at least one dev prediction");
  if (grid.empty()) throw Error(ErrorKind::input, "threshold grid is empty");
  SweepResult result;
  bool first = true;
  for (double t : grid) {
    SweepPoint pt{t, dev_macro_f1(dev, gold, scored, t, domains, opts), 0};
    pt.accepted_pairs = static_cast<std::size_t>(
        std::count_if(scored.begin(), scored.end(), [&](const ScoredPair& p) { return p.score >= t; }));
    result.points.push_back(pt);
    if (first || pt.macro_f1 > result.macro_f1 || (pt.macro_f1 == result.macro_f1 && t > result.threshold)) {
      result.threshold = t;
      result.macro_f1 = pt.macro_f1;
      first = false;
    }
  }
  return result;
}

}  // namespace typedom

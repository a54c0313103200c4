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
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "typedom/cn_pairs.hpp"
#include "typedom/domains.hpp"
#include "typedom/error.hpp"
#include "typedom/io.hpp"

namespace typedom {

inline constexpr double kDefaultThreshold = 0.5;

// Output of a black-box typing model for one example: a confidence per label
// and the currently predicted label set.
struct Prediction {
  std::string id;
  std::map<std::string, double, std::less<>> scores;
  double threshold = kDefaultThreshold;
  std::set<std::string, std::less<>> predicted;

  // Labels without a score count as zero confidence.
  double score(std::string_view label) const {
    auto it = scores.find(label);
    return it == scores.end() ? 0.0 : it->second;
  }

  friend bool operator==(const Prediction&, const Prediction&) = default;
};

struct PredictionDelta {
  std::vector<std::pair<std::string, std::string>> added;    // (label, source cluster id)
  std::vector<std::pair<std::string, std::string>> removed;  // (label, kept conflicting label)

  bool empty() const noexcept { return added.empty() && removed.empty(); }

  void append(const PredictionDelta& other) {
    added.insert(added.end(), other.added.begin(), other.added.end());
    removed.insert(removed.end(), other.removed.begin(), other.removed.end());
  }

  friend bool operator==(const PredictionDelta&, const PredictionDelta&) = default;
};

inline std::set<std::string, std::less<>> decide_labels(const Prediction& p) {
  std::set<std::string, std::less<>> out;
  for (const auto& [label, s] : p.scores) {
    if (s >= p.threshold) out.insert(label);
  }
  return out;
}

inline void validate(const Prediction& p) {
  if (!(p.threshold > 0 && p.threshold < 1)) {
    throw Error(ErrorKind::input, "threshold must lie in (0, 1) for prediction " + p.id);
  }
  for (const auto& [label, s] : p.scores) {
    if (!std::isfinite(s) || s < 0 || s > 1) {
      throw Error(ErrorKind::input, "confidence for '" + label + "' in prediction " + p.id + " is outside [0, 1]");
    }
  }
}

// Builds a prediction whose predicted set is the thresholded scores.
inline Prediction make_prediction(std::string id, std::map<std::string, double, std::less<>> scores,
                                  double threshold = kDefaultThreshold) {
  Prediction p{std::move(id), std::move(scores), threshold, {}};
  validate(p);
  p.predicted = decide_labels(p);
  return p;
}

enum class MissingMode {
  sequential,  // additions at one preference count as predicted for the next
  joint,       // every trigger is evaluated against the incoming predicted set
};

struct PostprocessOptions {
  std::string prefix = std::string(kSyntheticPrefix);
  MissingMode missing_mode = MissingMode::sequential;
};

// When a domain label is predicted but none of the domain's members is, the
// member with the highest confidence is added (lexicographically first on
// ties), even if it falls below the threshold.
inline std::pair<Prediction, PredictionDelta> infer_missing(Prediction p, const DomainSet& domains,
                                                            const PostprocessOptions& opts = {}) {
  for (const auto& label : p.predicted) {
    if (is_synthetic(label, opts.prefix) && domains.find_cluster(label) == nullptr) {
      throw Error(ErrorKind::unknown_domain,
                  "prediction " + p.id + " has domain label '" + label + "' that is not in the domain set");
    }
  }
  PredictionDelta delta;
  const auto incoming = p.predicted;
  for (const auto& clustering : domains.clusterings()) {
    const auto& reference = opts.missing_mode == MissingMode::joint ? incoming : p.predicted;
    std::vector<std::pair<std::string, std::string>> additions;
    for (const auto& cl : clustering.clusters) {
      if (!reference.contains(cl.id)) continue;
      const bool covered = std::any_of(cl.members.begin(), cl.members.end(),
                                       [&](const std::string& m) { return reference.contains(m); });
      if (covered) continue;
      // members are sorted, so strict '>' keeps the lexicographically first on ties
      const std::string* best = &cl.members.front();
      for (const auto& m : cl.members) {
        if (p.score(m) > p.score(*best)) best = &m;
      }
      additions.emplace_back(*best, cl.id);
    }
    for (auto& a : additions) {
      if (p.predicted.insert(a.first).second) delta.added.push_back(std::move(a));
    }
  }
  return {std::move(p), std::move(delta)};
}

// Greedy keep-by-confidence: predicted labels are visited from most to least
// confident (lexicographic on ties) and a label is dropped when it is a
// conceptual neighbour of a label already kept.
inline std::pair<Prediction, PredictionDelta> remove_conflicts(Prediction p, const CNPairSet& cn) {
  std::vector<std::string> order(p.predicted.begin(), p.predicted.end());
  std::stable_sort(order.begin(), order.end(),
                   [&](const std::string& x, const std::string& y) { return p.score(x) > p.score(y); });
  PredictionDelta delta;
  std::vector<std::string> kept;
  for (auto& label : order) {
    auto hit = std::find_if(kept.begin(), kept.end(), [&](const std::string& k) { return cn.conflicts(label, k); });
    if (hit != kept.end()) {
      delta.removed.emplace_back(label, *hit);
    } else {
      kept.push_back(std::move(label));
    }
  }
  for (const auto& r : delta.removed) p.predicted.erase(r.first);
  return {std::move(p), std::move(delta)};
}

inline Prediction strip_synthetic(Prediction p, std::string_view prefix = kSyntheticPrefix) {
  std::erase_if(p.scores, [&](const auto& kv) { return is_synthetic(kv.first, prefix); });
  std::erase_if(p.predicted, [&](const std::string& l) { return is_synthetic(l, prefix); });
  return p;
}

// infer_missing, then remove_conflicts, then strip_synthetic.
inline std::pair<Prediction, PredictionDelta> pipeline(Prediction p, const DomainSet& domains, const CNPairSet& cn,
                                                       const PostprocessOptions& opts = {}) {
  auto [filled, added] = infer_missing(std::move(p), domains, opts);
  auto [pruned, removed] = remove_conflicts(std::move(filled), cn);
  added.append(removed);
  return {strip_synthetic(std::move(pruned), opts.prefix), std::move(added)};
}

// ---- JSONL ----

struct PredictionRecord {
  Prediction prediction;
  std::optional<PredictionDelta> delta;
};

// `{"id", "scores"[, "predicted"][, "delta"]}`. Without "predicted", the
// predicted set is the thresholded scores.
inline std::vector<PredictionRecord> parse_predictions(const std::string& text, double threshold = kDefaultThreshold) {
  std::vector<PredictionRecord> out;
  const auto lines = io::split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].find_first_not_of(" \t") == std::string::npos) continue;
    const std::string where = "line " + std::to_string(i + 1);
    PredictionRecord rec;
    try {
      auto j = nlohmann::json::parse(lines[i]);
      rec.prediction.id = j.at("id").get<std::string>();
      rec.prediction.threshold = threshold;
      for (const auto& [label, s] : j.at("scores").items()) rec.prediction.scores[label] = s.get<double>();
      validate(rec.prediction);
      if (j.contains("predicted")) {
        for (const auto& l : j.at("predicted")) rec.prediction.predicted.insert(l.get<std::string>());
      } else {
        rec.prediction.predicted = decide_labels(rec.prediction);
      }
      if (j.contains("delta")) {
        PredictionDelta d;
        for (const auto& a : j.at("delta").at("added")) {
          d.added.emplace_back(a.at(0).get<std::string>(), a.at(1).get<std::string>());
        }
        for (const auto& r : j.at("delta").at("removed")) {
          d.removed.emplace_back(r.at(0).get<std::string>(), r.at(1).get<std::string>());
        }
        rec.delta = std::move(d);
      }
    } catch (const nlohmann::json::exception&) {
      throw Error(ErrorKind::parse, "malformed prediction at " + where);
    } catch (const Error& e) {
      throw Error(e.kind(), std::string(e.what()) + " (" + where + ")");
    }
    out.push_back(std::move(rec));
  }
  return out;
}

inline std::vector<PredictionRecord> load_predictions(const std::filesystem::path& path,
                                                      double threshold = kDefaultThreshold) {
  return parse_predictions(io::read_file(path), threshold);
}

inline std::string serialize_prediction(const Prediction& p, const PredictionDelta* delta) {
  nlohmann::ordered_json j;
  j["id"] = p.id;
  auto scores = nlohmann::ordered_json::object();
  for (const auto& [label, s] : p.scores) scores[label] = s;
  j["scores"] = std::move(scores);
  j["predicted"] = std::vector<std::string>(p.predicted.begin(), p.predicted.end());
  if (delta != nullptr) {
    nlohmann::ordered_json d;
    d["added"] = nlohmann::ordered_json::array();
    for (const auto& [l, c] : delta->added) d["added"].push_back({l, c});
    d["removed"] = nlohmann::ordered_json::array();
    for (const auto& [l, k] : delta->removed) d["removed"].push_back({l, k});
    j["delta"] = std::move(d);
  }
  return j.dump();
}

}  // namespace typedom

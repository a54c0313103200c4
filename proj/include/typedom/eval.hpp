#pragma once

#include <cstddef>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "typedom/dataset.hpp"
#include "typedom/error.hpp"
#include "typedom/postprocess.hpp"

namespace typedom {

struct EvalReport {
  double macro_p = 0, macro_r = 0, macro_f1 = 0;
  double micro_p = 0, micro_r = 0, micro_f1 = 0;
  std::size_t n_examples = 0;
  std::size_t n_scored_for_precision = 0;
};

inline double ratio(double num, double den) { return den == 0 ? 0.0 : num / den; }

inline double harmonic(double p, double r) { return p + r == 0 ? 0.0 : 2 * p * r / (p + r); }

namespace detail {

using GoldIndex = std::map<std::string_view, const Example*, std::less<>>;

inline GoldIndex index_gold(std::span<const Example> gold) {
  GoldIndex index;
  for (const auto& ex : gold) {
    if (!index.emplace(ex.id, &ex).second) throw Error(ErrorKind::input, "duplicate gold id " + ex.id);
  }
  return index;
}

inline const Example& gold_for(const GoldIndex& index, const std::string& id) {
  auto it = index.find(id);
  if (it == index.end()) throw Error(ErrorKind::input, "prediction " + id + " has no gold record");
  return *it->second;
}

inline std::size_t overlap(const std::set<std::string, std::less<>>& pred, const std::vector<std::string>& gold) {
  std::size_t n = 0;
  for (const auto& g : gold) n += pred.contains(g) ? 1 : 0;
  return n;
}

}  // namespace detail

// Example-averaged precision and recall; F1 is the harmonic mean of the two
// averages. Examples with an empty prediction are left out of the precision
// average, examples with empty gold out of the recall average.
inline EvalReport macro_prf(std::span<const Prediction> predictions, std::span<const Example> gold) {
  const auto index = detail::index_gold(gold);
  EvalReport r;
  r.n_examples = predictions.size();
  double p_sum = 0, r_sum = 0;
  std::size_t n_r = 0;
  for (const auto& p : predictions) {
    const Example& g = detail::gold_for(index, p.id);
    const double hit = static_cast<double>(detail::overlap(p.predicted, g.labels));
    if (!p.predicted.empty()) {
      p_sum += hit / static_cast<double>(p.predicted.size());
      ++r.n_scored_for_precision;
    }
    if (!g.labels.empty()) {
      r_sum += hit / static_cast<double>(g.labels.size());
      ++n_r;
    }
  }
  r.macro_p = ratio(p_sum, static_cast<double>(r.n_scored_for_precision));
  r.macro_r = ratio(r_sum, static_cast<double>(n_r));
  r.macro_f1 = harmonic(r.macro_p, r.macro_r);
  return r;
}

// Pooled counts over all examples.
inline EvalReport micro_prf(std::span<const Prediction> predictions, std::span<const Example> gold) {
  const auto index = detail::index_gold(gold);
  EvalReport r;
  r.n_examples = predictions.size();
  std::size_t hit = 0, n_pred = 0, n_gold = 0;
  for (const auto& p : predictions) {
    const Example& g = detail::gold_for(index, p.id);
    hit += detail::overlap(p.predicted, g.labels);
    n_pred += p.predicted.size();
    n_gold += g.labels.size();
    if (!p.predicted.empty()) ++r.n_scored_for_precision;
  }
  r.micro_p = ratio(static_cast<double>(hit), static_cast<double>(n_pred));
  r.micro_r = ratio(static_cast<double>(hit), static_cast<double>(n_gold));
  r.micro_f1 = harmonic(r.micro_p, r.micro_r);
  return r;
}

inline EvalReport evaluate(std::span<const Prediction> predictions, std::span<const Example> gold) {
  EvalReport r = macro_prf(predictions, gold);
  const EvalReport m = micro_prf(predictions, gold);
  r.micro_p = m.micro_p;
  r.micro_r = m.micro_r;
  r.micro_f1 = m.micro_f1;
  return r;
}

inline nlohmann::ordered_json report_to_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["macro_p"] = r.macro_p;
  j["macro_r"] = r.macro_r;
  j["macro_f1"] = r.macro_f1;
  j["micro_p"] = r.micro_p;
  j["micro_r"] = r.micro_r;
  j["micro_f1"] = r.micro_f1;
  j["n_examples"] = r.n_examples;
  j["n_scored_for_precision"] = r.n_scored_for_precision;
  j["macro_f1_convention"] = "harmonic_mean_of_averaged_p_r";
  return j;
}

struct StrategyStats {
  std::size_t n_instances = 0;
  std::size_t instances_affected_missing = 0;
  std::size_t labels_added = 0;
  std::size_t additions_correct = 0;
  std::size_t instances_affected_cn = 0;
  std::size_t labels_removed = 0;
  std::size_t removals_justified = 0;
};

// Counts what post-processing did, from the per-example deltas. An addition
// is correct when the label is gold; a removal is justified when it is not.
inline StrategyStats strategy_stats(std::span<const PredictionRecord> before, std::span<const PredictionRecord> after,
                                    std::span<const Example> gold) {
  const auto index = detail::index_gold(gold);
  std::set<std::string_view> before_ids;
  for (const auto& b : before) before_ids.insert(b.prediction.id);
  StrategyStats s;
  s.n_instances = after.size();
  for (const auto& rec : after) {
    if (!rec.delta) throw Error(ErrorKind::input, "prediction " + rec.prediction.id + " carries no delta");
    if (!before_ids.contains(rec.prediction.id)) {
      throw Error(ErrorKind::input, "prediction " + rec.prediction.id + " is missing from the base predictions");
    }
    const Example& g = detail::gold_for(index, rec.prediction.id);
    const std::set<std::string_view> gold_set(g.labels.begin(), g.labels.end());
    const auto& d = *rec.delta;
    if (!d.added.empty()) ++s.instances_affected_missing;
    if (!d.removed.empty()) ++s.instances_affected_cn;
    s.labels_added += d.added.size();
    s.labels_removed += d.removed.size();
    for (const auto& a : d.added) s.additions_correct += gold_set.contains(a.first) ? 1 : 0;
    for (const auto& r : d.removed) s.removals_justified += gold_set.contains(r.first) ? 0 : 1;
  }
  return s;
}

inline std::string render(const StrategyStats& s) {
  return "missing applied to " + std::to_string(s.instances_affected_missing) + " of " +
         std::to_string(s.n_instances) + " instances; " + std::to_string(s.labels_added) + " added, " +
         std::to_string(s.additions_correct) + " correct; CN affected " + std::to_string(s.instances_affected_cn) +
         " instances; " + std::to_string(s.labels_removed) + " removed, " + std::to_string(s.removals_justified) +
         " justified";
}

inline nlohmann::ordered_json stats_to_json(const StrategyStats& s) {
  nlohmann::ordered_json j;
  j["n_instances"] = s.n_instances;
  j["instances_affected_missing"] = s.instances_affected_missing;
  j["labels_added"] = s.labels_added;
  j["additions_correct"] = s.additions_correct;
  j["instances_affected_cn"] = s.instances_affected_cn;
  j["labels_removed"] = s.labels_removed;
  j["removals_justified"] = s.removals_justified;
  return j;
}

}  // namespace typedom

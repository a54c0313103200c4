#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "typedom/affinity_propagation.hpp"
#include "typedom/embeddings.hpp"
#include "typedom/error.hpp"
#include "typedom/io.hpp"

namespace typedom {

inline constexpr std::string_view kSyntheticPrefix = "##dom_";

inline bool is_synthetic(std::string_view label, std::string_view prefix = kSyntheticPrefix) {
  return label.starts_with(prefix);
}

struct Cluster {
  std::string id;
  std::string exemplar;
  std::vector<std::string> members;  // sorted

  bool contains(std::string_view label) const {
    return std::binary_search(members.begin(), members.end(), label);
  }
};

struct Clustering {
  double preference = 0;
  bool converged = true;
  std::vector<Cluster> clusters;
};

// Union of clusterings at several preference values, ascending.
class DomainSet {
 public:
  DomainSet() = default;

  // Validates and indexes the clusterings. Members are sorted in place.
  explicit DomainSet(std::vector<Clustering> clusterings) : clusterings_(std::move(clusterings)) {
    for (std::size_t c = 0; c < clusterings_.size(); ++c) {
      auto& clustering = clusterings_[c];
      if (c > 0 && !(clustering.preference > clusterings_[c - 1].preference)) {
        throw Error(ErrorKind::input, "clustering preferences must be strictly increasing");
      }
      std::map<std::string, std::size_t, std::less<>> seen;
      for (std::size_t k = 0; k < clustering.clusters.size(); ++k) {
        auto& cl = clustering.clusters[k];
        std::sort(cl.members.begin(), cl.members.end());
        if (cl.members.empty()) throw Error(ErrorKind::input, "cluster " + cl.id + " is empty");
        if (std::adjacent_find(cl.members.begin(), cl.members.end()) != cl.members.end()) {
          throw Error(ErrorKind::input, "cluster " + cl.id + " repeats a member");
        }
        if (!cl.contains(cl.exemplar)) {
          throw Error(ErrorKind::input, "exemplar of " + cl.id + " is not a member");
        }
        if (!by_id_.emplace(cl.id, std::pair{c, k}).second) {
          throw Error(ErrorKind::input, "duplicate cluster id " + cl.id);
        }
        for (const auto& m : cl.members) {
          if (!seen.emplace(m, k).second) {
            throw Error(ErrorKind::input, "label '" + m + "' appears twice at preference " +
                                              io::format_real(clustering.preference));
          }
          membership_[m].push_back({c, k});
        }
      }
    }
  }

  const std::vector<Clustering>& clusterings() const noexcept { return clusterings_; }
  bool empty() const noexcept { return clusterings_.empty(); }

  const Cluster* find_cluster(std::string_view id) const {
    auto it = by_id_.find(id);
    if (it == by_id_.end()) return nullptr;
    return &clusterings_[it->second.first].clusters[it->second.second];
  }

  // Clusters containing `label`, one per clustering it appears in, in
  // ascending preference order.
  std::vector<const Cluster*> clusters_of(std::string_view label) const {
    std::vector<const Cluster*> out;
    auto it = membership_.find(label);
    if (it == membership_.end()) return out;
    for (auto [c, k] : it->second) out.push_back(&clusterings_[c].clusters[k]);
    return out;
  }

 private:
  using Slot = std::pair<std::size_t, std::size_t>;
  std::vector<Clustering> clusterings_;
  std::map<std::string, Slot, std::less<>> by_id_;
  std::map<std::string, std::vector<Slot>, std::less<>> membership_;
};

inline std::vector<Cluster> lookup_domains(std::string_view label, const DomainSet& domains) {
  std::vector<Cluster> out;
  for (const Cluster* c : domains.clusters_of(label)) out.push_back(*c);
  return out;
}

inline const std::vector<double>& default_preferences() {
  static const std::vector<double> prefs{0.5, 0.6, 0.7, 0.8, 0.9};
  return prefs;
}

struct DomainOptions {
  std::vector<double> preferences = default_preferences();
  double damping = 0.5;
  int max_iter = 200;
  int convergence_iter = 15;
  std::string prefix = std::string(kSyntheticPrefix);
  bool single_precision = false;
};

inline std::string cluster_id(std::string_view prefix, double preference, std::size_t index) {
  std::string id(prefix);
  id += 'p';
  id += io::format_real(preference);
  id += "_c";
  id += std::to_string(index);
  return id;
}

namespace detail {

template <typename Real>
SquareMatrix<Real> cosine_matrix(std::span<const LabelVector* const> labels) {
  const std::size_t n = labels.size();
  SquareMatrix<Real> sim(n);
  for (std::size_t i = 0; i < n; ++i) {
    sim(i, i) = Real(1);
    for (std::size_t j = i + 1; j < n; ++j) {
      const auto c = static_cast<Real>(cosine(labels[i]->vector, labels[j]->vector));
      sim(i, j) = c;
      sim(j, i) = c;
    }
  }
  return sim;
}

template <typename Real>
DomainSet build_domains_impl(std::span<const LabelVector* const> labels, std::span<const double> prefs,
                             const DomainOptions& opts) {
  const auto sim = cosine_matrix<Real>(labels);
  std::vector<Clustering> clusterings;
  for (double pref : prefs) {
    APParams params{pref, opts.damping, opts.max_iter, opts.convergence_iter};
    const APResult ap = affinity_propagation(sim, params);
    Clustering clustering{pref, ap.converged, {}};
    // exemplar indices are sorted, and labels are sorted, so cluster order is
    // lexicographic by exemplar label
    for (std::size_t idx = 0; idx < ap.exemplars.size(); ++idx) {
      const std::size_t e = ap.exemplars[idx];
      Cluster cl{cluster_id(opts.prefix, pref, idx), labels[e]->label, {}};
      for (std::size_t i = 0; i < labels.size(); ++i) {
        if (ap.assignment[i] == e) cl.members.push_back(labels[i]->label);
      }
      clustering.clusters.push_back(std::move(cl));
    }
    clusterings.push_back(std::move(clustering));
  }
  return DomainSet(std::move(clusterings));
}

}  // namespace detail

// Clusters the resolved labels with affinity propagation once per preference.
// Unresolved labels are left out of every cluster; duplicate labels collapse.
inline DomainSet build_domains(std::span<const LabelVector> labels, const DomainOptions& opts = {}) {
  std::vector<const LabelVector*> resolved;
  for (const auto& l : labels) {
    if (l.resolved) resolved.push_back(&l);
  }
  std::stable_sort(resolved.begin(), resolved.end(),
                   [](const LabelVector* a, const LabelVector* b) { return a->label < b->label; });
  resolved.erase(std::unique(resolved.begin(), resolved.end(),
                             [](const LabelVector* a, const LabelVector* b) { return a->label == b->label; }),
                 resolved.end());
  if (resolved.empty()) throw Error(ErrorKind::empty, "no resolved labels to cluster");

  std::vector<double> prefs = opts.preferences;
  if (prefs.empty()) throw Error(ErrorKind::input, "at least one preference is required");
  for (double p : prefs) {
    if (!std::isfinite(p)) throw Error(ErrorKind::input, "preference must be finite");
  }
  std::sort(prefs.begin(), prefs.end());
  prefs.erase(std::unique(prefs.begin(), prefs.end()), prefs.end());

  if (opts.single_precision) return detail::build_domains_impl<float>(resolved, prefs, opts);
  return detail::build_domains_impl<double>(resolved, prefs, opts);
}

// ---- serialization ----

inline nlohmann::ordered_json domains_to_json(const DomainSet& domains) {
  nlohmann::ordered_json doc;
  auto prefs = nlohmann::ordered_json::array();
  auto clusterings = nlohmann::ordered_json::array();
  for (const auto& c : domains.clusterings()) {
    prefs.push_back(c.preference);
    nlohmann::ordered_json jc;
    jc["preference"] = c.preference;
    jc["converged"] = c.converged;
    auto clusters = nlohmann::ordered_json::array();
    for (const auto& cl : c.clusters) {
      nlohmann::ordered_json j;
      j["id"] = cl.id;
      j["exemplar"] = cl.exemplar;
      j["members"] = cl.members;
      clusters.push_back(std::move(j));
    }
    jc["clusters"] = std::move(clusters);
    clusterings.push_back(std::move(jc));
  }
  doc["preferences"] = std::move(prefs);
  doc["clusterings"] = std::move(clusterings);
  return doc;
}

inline std::string serialize_domains(const DomainSet& domains) {
  return domains_to_json(domains).dump(2) + "\n";
}

inline DomainSet parse_domains(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::parse, std::string("malformed domain file: ") + e.what());
  }
  try {
    std::vector<Clustering> clusterings;
    for (const auto& jc : doc.at("clusterings")) {
      Clustering c;
      c.preference = jc.at("preference").get<double>();
      c.converged = jc.value("converged", true);
      for (const auto& j : jc.at("clusters")) {
        c.clusters.push_back(Cluster{j.at("id").get<std::string>(), j.at("exemplar").get<std::string>(),
                                     j.at("members").get<std::vector<std::string>>()});
      }
      clusterings.push_back(std::move(c));
    }
    return DomainSet(std::move(clusterings));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::parse, std::string("malformed domain file: ") + e.what());
  }
}

inline DomainSet load_domains(const std::filesystem::path& path) {
  return parse_domains(io::read_file(path));
}

}  // namespace typedom

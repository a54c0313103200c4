#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "typedom/embeddings.hpp"
#include "typedom/error.hpp"
#include "typedom/io.hpp"

namespace typedom {

struct LLEWeights {
  std::string label;
  std::vector<std::string> neighbors;
  std::vector<double> weights;
};

struct Neighbor {
  std::size_t index;
  double similarity;
};

namespace detail {

inline std::vector<const LabelVector*> resolved_vocabulary(std::span<const LabelVector> vocab) {
  std::vector<const LabelVector*> out;
  for (const auto& v : vocab) {
    if (v.resolved) out.push_back(&v);
  }
  std::stable_sort(out.begin(), out.end(), [](auto* a, auto* b) { return a->label < b->label; });
  out.erase(std::unique(out.begin(), out.end(), [](auto* a, auto* b) { return a->label == b->label; }), out.end());
  return out;
}

inline std::vector<Neighbor> nearest(std::span<const LabelVector* const> vocab, std::size_t self, std::size_t k) {
  std::vector<Neighbor> cand;
  cand.reserve(vocab.size());
  for (std::size_t j = 0; j < vocab.size(); ++j) {
    if (j == self) continue;
    cand.push_back({j, cosine(vocab[self]->vector, vocab[j]->vector)});
  }
  // vocab is sorted by label, so index order is lexicographic order
  auto better = [](const Neighbor& a, const Neighbor& b) {
    return a.similarity != b.similarity ? a.similarity > b.similarity : a.index < b.index;
  };
  const std::size_t take = std::min(k, cand.size());
  std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(take), cand.end(), better);
  cand.resize(take);
  return cand;
}

}  // namespace detail

// The k labels of `vocab` with the highest cosine similarity to `label`, most
// similar first, lexicographic on ties. k is clamped to the vocabulary size
// minus one.
inline std::vector<std::string> knn(std::string_view label, std::span<const LabelVector> vocab, std::size_t k) {
  if (k == 0) throw Error(ErrorKind::input, "k must be positive");
  const auto resolved = detail::resolved_vocabulary(vocab);
  auto it = std::lower_bound(resolved.begin(), resolved.end(), label,
                             [](const LabelVector* v, std::string_view l) { return v->label < l; });
  if (it == resolved.end() || (*it)->label != label) {
    throw Error(ErrorKind::input, "label '" + std::string(label) + "' has no embedding");
  }
  std::vector<std::string> out;
  for (const auto& n : detail::nearest(resolved, static_cast<std::size_t>(it - resolved.begin()), k)) {
    out.push_back(resolved[n.index]->label);
  }
  return out;
}

inline std::vector<std::string> knn(std::string_view label, const EmbeddingTable& table, std::size_t k) {
  return knn(label, embed_labels(table.words(), table), k);
}

// Sum-to-one weights minimising |l - sum_j w_j p_j|^2, from the local Gram
// matrix C_jk = (l - p_j).(l - p_k) regularised by epsilon * trace(C) / k.
// Weights may be negative.
inline std::vector<double> lle_weights(std::span<const double> point, std::span<const std::vector<double>> neighbors,
                                       double epsilon = 1e-3) {
  const auto k = static_cast<Eigen::Index>(neighbors.size());
  if (k == 0) throw Error(ErrorKind::input, "reconstruction needs at least one neighbour");
  if (!(epsilon >= 0) || !std::isfinite(epsilon)) throw Error(ErrorKind::input, "epsilon must be >= 0");
  const auto dim = static_cast<Eigen::Index>(point.size());

  Eigen::MatrixXd diff(dim, k);
  for (Eigen::Index j = 0; j < k; ++j) {
    const auto& p = neighbors[static_cast<std::size_t>(j)];
    if (static_cast<Eigen::Index>(p.size()) != dim) throw Error(ErrorKind::input, "neighbour dimension mismatch");
    for (Eigen::Index d = 0; d < dim; ++d) diff(d, j) = point[static_cast<std::size_t>(d)] - p[static_cast<std::size_t>(d)];
  }
  Eigen::MatrixXd gram = diff.transpose() * diff;
  const double reg = epsilon * gram.trace() / static_cast<double>(k);
  gram.diagonal().array() += reg;

  Eigen::FullPivLU<Eigen::MatrixXd> lu(gram);
  if (!lu.isInvertible()) {
    throw Error(ErrorKind::numerical, "local Gram matrix is singular after regularisation");
  }
  Eigen::VectorXd w = lu.solve(Eigen::VectorXd::Ones(k));
  const double total = w.sum();
  if (!std::isfinite(total) || total == 0 || !w.allFinite()) {
    throw Error(ErrorKind::numerical, "reconstruction weights cannot be normalised");
  }
  w /= total;
  return {w.data(), w.data() + k};
}

// Squared reconstruction error |l - sum_j w_j p_j|^2.
inline double reconstruction_error(std::span<const double> point, std::span<const std::vector<double>> neighbors,
                                   std::span<const double> weights) {
  double err = 0;
  for (std::size_t d = 0; d < point.size(); ++d) {
    double r = point[d];
    for (std::size_t j = 0; j < neighbors.size(); ++j) r -= weights[j] * neighbors[j][d];
    err += r * r;
  }
  return err;
}

// FNV-1a over the sorted labels and the text of their vectors.
inline std::string embedding_fingerprint(std::span<const LabelVector* const> vocab) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto mix = [&](std::string_view s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ull;
    }
    h ^= 0xff;
    h *= 0x100000001b3ull;
  };
  for (const auto* v : vocab) {
    mix(v->label);
    for (double x : v->vector) mix(io::format_real(x));
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::vector<LLEWeights> compute_lle(std::span<const LabelVector> vocab, std::size_t k, double epsilon) {
  if (k == 0) throw Error(ErrorKind::input, "k must be positive");
  const auto resolved = detail::resolved_vocabulary(vocab);
  if (resolved.size() < 2) throw Error(ErrorKind::input, "LLE weights need at least two resolved labels");
  std::vector<LLEWeights> out;
  out.reserve(resolved.size());
  for (std::size_t i = 0; i < resolved.size(); ++i) {
    LLEWeights rec{resolved[i]->label, {}, {}};
    std::vector<std::vector<double>> pts;
    for (const auto& n : detail::nearest(resolved, i, k)) {
      rec.neighbors.push_back(resolved[n.index]->label);
      pts.push_back(resolved[n.index]->vector);
    }
    rec.weights = lle_weights(resolved[i]->vector, pts, epsilon);
    out.push_back(std::move(rec));
  }
  return out;
}

// JSONL: a header {"k","epsilon","dim","fingerprint"} followed by one record
// per resolved label in lexicographic order.
inline std::string serialize_lle(std::span<const LabelVector> vocab, std::size_t k, double epsilon) {
  const auto records = compute_lle(vocab, k, epsilon);
  const auto resolved = detail::resolved_vocabulary(vocab);
  nlohmann::ordered_json header;
  header["k"] = k;
  header["epsilon"] = epsilon;
  header["dim"] = resolved.front()->vector.size();
  header["fingerprint"] = embedding_fingerprint(resolved);
  std::string out = header.dump() + "\n";
  for (const auto& r : records) {
    nlohmann::ordered_json j;
    j["label"] = r.label;
    j["neighbors"] = r.neighbors;
    j["weights"] = r.weights;
    out += j.dump();
    out += '\n';
  }
  return out;
}

inline void export_weights(std::span<const LabelVector> vocab, std::size_t k, double epsilon,
                           const std::filesystem::path& path) {
  io::write_atomic(path, serialize_lle(vocab, k, epsilon));
}

}  // namespace typedom

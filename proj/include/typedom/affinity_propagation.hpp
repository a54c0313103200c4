#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "typedom/error.hpp"

namespace typedom {

struct APParams {
  double preference = 0.5;
  double damping = 0.5;
  int max_iter = 200;
  int convergence_iter = 15;
};

struct APResult {
  std::vector<std::size_t> exemplars;   // sorted point indices
  std::vector<std::size_t> assignment;  // point -> exemplar point index
  bool converged = false;
  int iterations = 0;
};

// Dense row-major square matrix.
template <typename Real>
class SquareMatrix {
 public:
  SquareMatrix() = default;
  explicit SquareMatrix(std::size_t n, Real fill = Real(0)) : n_(n), data_(n * n, fill) {}

  std::size_t size() const noexcept { return n_; }
  Real& operator()(std::size_t i, std::size_t j) { return data_[i * n_ + j]; }
  Real operator()(std::size_t i, std::size_t j) const { return data_[i * n_ + j]; }
  std::span<const Real> row(std::size_t i) const { return {data_.data() + i * n_, n_}; }

 private:
  std::size_t n_ = 0;
  std::vector<Real> data_;
};

// Net similarity of a configuration: sum over non-exemplars of s(i, e(i))
// plus preference per exemplar. Diagonal entries of `sim` are ignored.
template <typename Real>
double ap_objective(const SquareMatrix<Real>& sim, double preference,
                    std::span<const std::size_t> assignment) {
  double total = 0;
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    total += assignment[i] == i ? preference : static_cast<double>(sim(i, assignment[i]));
  }
  return total;
}

namespace detail {

// Each exemplar keeps itself; every other point joins the exemplar with the
// highest similarity, lowest index on ties.
template <typename Real>
std::vector<std::size_t> assign_to_exemplars(const SquareMatrix<Real>& s,
                                             const std::vector<std::size_t>& exemplars) {
  const std::size_t n = s.size();
  std::vector<char> is_exemplar(n, 0);
  for (auto e : exemplars) is_exemplar[e] = 1;
  std::vector<std::size_t> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (is_exemplar[i]) {
      out[i] = i;
      continue;
    }
    std::size_t best = exemplars.front();
    for (auto e : exemplars) {
      if (s(i, e) > s(i, best)) best = e;
    }
    out[i] = best;
  }
  return out;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Symmetric inputs with tied exemplar choices make the messages oscillate.
// A tiny perturbation derived from a hash of (i, k) separates the ties
// without introducing run-to-run randomness.
template <typename Real>
void break_degeneracies(SquareMatrix<Real>& s) {
  const std::size_t n = s.size();
  // ~1e-12 for doubles; a few ulps for floats
  const Real scale = std::max(Real(1e-12), std::numeric_limits<Real>::epsilon() * Real(4));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < n; ++k) {
      const auto h = splitmix64((static_cast<std::uint64_t>(i) << 32) ^ k);
      // uniform in [-1, 1)
      const Real u = static_cast<Real>(static_cast<double>(h >> 11) * 0x1.0p-52 - 1.0);
      s(i, k) += scale * (std::abs(s(i, k)) + Real(1)) * u;
    }
  }
}

}  // namespace detail

// Affinity propagation by responsibility/availability message passing.
//
// `sim` must be symmetric; its diagonal is replaced by the preference. Every
// update is computed from the previous iteration's messages in a fixed order,
// so results are bit-reproducible. Once the exemplar set is stable for
// `convergence_iter` iterations the run stops; the final exemplar set is then
// refined once (each cluster picks the member with the largest summed
// similarity to the rest) and points are reassigned.
template <typename Real>
APResult affinity_propagation(SquareMatrix<Real> sim, const APParams& params) {
  const std::size_t n = sim.size();
  if (n == 0) throw Error(ErrorKind::input, "affinity propagation needs at least one point");
  if (!(params.damping > 0 && params.damping < 1)) {
    throw Error(ErrorKind::input, "damping must lie in (0, 1)");
  }
  if (params.max_iter < 1 || params.convergence_iter < 1) {
    throw Error(ErrorKind::input, "max_iter and convergence_iter must be positive");
  }
  if (!std::isfinite(params.preference)) {
    throw Error(ErrorKind::input, "preference must be finite");
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (sim(i, j) != sim(j, i)) {
        throw Error(ErrorKind::input, "similarity matrix is not symmetric at (" +
                                          std::to_string(i) + ", " + std::to_string(j) + ")");
      }
      if (!std::isfinite(static_cast<double>(sim(i, j)))) {
        throw Error(ErrorKind::input, "similarity matrix has a non-finite entry");
      }
    }
  }

  const Real pref = static_cast<Real>(params.preference);
  for (std::size_t i = 0; i < n; ++i) sim(i, i) = pref;
  const SquareMatrix<Real> original = sim;
  detail::break_degeneracies(sim);

  APResult result;
  if (n == 1) {
    result.exemplars = {0};
    result.assignment = {0};
    result.converged = true;
    return result;
  }

  const Real lambda = static_cast<Real>(params.damping);
  const Real keep = Real(1) - lambda;
  SquareMatrix<Real> resp(n), avail(n);
  std::vector<Real> pos_sum(n);
  std::vector<char> exemplar(n, 0), previous(n, 0);
  int stable = 0;

  for (int it = 0; it < params.max_iter; ++it) {
    result.iterations = it + 1;

    // r(i,k) <- s(i,k) - max_{k' != k} (a(i,k') + s(i,k'))
    for (std::size_t i = 0; i < n; ++i) {
      Real first = -std::numeric_limits<Real>::infinity();
      Real second = first;
      std::size_t arg = 0;
      for (std::size_t k = 0; k < n; ++k) {
        const Real v = avail(i, k) + sim(i, k);
        if (v > first) {
          second = first;
          first = v;
          arg = k;
        } else if (v > second) {
          second = v;
        }
      }
      for (std::size_t k = 0; k < n; ++k) {
        const Real fresh = sim(i, k) - (k == arg ? second : first);
        resp(i, k) = lambda * resp(i, k) + keep * fresh;
      }
    }

    // a(i,k) <- min(0, r(k,k) + sum_{i' not in {i,k}} max(0, r(i',k)))
    // a(k,k) <- sum_{i' != k} max(0, r(i',k))
    std::fill(pos_sum.begin(), pos_sum.end(), Real(0));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < n; ++k) {
        if (i != k && resp(i, k) > 0) pos_sum[k] += resp(i, k);
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < n; ++k) {
        Real fresh;
        if (i == k) {
          fresh = pos_sum[k];
        } else {
          const Real own = resp(i, k) > 0 ? resp(i, k) : Real(0);
          fresh = resp(k, k) + pos_sum[k] - own;
          if (fresh > 0) fresh = 0;
        }
        avail(i, k) = lambda * avail(i, k) + keep * fresh;
      }
    }

    bool any = false;
    for (std::size_t k = 0; k < n; ++k) {
      exemplar[k] = (avail(k, k) + resp(k, k)) > 0 ? 1 : 0;
      any = any || exemplar[k];
    }
    if (it > 0 && exemplar == previous) {
      ++stable;
    } else {
      stable = 1;
    }
    previous = exemplar;
    if (any && stable >= params.convergence_iter) {
      result.converged = true;
      break;
    }
  }

  std::vector<std::size_t> exemplars;
  for (std::size_t k = 0; k < n; ++k) {
    if (exemplar[k]) exemplars.push_back(k);
  }
  if (exemplars.empty()) {
    // No point accumulated positive self-evidence: fall back to the single
    // strongest candidate.
    std::size_t best = 0;
    for (std::size_t k = 1; k < n; ++k) {
      if (avail(k, k) + resp(k, k) > avail(best, best) + resp(best, best)) best = k;
    }
    exemplars.push_back(best);
  }

  sim = original;
  auto assignment = detail::assign_to_exemplars(sim, exemplars);

  std::vector<std::size_t> refined;
  refined.reserve(exemplars.size());
  for (auto e : exemplars) {
    std::size_t best = e;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t m = 0; m < n; ++m) {
      if (assignment[m] != e) continue;
      double score = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (assignment[i] == e) score += static_cast<double>(sim(i, m));
      }
      if (score > best_score) {
        best_score = score;
        best = m;
      }
    }
    refined.push_back(best);
  }
  std::sort(refined.begin(), refined.end());
  refined.erase(std::unique(refined.begin(), refined.end()), refined.end());

  result.assignment = detail::assign_to_exemplars(sim, refined);
  result.exemplars = std::move(refined);
  return result;
}

}  // namespace typedom

#pragma once

// Small hand-built point sets shared by the unit and acceptance suites.

#include <cmath>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "typedom/embeddings.hpp"

namespace fixtures {

struct PointSet {
  std::string name;
  std::vector<std::vector<double>> points;

  oracle::Matrix similarity() const {
    oracle::Matrix s(points.size(), std::vector<double>(points.size()));
    for (std::size_t i = 0; i < points.size(); ++i) {
      for (std::size_t j = 0; j < points.size(); ++j) s[i][j] = oracle::cosine(points[i], points[j]);
    }
    for (std::size_t i = 0; i < points.size(); ++i) {
      for (std::size_t j = i + 1; j < points.size(); ++j) s[j][i] = s[i][j];
    }
    return s;
  }
};

inline std::vector<double> angle(double degrees) {
  const double r = degrees * 3.14159265358979323846 / 180.0;
  return {std::cos(r), std::sin(r)};
}

// Six unit-ish vectors in two tight groups: within-group cosine >= 0.99,
// across groups <= 0.1.
inline PointSet two_groups() {
  return {"two_groups",
          {{1.0, 0.05, 0.0}, {1.0, -0.05, 0.02}, {1.0, 0.0, -0.06},
           {0.05, 1.0, 0.0}, {-0.04, 1.0, 0.05}, {0.0, 1.0, -0.05}}};
}

inline std::vector<PointSet> ap_point_sets() {
  return {
      {"singleton", {{0.3, 0.4}}},
      {"identical_pair", {{1.0, 2.0}, {1.0, 2.0}}},
      two_groups(),
      {"fan_of_four", {angle(0), angle(30), angle(60), angle(90)}},
      {"tied_exemplar", {{1.0, 0.0, 0.0}, {0.8, 0.6, 0.0}, {0.8, -0.6, 0.0}}},
      {"triple_and_distractors",
       {{1.0, 0.1, 0.0, 0.0}, {0.95, 0.0, 0.1, 0.0}, {1.0, 0.0, 0.0, 0.1},
        {0.0, 1.0, 0.3, 0.0}, {0.0, 0.2, 1.0, 0.4}, {0.1, 0.0, 0.3, 1.0}}},
      {"emergency_and_distractors",
       {{1.0, 0.05, 0.0, 0.0, 0.0, 0.0, 0.0}, {1.0, 0.0, 0.1, 0.0, 0.0, 0.0, 0.0},
        {1.0, 0.0, 0.0, 0.15, 0.0, 0.0, 0.0}, {1.0, 0.0, 0.0, 0.0, 0.2, 0.0, 0.0},
        {1.0, -0.25, 0.0, 0.0, 0.0, 0.0, 0.0}, {0.0, 1.0, 0.0, 0.0, 0.0, 0.1, 0.0},
        {0.0, 0.0, 1.0, 0.2, 0.0, 0.0, 0.0}, {0.0, 0.0, 0.0, 0.3, 1.0, 0.0, 0.0}}},
      {"three_loose_groups",
       {angle(0), angle(20), angle(110), angle(125), angle(140), angle(250), angle(265)}},
  };
}

// Label vectors for a 5-member emergency-vehicle domain plus 20 distractors.
// Members sit within cosine >= 0.95 of each other; distractors are at most 0.2
// from any member.
inline std::vector<typedom::LabelVector> emergency_vocabulary() {
  const std::vector<std::string> members{"fire truck", "fire engine", "air ambulance", "ambulance", "police car"};
  const std::size_t dim = 26;
  std::vector<typedom::LabelVector> out;
  for (std::size_t i = 0; i < members.size(); ++i) {
    std::vector<double> v(dim, 0.0);
    v[0] = 1.0;
    v[1 + i] = 0.04 * static_cast<double>(i + 1);  // distinct offsets, no exact ties
    out.push_back({members[i], v, true});
  }
  for (std::size_t i = 0; i < 20; ++i) {
    std::vector<double> v(dim, 0.0);
    v[6 + i] = 1.0;
    v[0] = 0.1;
    out.push_back({"distractor " + std::to_string(i), v, true});
  }
  return out;
}

// Five members with exactly equal pairwise similarities plus three
// distractors. Tied candidates keep standard AP in a slow transient.
inline PointSet exact_tie_group() {
  return {"exact_tie_group",
          {{1.0, 0.1, 0.0, 0.0, 0.0}, {1.0, 0.0, 0.1, 0.0, 0.0}, {1.0, 0.0, 0.0, 0.1, 0.0},
           {1.0, 0.0, 0.0, 0.0, 0.1}, {1.0, -0.1, 0.0, 0.0, 0.0}, {0.0, 1.0, 0.0, 0.0, 0.0},
           {0.0, 0.0, 1.0, 0.2, 0.0}, {0.0, 0.0, 0.0, 0.3, 1.0}}};
}

}  // namespace fixtures

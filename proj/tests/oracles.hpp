#pragma once

// Test-only reference implementations, independent of the library's
// algorithms: brute-force pair-counting AUC, exhaustive grid search for
// recourse, and finite-difference gradients.

#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include "censorsim/learner.hpp"
#include "censorsim/recourse.hpp"

namespace oracle {

// P(score+ > score-) + 0.5 P(tie) by direct enumeration of all pairs.
inline std::optional<double> pair_counting_auc(std::span<const double> scores,
                                               std::span<const int> labels) {
  double num = 0.0;
  long pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] <= 0) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] > 0) continue;
      ++pairs;
      if (scores[i] > scores[j]) num += 1.0;
      else if (scores[i] == scores[j]) num += 0.5;
    }
  }
  if (pairs == 0) return std::nullopt;
  return num / static_cast<double>(pairs);
}

// Minimum cost over the full grid of beneficial-direction step combinations
// for <= 3 actionable features; enumerates the first d-1 features and solves
// the last one directly.
inline std::optional<double> grid_search_recourse_cost(const censorsim::LinearModel& m,
                                                       std::span<const double> x,
                                                       const censorsim::ActionSet& aset) {
  using censorsim::ActionDirection;
  struct Feat {
    std::size_t j;
    double dir;
    long max_steps;
    double step;
    double cost;
    double w;
  };
  std::vector<Feat> feats;
  for (std::size_t j = 0; j < aset.features.size(); ++j) {
    const auto& fa = aset.features[j];
    const double w = m.weights[j];
    if (!fa.actionable || w == 0.0) continue;
    const double dir = w > 0.0 ? 1.0 : -1.0;
    if (dir > 0.0 && fa.direction == ActionDirection::kDecreaseOnly) continue;
    if (dir < 0.0 && fa.direction == ActionDirection::kIncreaseOnly) continue;
    const double room = dir > 0.0 ? fa.hi - x[j] : x[j] - fa.lo;
    if (room <= 0.0) continue;
    const long steps = static_cast<long>(std::floor(room / fa.step + 1e-9));
    if (steps <= 0) continue;
    feats.push_back({j, dir, steps, fa.step, fa.cost_weight, w});
  }
  const double gap = m.logit_threshold() - m.score(x);
  std::optional<double> best;

  // k: index of the feature solved in closed form; others enumerated.
  auto solve_last = [&](const Feat& f, double remaining) -> std::optional<double> {
    if (remaining < 0.0) remaining = 0.0;
    const double eff = std::fabs(f.w) * f.step;
    long need = static_cast<long>(std::floor(remaining / eff)) + 1;
    while (static_cast<double>(need) * eff <= remaining) ++need;
    if (need > f.max_steps) return std::nullopt;
    return f.cost * static_cast<double>(need) * f.step;
  };
  auto consider = [&](double cost) {
    if (!best || cost < *best - 1e-12) best = cost;
  };

  if (feats.empty()) return std::nullopt;
  // enumerate subsets of "saturating or partial" combinations:
  // full grid over every feature except one closed-form feature
  const std::size_t d = feats.size();
  std::vector<long> counts(d, 0);
  // iterate over grid combos of all features; constraint check directly
  // (sizes stay small in the tests: <= 200^2 combos for d<=3 with closed form)
  if (d == 1) {
    if (auto c = solve_last(feats[0], gap)) consider(*c);
  } else {
    // choose which feature is solved directly: try each, enumerate the rest
    for (std::size_t last = 0; last < d; ++last) {
      std::vector<std::size_t> rest;
      for (std::size_t i = 0; i < d; ++i)
        if (i != last) rest.push_back(i);
      std::vector<long> idx(rest.size(), 0);
      for (;;) {
        double used = 0.0, cost = 0.0;
        for (std::size_t r = 0; r < rest.size(); ++r) {
          const Feat& f = feats[rest[r]];
          used += static_cast<double>(idx[r]) * std::fabs(f.w) * f.step;
          cost += f.cost * static_cast<double>(idx[r]) * f.step;
        }
        if (used > gap) {
          consider(cost);  // already strictly past the gap without the last feature?
        }
        if (auto c = solve_last(feats[last], gap - used)) consider(cost + *c);
        // increment multi-index
        std::size_t r = 0;
        for (; r < rest.size(); ++r) {
          if (++idx[r] <= feats[rest[r]].max_steps) break;
          idx[r] = 0;
        }
        if (r == rest.size()) break;
      }
    }
  }
  return best;
}

}  // namespace oracle

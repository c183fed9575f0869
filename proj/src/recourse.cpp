#include "censorsim/recourse.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace censorsim {

ActionSet ActionSet::defaults_for(const DagSpec& spec, const Population* calibration) {
  ActionSet aset;
  aset.feature_names = spec.model_features;
  for (const auto& name : spec.model_features) {
    FeatureActionSpec fa;
    const int idx = spec.index_of(name);
    const NodeSpec& node = spec.nodes[static_cast<std::size_t>(idx)];
    const bool is_censor = idx == spec.censor_index();
    const bool is_latent = std::find(spec.latent_nodes.begin(), spec.latent_nodes.end(),
                                     name) != spec.latent_nodes.end();
    const NodeSpec* resolved = &node;
    while (resolved->kind == NodeKind::kCopy)
      resolved = &spec.nodes[static_cast<std::size_t>(spec.index_of(resolved->source))];
    const bool is_binary = resolved->kind == NodeKind::kBernoulli ||
                           resolved->kind == NodeKind::kSigmoidBernoulli;
    fa.actionable = !is_censor && !is_latent && !is_binary;
    if (fa.actionable) {
      if (resolved->truncation) {
        fa.lo = resolved->truncation->lo;
        fa.hi = resolved->truncation->hi;
      } else {
        if (calibration == nullptr || calibration->individuals.empty())
          throw RecourseError("node '" + name +
                              "' has no truncation bounds; a calibration sample is "
                              "required to derive default action bounds");
        std::vector<double> vals;
        vals.reserve(calibration->individuals.size());
        for (const auto& ind : calibration->individuals)
          vals.push_back(ind.values[static_cast<std::size_t>(idx)]);
        std::sort(vals.begin(), vals.end());
        const std::size_t n = vals.size();
        fa.lo = vals[static_cast<std::size_t>(0.01 * static_cast<double>(n - 1))];
        fa.hi = vals[static_cast<std::size_t>(0.99 * static_cast<double>(n - 1))];
      }
    }
    aset.features.push_back(fa);
  }
  return aset;
}

const FeatureActionSpec& ActionSet::for_feature(const std::string& name) const {
  for (std::size_t i = 0; i < feature_names.size(); ++i)
    if (feature_names[i] == name) return features[i];
  throw RecourseError("no action spec for feature '" + name + "'");
}

FeatureActionSpec& ActionSet::for_feature(const std::string& name) {
  for (std::size_t i = 0; i < feature_names.size(); ++i)
    if (feature_names[i] == name) return features[i];
  throw RecourseError("no action spec for feature '" + name + "'");
}

namespace {

// Steps available in the beneficial direction, respecting direction and
// bound constraints. Zero when the feature cannot help.
long max_beneficial_steps(const FeatureActionSpec& fa, double x, double w, double* dir) {
  *dir = 0.0;
  if (!fa.actionable || w == 0.0 || fa.step <= 0.0) return 0;
  const double want = w > 0.0 ? 1.0 : -1.0;
  if (want > 0.0 && fa.direction == ActionDirection::kDecreaseOnly) return 0;
  if (want < 0.0 && fa.direction == ActionDirection::kIncreaseOnly) return 0;
  const double room = want > 0.0 ? fa.hi - x : x - fa.lo;
  if (room <= 0.0) return 0;
  *dir = want;
  return static_cast<long>(std::floor(room / fa.step + 1e-9));
}

}  // namespace

namespace {

struct Cand {
  std::size_t j;
  double dir;
  long max_steps;
  double eff;         // logit gained per grid step
  double step_cost;   // cost of one grid step
  double ratio;       // |w| / cost_weight
};

// Minimal step count on `c` that strictly clears `remaining`; -1 if the
// bound is hit first. remaining may be <= 0 (a single step still applies:
// the strict threshold needs a positive margin).
// Margins from a real extra grid step are >= step*|w|; the epsilon only
// keeps floating-point noise from counting as a strict win.
constexpr double kStrictEps = 1e-9;

long finishing_steps(const Cand& c, double remaining) {
  if (remaining < 0.0) remaining = 0.0;
  long steps = static_cast<long>(std::floor(remaining / c.eff)) + 1;
  while (static_cast<double>(steps) * c.eff <= remaining + kStrictEps) ++steps;
  return steps <= c.max_steps ? steps : -1;
}

}  // namespace

std::optional<RecourseAction> compute_recourse(const LinearModel& m,
                                               std::span<const double> x,
                                               const ActionSet& aset) {
  if (aset.feature_names != m.feature_names)
    throw RecourseError("action set features do not match the model");
  if (m.decide(x) == 1)
    throw RecourseError("recourse requested for an already-approved point");

  const double gap = m.logit_threshold() - m.score(x);  // >= 0 given the precondition

  std::vector<Cand> cands;
  for (std::size_t j = 0; j < aset.features.size(); ++j) {
    const FeatureActionSpec& fa = aset.features[j];
    double dir = 0.0;
    const long steps = max_beneficial_steps(fa, x[j], m.weights[j], &dir);
    if (steps <= 0) continue;
    cands.push_back({j, dir, steps, std::fabs(m.weights[j]) * fa.step,
                     fa.cost_weight * fa.step, std::fabs(m.weights[j]) / fa.cost_weight});
  }
  std::stable_sort(cands.begin(), cands.end(),
                   [](const Cand& a, const Cand& b) { return a.ratio > b.ratio; });

  // Infeasible iff even the best grid corner cannot strictly clear the gap.
  double corner = 0.0;
  for (const Cand& c : cands) corner += static_cast<double>(c.max_steps) * c.eff;
  if (corner <= gap + kStrictEps) return std::nullopt;

  std::vector<long> best(cands.size(), 0);
  double best_cost = std::numeric_limits<double>::infinity();
  auto consider = [&](const std::vector<long>& counts) {
    double cost = 0.0;
    for (std::size_t i = 0; i < cands.size(); ++i)
      cost += static_cast<double>(counts[i]) * cands[i].step_cost;
    if (cost < best_cost - 1e-12) {
      best_cost = cost;
      best = counts;
    }
  };

  // Exact when enumerating every candidate but the best-ratio one stays
  // small (covers >= the two-/three-feature, <=200-point grids exactly);
  // otherwise greedy by cost-effectiveness with a finishing sweep that may
  // swap the round-up step onto a cheaper feature.
  double enum_size = 1.0;
  for (std::size_t i = 1; i < cands.size(); ++i)
    enum_size *= static_cast<double>(cands[i].max_steps + 1);
  if (enum_size <= 50000.0) {
    std::vector<long> counts(cands.size(), 0);
    for (;;) {
      double used = 0.0;
      for (std::size_t i = 1; i < cands.size(); ++i)
        used += static_cast<double>(counts[i]) * cands[i].eff;
      if (used > gap + kStrictEps) {
        counts[0] = 0;
        consider(counts);
      }
      const long need = finishing_steps(cands[0], gap - used);
      if (need >= 0) {
        counts[0] = need;
        consider(counts);
        counts[0] = 0;
      }
      std::size_t i = 1;
      for (; i < cands.size(); ++i) {
        if (++counts[i] <= cands[i].max_steps) break;
        counts[i] = 0;
      }
      if (i >= cands.size()) break;
    }
  } else {
    // Greedy: saturate in decreasing |w|/cost order until one feature can
    // finish, then round its delta up past the boundary.
    std::vector<long> counts(cands.size(), 0);
    double remaining = gap;
    std::size_t partial = cands.size();
    for (std::size_t i = 0; i < cands.size(); ++i) {
      const double capacity = static_cast<double>(cands[i].max_steps) * cands[i].eff;
      if (capacity <= remaining + kStrictEps) {
        counts[i] = cands[i].max_steps;
        remaining -= capacity;
        continue;
      }
      counts[i] = finishing_steps(cands[i], remaining);
      partial = i;
      break;
    }
    if (partial == cands.size()) return std::nullopt;  // numeric edge: treat as corner
    consider(counts);
    // Finishing sweep: leave the partial feature at its floor and hand the
    // final step to each later candidate in turn (cheaper step costs can
    // shave the round-up waste).
    double used = 0.0;
    for (std::size_t i = 0; i < partial; ++i)
      used += static_cast<double>(counts[i]) * cands[i].eff;
    const long floor_steps =
        static_cast<long>(std::floor((gap - used) / cands[partial].eff));
    for (std::size_t f = partial + 1; f < cands.size(); ++f) {
      std::vector<long> alt = counts;
      alt[partial] = std::min<long>(std::max<long>(floor_steps, 0), cands[partial].max_steps);
      const double alt_used = used + static_cast<double>(alt[partial]) * cands[partial].eff;
      const long need = finishing_steps(cands[f], gap - alt_used);
      if (need < 0) continue;
      alt[f] = need;
      consider(alt);
    }
  }

  if (!std::isfinite(best_cost)) return std::nullopt;
  RecourseAction action;
  action.deltas.assign(aset.features.size(), 0.0);
  action.cost = 0.0;
  for (std::size_t i = 0; i < cands.size(); ++i) {
    if (best[i] == 0) continue;
    const Cand& c = cands[i];
    action.deltas[c.j] = c.dir * static_cast<double>(best[i]) * aset.features[c.j].step;
    action.cost += aset.features[c.j].cost_weight * std::fabs(action.deltas[c.j]);
  }
  return action;
}

Individual enact_action(const DagSpec& spec, const Individual& ind,
                        const ActionSet& aset, const RecourseAction& action,
                        RngStream& rng) {
  std::map<std::string, double> changed;
  for (std::size_t j = 0; j < action.deltas.size(); ++j) {
    if (action.deltas[j] == 0.0) continue;
    const std::string& name = aset.feature_names[j];
    const int idx = spec.index_of(name);
    const double value = ind.values[static_cast<std::size_t>(idx)] + action.deltas[j];
    const FeatureActionSpec& fa = aset.features[j];
    if (value < fa.lo - 1e-9 || value > fa.hi + 1e-9)
      throw RecourseError("enacted value for '" + name + "' violates its action bounds");
    changed[name] = value;
  }
  return resample_downstream(spec, ind, changed, rng);
}

bool validate_action(const LinearModel& next_model, std::span<const double> x_after) {
  return next_model.decide(x_after) == 1;
}

void GuaranteeLedger::promise(std::int64_t id, int issued_period) {
  auto [it, inserted] = promises_.emplace(id, issued_period);
  if (!inserted)
    throw RecourseError("individual " + std::to_string(id) + " already holds a promise");
  ++total_promised_;
}

bool GuaranteeLedger::due(std::int64_t id, int period) const {
  auto it = promises_.find(id);
  return it != promises_.end() && it->second + 1 == period;
}

void GuaranteeLedger::discharge(std::int64_t id, int period) {
  auto it = promises_.find(id);
  if (it == promises_.end())
    throw RecourseError("no promise to discharge for individual " + std::to_string(id));
  if (it->second + 1 != period)
    throw RecourseError("promise for individual " + std::to_string(id) +
                        " is due at period " + std::to_string(it->second + 1) +
                        ", not " + std::to_string(period));
  promises_.erase(it);
  ++total_discharged_;
}

}  // namespace censorsim

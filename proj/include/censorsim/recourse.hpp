#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "censorsim/dgp.hpp"
#include "censorsim/learner.hpp"

namespace censorsim {

class RecourseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ActionDirection { kBoth, kIncreaseOnly, kDecreaseOnly };

struct FeatureActionSpec {
  bool actionable = false;
  ActionDirection direction = ActionDirection::kBoth;
  double lo = 0.0;      // post-action value bounds
  double hi = 0.0;
  double step = 0.01;   // grid granularity of the action search
  double cost_weight = 1.0;
};

// Per-model-feature actionability; aligned with a model's feature_names.
struct ActionSet {
  std::vector<std::string> feature_names;
  std::vector<FeatureActionSpec> features;

  // All continuous model features actionable in both directions within the
  // node's truncation bounds; the censor node and latent nodes immutable.
  // Unbounded nodes take their empirical [p1, p99] range from `calibration`.
  static ActionSet defaults_for(const DagSpec& spec,
                                const Population* calibration = nullptr);

  const FeatureActionSpec& for_feature(const std::string& name) const;
  FeatureActionSpec& for_feature(const std::string& name);
};

struct RecourseAction {
  std::vector<double> deltas;  // aligned with the ActionSet feature order
  double cost = 0.0;
};

// Minimum-cost action on the step grid with decide(m, x+a) = 1, or nullopt
// when even the best grid corner cannot strictly exceed the threshold.
// Solved by greedy allocation in decreasing |weight|/cost_weight order; the
// last feature's delta is rounded up one grid step past the boundary so the
// strict threshold is cleared. Throws if x is already approved.
std::optional<RecourseAction> compute_recourse(const LinearModel& m,
                                               std::span<const double> x,
                                               const ActionSet& aset);

// Applies an action through the DAG: acted-on nodes take their new values
// and downstream nodes are re-sampled, so causal consequences (or the lack
// of them, for proxy features) land in true_prob.
Individual enact_action(const DagSpec& spec, const Individual& ind,
                        const ActionSet& aset, const RecourseAction& action,
                        RngStream& rng);

// True iff the (post-action) features are approved by the next model.
bool validate_action(const LinearModel& next_model, std::span<const double> x_after);

// One-period approval promises. Each id holds at most one outstanding
// promise; a promise is discharged exactly one period after it was issued.
class GuaranteeLedger {
 public:
  void promise(std::int64_t id, int issued_period);
  bool due(std::int64_t id, int period) const;
  void discharge(std::int64_t id, int period);
  std::size_t outstanding() const { return promises_.size(); }
  std::int64_t total_promised() const { return total_promised_; }
  std::int64_t total_discharged() const { return total_discharged_; }

 private:
  std::map<std::int64_t, int> promises_;  // id -> period issued
  std::int64_t total_promised_ = 0;
  std::int64_t total_discharged_ = 0;
};

}  // namespace censorsim

#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "censorsim/dgp.hpp"
#include "censorsim/learner.hpp"
#include "censorsim/trace.hpp"

namespace censorsim {

// Censoring induction mechanisms applied to a run's initial conditions.

struct FlipCell {
  double x = 0.0;   // value of the keyed feature
  double z = 0.0;
  int label = 0;    // true label the flip probability applies to
  double p_flip = 0.0;
};

// Flip probabilities keyed by (feature value, z, label); missing cells
// default to 0.
struct FlipTable {
  std::string feature;  // which feature column forms the x-cell
  std::vector<FlipCell> cells;
  double p_flip_for(double x, double z, int label) const;
};

enum class InductionKind { kSelectionBias, kLabelNoise, kOperationalChange, kFeatureShift };

struct InductionSpec {
  InductionKind kind = InductionKind::kSelectionBias;
  FlipTable flip_table;                 // label_noise
  double delta_intercept = 0.0;         // operational_change: shift of b
  std::optional<double> delta_rho;      // operational_change variant: new threshold
  std::string shift_node;               // feature_shift
  double shift_mean = 0.0;
  double shift_std = 1.0;
  std::optional<double> restrict_to_z;  // feature_shift: only rows with this z
};

// Removes every (z=1, y=1) row; order of the survivors is preserved.
Dataset induce_selection_bias(const Dataset& data,
                              const std::map<std::int64_t, double>& z_of);

// Flips each row's label independently with its cell probability.
Dataset apply_label_noise(const Dataset& data, const FlipTable& table, RngStream& rng);

// Returns a copy with the intercept shifted (or the threshold replaced).
LinearModel apply_operational_change(const LinearModel& m, const InductionSpec& spec);

// Redraws the target feature of matching initial-training rows from
// Normal(mean, std). Truncation is deliberately not applied: shifts may
// move the feature outside its sampling range.
Dataset apply_feature_shift(const Dataset& data, const InductionSpec& spec,
                            const std::map<std::int64_t, double>& z_of, RngStream& rng);

// Finite-horizon censoring detection: a cell is censored-through-T iff some
// individual in it applied and no label was ever collected from it.
using GroupingFn = std::function<std::string(const ApplicantRecord&)>;

struct CensoredGroup {
  std::string cell;
  bool censored = false;
  std::int64_t applicants = 0;
  std::int64_t labels_collected = 0;
};

std::vector<CensoredGroup> detect_censored_groups(const ReplicateTrace& trace,
                                                  const GroupingFn& grouping);

}  // namespace censorsim

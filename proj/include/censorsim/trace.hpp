#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "censorsim/learner.hpp"

namespace censorsim {

// One applicant evaluation within one period. `features` is the
// model-feature vector at evaluation time (post any earlier recourse).
struct ApplicantRecord {
  std::int64_t id = 0;
  bool returning = false;
  std::vector<double> features;
  double z = 0.0;  // censor covariate
  double phat = 0.0;
  int model_decision = 0;   // raw threshold decision, before overrides
  bool explored = false;    // approved by randomized exploration
  bool guaranteed = false;  // approved by a guarantee discharge
  bool collected = false;   // label observed this period
  int label_draw = 0;       // ±1 outcome draw (shadow value when uncollected)
  double true_prob = 0.0;   // at evaluation time
  // Recourse issued this period (only for denied applicants under
  // recourse-bearing policies).
  bool action_issued = false;
  bool action_feasible = false;
  double action_cost = 0.0;
  std::vector<double> action_deltas;   // model-feature space
  double true_prob_after = 0.0;        // after enactment (== true_prob if none)

  bool approved() const { return model_decision == 1 || explored || guaranteed; }
};

struct PeriodTrace {
  int period = 0;
  LinearModel model;
  std::vector<ApplicantRecord> applicants;
  int n_new = 0;
  int n_ret = 0;
  int n_eval = 0;
  int collected = 0;      // labels appended this period
  std::int64_t n_cum = 0; // |D^{t+1}|: training rows available after this period
};

// Everything needed to recompute metrics for one replicate. The unbiased
// evaluation sample is not stored: it is regenerated from the recorded
// seeds (generation is deterministic).
struct ReplicateTrace {
  std::string dgp;
  std::string policy;
  int replicate = 0;
  std::uint64_t master_seed = 0;
  int periods = 0;
  int n_new = 0;
  int n_init = 0;
  std::size_t unbiased_n = 0;
  double rho = 0.5;
  double alpha = 0.0;
  double l2_lambda = 1.0;
  Dataset initial_data;  // post-induction
  std::vector<PeriodTrace> period_traces;
};

}  // namespace censorsim

#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "censorsim/dgp.hpp"
#include "censorsim/engine.hpp"
#include "censorsim/trace.hpp"

namespace censorsim {

struct UncertaintySettings {
  bool enabled = false;
  int bins = 20;
  int trials = 200;
  std::vector<double> group_fracs = {0.05, 0.1, 0.2, 0.5, 1.0};
  // When set, uncertainty metrics come from an auxiliary model refit on one
  // half of the evaluation set and scored on the other half.
  bool split_refit = false;
};

struct AdversarialPoint {
  double group_frac = 0.0;
  double max_rmsce = 0.0;
  bool low_power = false;  // group size < 10
};

struct ReplicateMetrics {
  std::optional<double> observed_auc;
  std::optional<double> true_auc;
  // Raw counts of collected true positives / true negatives (initial data
  // excluded); normalized against the baseline during aggregation.
  std::int64_t gain_count = 0;
  std::int64_t loss_count = 0;
  std::optional<double> approved_pct;
  std::optional<double> approved_pct_z1;
  std::optional<double> expected_reapplications;
  std::int64_t never_approved = 0;
  std::optional<double> net_improvement;       // true-probability change, x100
  std::optional<double> net_improvement_pred;  // predicted-probability change, x100
  std::optional<double> invalid_recourse_pct;
  std::optional<double> miscalibration_area_observed;
  std::optional<double> miscalibration_area_true;
  std::optional<double> sharpness_observed;
  std::optional<double> sharpness_true;
  std::vector<AdversarialPoint> adversarial_observed;
  std::vector<AdversarialPoint> adversarial_true;
};

// Final-model evaluation sets reconstructed from a trace.
struct EvalSet {
  std::vector<double> scores;  // predicted probabilities
  std::vector<int> labels;     // ±1
};
EvalSet observed_eval_set(const ReplicateTrace& trace);
EvalSet true_eval_set(const ReplicateTrace& trace, const DagSpec& spec,
                      const Population& unbiased);

std::optional<double> observed_auc(const ReplicateTrace& trace);
std::optional<double> true_auc(const ReplicateTrace& trace, const DagSpec& spec,
                               const Population& unbiased);

// Share of applicants approved per period (exploration and guarantees
// included), averaged over periods with a nonzero denominator.
std::optional<double> approval_rate(const ReplicateTrace& trace);
std::optional<double> approval_rate_z1(const ReplicateTrace& trace);

// Mean reapplication count among eventually-approved individuals who were
// denied at least once; empty when no such individual exists.
std::optional<double> expected_reapplications(const ReplicateTrace& trace);

std::int64_t never_approved(const ReplicateTrace& trace);

std::optional<double> net_improvement(const ReplicateTrace& trace);
std::optional<double> net_improvement_pred(const ReplicateTrace& trace);

// Share of enacted actions whose holder the next period's model denies
// (measured before any guarantee override).
std::optional<double> invalid_recourse_pct(const ReplicateTrace& trace);

// Mean |empirical positive rate - mean predicted probability| over a fixed
// equal-width bin grid, count-weighted; in [0,1].
double miscalibration_area(std::span<const double> scores, std::span<const int> labels,
                           int bins = 20);
// Mean predictive variance p(1-p); in [0, 0.25].
double sharpness(std::span<const double> scores);
// For each group fraction, the worst root-mean-squared calibration error
// over random subsets of that size.
std::vector<AdversarialPoint> adversarial_group_calibration(
    std::span<const double> scores, std::span<const int> labels,
    std::span<const double> group_fracs, int trials, RngStream& rng, int bins = 20);

// All per-replicate metrics; the unbiased sample is regenerated from the
// trace seeds when not supplied.
ReplicateMetrics compute_replicate_metrics(const ReplicateTrace& trace,
                                           const SimulationConfig& cfg,
                                           const UncertaintySettings& unc = {},
                                           const Population* unbiased = nullptr);

struct Aggregate {
  double mean = std::numeric_limits<double>::quiet_NaN();
  double stddev = std::numeric_limits<double>::quiet_NaN();
  int n = 0;
};
Aggregate aggregate(std::span<const double> values);

struct MetricReport {
  std::string dgp;
  std::string policy;
  std::string cell;
  std::vector<ReplicateMetrics> per_replicate;
  Aggregate observed_auc, true_auc;
  Aggregate gain, loss;  // normalized by the baseline means when available
  bool gain_loss_normalized = false;
  Aggregate approved_pct, approved_pct_z1;
  Aggregate expected_reapplications;
  Aggregate never_approved;
  Aggregate net_improvement, net_improvement_pred;
  Aggregate invalid_recourse_pct;
  Aggregate miscalibration_area_observed, miscalibration_area_true;
  Aggregate sharpness_observed, sharpness_true;
};

// Baseline gain/loss constants: mean collected TP / TN counts of the
// designated baseline run (the Censoring cell of the same DGP).
struct GainLossBaseline {
  double gain_mean = 0.0;
  double loss_mean = 0.0;
};
GainLossBaseline gain_loss_baseline(std::span<const ReplicateMetrics> baseline);

MetricReport aggregate_metrics(const std::string& dgp, const std::string& policy,
                               const std::string& cell,
                               std::vector<ReplicateMetrics> per_replicate,
                               const std::optional<GainLossBaseline>& baseline);

}  // namespace censorsim

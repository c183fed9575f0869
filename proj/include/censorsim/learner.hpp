#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace censorsim {

class LearnerError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class RowProvenance { kInitial, kApproved, kExplored, kGuaranteed };

std::string to_string(RowProvenance p);
RowProvenance row_provenance_from_string(const std::string& s);

struct DatasetRow {
  std::vector<double> x;  // aligned with Dataset::feature_names
  int label = 0;          // -1 or 1
  std::int64_t individual_id = 0;
  int period_collected = 0;
  RowProvenance provenance = RowProvenance::kInitial;
};

struct Dataset {
  std::vector<std::string> feature_names;
  std::vector<DatasetRow> rows;
};

struct TrainConfig {
  double l2_lambda = 1.0;  // on weights only, never the intercept
  int max_iter = 500;
  double tol = 1e-8;       // max-abs gradient of the penalized loss
};

struct LinearModel {
  std::vector<std::string> feature_names;
  std::vector<double> weights;
  double intercept = 0.0;
  double threshold = 0.5;  // rho
  int trained_at = 0;
  bool degenerate = false;  // constant model fitted from single-class data

  double score(std::span<const double> x) const;  // w.x + intercept
  double predict_proba(std::span<const double> x) const;
  // +1 iff predict_proba strictly exceeds the threshold, else -1.
  int decide(std::span<const double> x) const;
  double logit_threshold() const;
};

// Minimizes sum of logistic losses + (l2_lambda/2)*|w|^2 by damped Newton
// (IRLS), falling back to plain gradient steps when the normal equations are
// ill-conditioned. Deterministic. Single-class data yields a constant
// `degenerate` model; empty data throws.
LinearModel fit_logreg(const Dataset& data, const TrainConfig& cfg);

// Penalized loss and its gradient at (weights, intercept); exposed for
// gradient checks.
double logreg_loss(const Dataset& data, const TrainConfig& cfg,
                   std::span<const double> weights, double intercept,
                   std::vector<double>* grad = nullptr);

// Mann-Whitney AUC with tie handling: P(s+ > s-) + 0.5 P(s+ = s-).
// Empty when only one class is present.
std::optional<double> auc(std::span<const double> scores, std::span<const int> labels);

// Plain-text key=value serialization for trace inspection.
std::string model_to_text(const LinearModel& m);
LinearModel model_from_text(const std::string& text);

}  // namespace censorsim

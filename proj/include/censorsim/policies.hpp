#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "censorsim/rng.hpp"

namespace censorsim {

class PolicyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class PolicyKind {
  kCensoring,
  kNoCensoring,
  kRandom,
  kIpw,
  kRec,
  kRecGuarantee,
  kRecRandom,
  kGuaranteeIpw,
  kRecIpw,
};

enum class ExplorationKind { kNone, kUniform, kIpw };

struct PolicySpec {
  PolicyKind kind = PolicyKind::kCensoring;
  double alpha = 0.01;

  bool has_recourse() const;
  bool has_guarantee() const;
  // NoCensoring skips initial-data induction; everything downstream is the
  // same selective-labeling pipeline.
  bool skips_induction() const { return kind == PolicyKind::kNoCensoring; }
  ExplorationKind exploration() const;

  std::string name() const;  // canonical spelling, e.g. "Rec_Guarantee"
  static PolicySpec parse(const std::string& name, double alpha = 0.01);
};

std::vector<std::string> policy_names();

// Per-individual selection probabilities for one period's denied set.
// Uniform: q_i = alpha. IPW: q_i = min(1, alpha * n * (1/p_i) / sum_j 1/p_j),
// so exploration concentrates on the least-likely-approved points while the
// expected selected count stays near alpha * n.
std::vector<double> exploration_probabilities(ExplorationKind kind,
                                              std::span<const double> phat,
                                              double alpha);

// Independent Bernoulli draws with the probabilities above; returns indices
// into `phat` (empty for ExplorationKind::kNone or an empty denied set).
std::vector<std::size_t> select_exploration(ExplorationKind kind,
                                            std::span<const double> phat,
                                            double alpha, RngStream& rng);

}  // namespace censorsim

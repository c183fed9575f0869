#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "censorsim/dgp.hpp"
#include "censorsim/learner.hpp"
#include "censorsim/mechanisms.hpp"
#include "censorsim/policies.hpp"
#include "censorsim/recourse.hpp"
#include "censorsim/trace.hpp"

namespace censorsim {

class EngineError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SimulationConfig {
  std::string dgp_name = "causal";
  std::optional<DagSpec> inline_dgp;  // overrides dgp_name when set
  std::vector<InductionSpec> induction;
  PolicySpec policy;
  int periods = 12;  // T
  int n_new = 100;
  int n_init = 200;
  double rho = 0.5;
  TrainConfig train;
  // Overrides for the default action set, keyed by feature name.
  std::vector<std::pair<std::string, FeatureActionSpec>> action_overrides;
  double action_step = 0.01;
  int replicates = 10;
  std::uint64_t seed = 1;
  std::size_t unbiased_n = 10000;
  std::string cell_tag;  // distinguishes config variants of the same (dgp, policy)

  const DagSpec& spec() const;
  std::string cell_name() const;  // "<dgp>__<policy>[__tag]"
  // All problems, not just the first; empty when valid.
  std::vector<std::string> validate() const;
  void validate_or_throw() const;
};

// Unbiased-evaluation ids live far above any applicant id.
inline constexpr std::int64_t kUnbiasedIdBase = 1'000'000'000;

// Fresh fully-labeled draw from the DGP for true-metric computation;
// deterministic in (cfg.seed, replicate) and never fed to the learner.
Population unbiased_sample(const SimulationConfig& cfg, int replicate);

// The action set a run uses: DGP defaults, cfg.action_step, then overrides.
ActionSet resolve_action_set(const SimulationConfig& cfg, int replicate);

// Runs the T-period fit/predict/collect loop for one replicate.
ReplicateTrace run_replicate(const SimulationConfig& cfg, int replicate);

struct RunResult {
  SimulationConfig config;
  std::vector<ReplicateTrace> replicates;
};

// All replicates, optionally in parallel. Results do not depend on `jobs`.
RunResult run_experiment(const SimulationConfig& cfg, int jobs = 1);

}  // namespace censorsim

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "censorsim/expr.hpp"
#include "censorsim/rng.hpp"

namespace censorsim {

class DgpError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class NodeKind {
  kNormal,            // mean expression + fixed sd
  kBernoulli,         // probability expression, value in {0,1}
  kGamma,             // offset + Gamma(shape, scale)
  kCopy,              // exact value copy of another node
  kSigmoidBernoulli,  // Bernoulli(sigmoid(linear expression))
  kDeterministic,     // expression of parents
};

struct Interval {
  double lo;
  double hi;
};

struct NodeSpec {
  std::string name;
  NodeKind kind = NodeKind::kDeterministic;
  Expr expr;          // mean / probability / linear / deterministic expression
  double sd = 1.0;    // normal only
  double shape = 1.0; // gamma only
  double scale = 1.0; // gamma only
  double offset = 0.0;// gamma only
  std::string source; // copy only
  std::optional<Interval> truncation;
  // Applied to the sampled value; the raw draw is bound to variable `v`,
  // parents stay in scope. Needed for nodes like a sigmoid of a noisy sum.
  std::optional<Expr> post;
  std::vector<std::string> parents;
};

class DagSpec {
 public:
  std::string name;
  std::vector<NodeSpec> nodes;  // topological order
  std::string outcome_node;
  std::string censor_node;
  std::vector<std::string> model_features;
  std::vector<std::string> latent_nodes;

  // Validates topology and cross-references, then builds the index caches.
  // Must be called after the public fields are filled in.
  void finalize();

  int index_of(const std::string& node) const;   // -1 when absent
  int outcome_index() const { return outcome_idx_; }
  int censor_index() const { return censor_idx_; }
  const std::vector<int>& model_feature_indices() const { return model_idx_; }
  // True when some node lists the outcome as a parent (the outcome value
  // must then be drawn during ancestral sampling).
  bool outcome_has_children() const { return outcome_has_children_; }
  // Strict descendants, as node indices, of the given node set.
  std::vector<int> descendants_of(const std::vector<int>& sources) const;
  bool finalized() const { return !index_.empty(); }

 private:
  std::map<std::string, int> index_;
  std::vector<std::vector<int>> parents_idx_;
  int outcome_idx_ = -1;
  int censor_idx_ = -1;
  std::vector<int> model_idx_;
  bool outcome_has_children_ = false;

  friend struct DagSampler;
};

struct ApplicationRecord {
  int period = 0;
  int decision = 0;      // -1 or 1 (post exploration/guarantee overrides)
  bool action_taken = false;
};

struct Individual {
  std::int64_t id = 0;
  // One value per DagSpec node. The outcome slot holds the {0,1} draw once
  // the label is realized and NaN before that.
  std::vector<double> values;
  double true_prob = 0.0;
  std::optional<int> label;  // ±1, realized lazily unless the DAG forces an eager draw
  int first_period = 0;
  std::vector<ApplicationRecord> history;

  double z(const DagSpec& spec) const { return values[spec.censor_index()]; }
  double value(const DagSpec& spec, const std::string& node) const;
  std::vector<double> model_features(const DagSpec& spec) const;
};

struct Population {
  std::vector<Individual> individuals;
  std::string dgp_name;
  std::uint64_t seed = 0;
};

// Builtin processes: causal, causal_blind, causal_linked, causal_equal,
// mixed_proxy, mixed_downstream, gaming, german.
const DagSpec& builtin_dgp(const std::string& name);
std::vector<std::string> builtin_dgp_names();

// Declarative definition with the same schema as the builtins (see
// docs/dgp_schema.md). `json_text` must hold a JSON object.
DagSpec dgp_from_json_text(const std::string& json_text);

inline constexpr int kTruncationRetryCap = 10000;

// Ancestral sampling in topological order; truncation by rejection.
// Labels are realized eagerly only when the outcome has children.
Population sample_population(const DagSpec& spec, std::size_t n, RngStream& rng,
                             std::int64_t first_id = 0);

// Draws the ±1 label from true_prob if not yet realized; cached afterwards.
int realize_label(const DagSpec& spec, Individual& ind, RngStream& rng);

// Counterfactual intervention: `changed` nodes take their new values, strict
// descendants are re-sampled from their conditionals, everything else keeps
// its old value. The label draw survives only if the outcome is untouched.
Individual resample_downstream(const DagSpec& spec, const Individual& ind,
                               const std::map<std::string, double>& changed,
                               RngStream& rng);

// Outcome probability for a full node-value vector / named feature map.
double true_probability(const DagSpec& spec, const std::vector<double>& values);
double true_probability(const DagSpec& spec, const std::map<std::string, double>& features);

}  // namespace censorsim

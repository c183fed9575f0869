#include "censorsim/policies.hpp"

#include <algorithm>
#include <cmath>

namespace censorsim {

bool PolicySpec::has_recourse() const {
  switch (kind) {
    case PolicyKind::kRec:
    case PolicyKind::kRecGuarantee:
    case PolicyKind::kRecRandom:
    case PolicyKind::kGuaranteeIpw:
    case PolicyKind::kRecIpw:
      return true;
    default:
      return false;
  }
}

bool PolicySpec::has_guarantee() const {
  return kind == PolicyKind::kRecGuarantee || kind == PolicyKind::kGuaranteeIpw;
}

ExplorationKind PolicySpec::exploration() const {
  switch (kind) {
    case PolicyKind::kRandom:
    case PolicyKind::kRecRandom:
      return ExplorationKind::kUniform;
    case PolicyKind::kIpw:
    case PolicyKind::kGuaranteeIpw:
    case PolicyKind::kRecIpw:
      return ExplorationKind::kIpw;
    default:
      return ExplorationKind::kNone;
  }
}

namespace {

struct PolicyName {
  PolicyKind kind;
  const char* name;
};

// Canonical spellings follow the experiment tables.
constexpr PolicyName kPolicyNames[] = {
    {PolicyKind::kCensoring, "Censoring"},
    {PolicyKind::kNoCensoring, "NoCensoring"},
    {PolicyKind::kRandom, "Random"},
    {PolicyKind::kIpw, "IPW"},
    {PolicyKind::kRec, "Rec"},
    {PolicyKind::kRecGuarantee, "Rec_Guarantee"},
    {PolicyKind::kRecRandom, "Rec_Random"},
    {PolicyKind::kGuaranteeIpw, "Guarantee_IPW"},
    {PolicyKind::kRecIpw, "Rec_IPW"},
};

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

}  // namespace

std::string PolicySpec::name() const {
  for (const auto& p : kPolicyNames)
    if (p.kind == kind) return p.name;
  return "?";
}

PolicySpec PolicySpec::parse(const std::string& name, double alpha) {
  const std::string want = lower(name);
  for (const auto& p : kPolicyNames) {
    if (lower(p.name) == want) {
      PolicySpec spec;
      spec.kind = p.kind;
      spec.alpha = alpha;
      return spec;
    }
  }
  std::string msg = "unknown policy '" + name + "'; valid names:";
  for (const auto& p : kPolicyNames) msg += std::string(" ") + p.name;
  throw PolicyError(msg);
}

std::vector<std::string> policy_names() {
  std::vector<std::string> out;
  for (const auto& p : kPolicyNames) out.push_back(p.name);
  return out;
}

std::vector<double> exploration_probabilities(ExplorationKind kind,
                                              std::span<const double> phat,
                                              double alpha) {
  if (alpha < 0.0 || alpha > 1.0) throw PolicyError("alpha must lie in [0,1]");
  const std::size_t n = phat.size();
  std::vector<double> q(n, 0.0);
  if (n == 0 || kind == ExplorationKind::kNone || alpha == 0.0) return q;
  if (kind == ExplorationKind::kUniform) {
    std::fill(q.begin(), q.end(), alpha);
    return q;
  }
  double inv_sum = 0.0;
  for (double p : phat) {
    if (!(p > 0.0) || !(p < 1.0))
      throw PolicyError("IPW exploration requires predicted probabilities in (0,1)");
    inv_sum += 1.0 / p;
  }
  const double budget = alpha * static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i)
    q[i] = std::min(1.0, budget * (1.0 / phat[i]) / inv_sum);
  return q;
}

std::vector<std::size_t> select_exploration(ExplorationKind kind,
                                            std::span<const double> phat,
                                            double alpha, RngStream& rng) {
  const std::vector<double> q = exploration_probabilities(kind, phat, alpha);
  std::vector<std::size_t> selected;
  for (std::size_t i = 0; i < q.size(); ++i)
    if (q[i] > 0.0 && rng.bernoulli(q[i])) selected.push_back(i);
  return selected;
}

}  // namespace censorsim

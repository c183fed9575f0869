#include <cmath>

#include "censorsim/policies.hpp"
#include "doctest.h"

using namespace censorsim;

TEST_CASE("policy names and flags") {
  CHECK(policy_names().size() == 9);
  const PolicySpec rec = PolicySpec::parse("Rec");
  CHECK(rec.has_recourse());
  CHECK(!rec.has_guarantee());
  CHECK(rec.exploration() == ExplorationKind::kNone);

  const PolicySpec guar_ipw = PolicySpec::parse("guarantee_ipw");  // case-insensitive
  CHECK(guar_ipw.kind == PolicyKind::kGuaranteeIpw);
  CHECK(guar_ipw.has_recourse());
  CHECK(guar_ipw.has_guarantee());
  CHECK(guar_ipw.exploration() == ExplorationKind::kIpw);
  CHECK(guar_ipw.name() == "Guarantee_IPW");

  const PolicySpec nc = PolicySpec::parse("NoCensoring");
  CHECK(nc.skips_induction());
  CHECK(!PolicySpec::parse("Censoring").skips_induction());
  CHECK(PolicySpec::parse("Rec_Random").exploration() == ExplorationKind::kUniform);

  CHECK_THROWS_WITH_AS(PolicySpec::parse("Bogus"), doctest::Contains("unknown policy"),
                       PolicyError);
}

TEST_CASE("exploration probabilities") {
  // alpha = 0: never
  std::vector<double> phat{0.1, 0.2, 0.3};
  auto q = exploration_probabilities(ExplorationKind::kUniform, phat, 0.0);
  for (double v : q) CHECK(v == 0.0);

  // uniform: every denied point has probability alpha
  q = exploration_probabilities(ExplorationKind::kUniform, phat, 0.25);
  for (double v : q) CHECK(v == 0.25);

  // IPW selection ratio equals the inverse-probability ratio
  std::vector<double> two{0.1, 0.4};
  q = exploration_probabilities(ExplorationKind::kIpw, two, 0.5);  // one expected pick
  CHECK(q[0] / q[1] == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(q[0] + q[1] == doctest::Approx(1.0).epsilon(1e-12));  // expected count = alpha*n

  // capping at 1
  std::vector<double> extreme{0.001, 0.5, 0.5};
  q = exploration_probabilities(ExplorationKind::kIpw, extreme, 0.5);
  CHECK(q[0] == 1.0);
  CHECK(q[1] < 0.01);

  CHECK_THROWS_AS(
      exploration_probabilities(ExplorationKind::kIpw, std::vector<double>{0.0, 0.5}, 0.1),
      PolicyError);
  CHECK_THROWS_AS(
      exploration_probabilities(ExplorationKind::kUniform, std::vector<double>{0.5}, 1.5),
      PolicyError);
}

TEST_CASE("IPW selection is monotone decreasing in the predicted probability") {
  RngStream rng(13);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> phat;
    const int n = 2 + static_cast<int>(rng.uniform() * 50);
    for (int i = 0; i < n; ++i) phat.push_back(0.01 + 0.98 * rng.uniform());
    const auto q = exploration_probabilities(ExplorationKind::kIpw, phat, 0.05);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (phat[static_cast<std::size_t>(i)] < phat[static_cast<std::size_t>(j)])
          CHECK(q[static_cast<std::size_t>(i)] >= q[static_cast<std::size_t>(j)]);
  }
}

TEST_CASE("uniform selection count concentrates on alpha * n") {
  const std::vector<double> phat(1000, 0.2);
  double total = 0;
  const int trials = 500;
  for (int s = 0; s < trials; ++s) {
    RngStream rng(static_cast<std::uint64_t>(1000 + s));
    total += static_cast<double>(
        select_exploration(ExplorationKind::kUniform, phat, 0.01, rng).size());
  }
  const double mean = total / trials;
  // Binomial(1000, 0.01): SE of the mean over 500 trials ~ 0.14
  CHECK(std::fabs(mean - 10.0) < 1.0);

  RngStream rng(1);
  CHECK(select_exploration(ExplorationKind::kNone, phat, 0.5, rng).empty());
  CHECK(select_exploration(ExplorationKind::kUniform, std::vector<double>{}, 0.5, rng).empty());
}

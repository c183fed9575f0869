#include <cmath>

#include "censorsim/engine.hpp"
#include "censorsim/metrics.hpp"
#include "doctest.h"

using namespace censorsim;

namespace {

SimulationConfig small_config(const char* policy) {
  SimulationConfig cfg;
  cfg.dgp_name = "causal";
  cfg.policy = PolicySpec::parse(policy);
  cfg.periods = 6;
  cfg.n_new = 50;
  cfg.n_init = 120;
  cfg.train.l2_lambda = 0.15;
  cfg.action_step = 0.25;
  cfg.replicates = 2;
  cfg.seed = 5;
  cfg.unbiased_n = 400;
  InductionSpec bias;
  bias.kind = InductionKind::kSelectionBias;
  cfg.induction = {bias};
  return cfg;
}

// Minimal hand-built trace: two periods, one enacted action that stays
// valid under an unchanged model.
ReplicateTrace frozen_model_trace() {
  ReplicateTrace t;
  t.periods = 2;
  LinearModel m;
  m.feature_names = {"x"};
  m.weights = {1.0};
  m.intercept = 0.0;
  m.threshold = 0.5;

  PeriodTrace p1;
  p1.period = 1;
  ApplicantRecord r;
  r.id = 1;
  r.features = {-0.4};
  r.phat = sigmoid(-0.4);
  r.model_decision = -1;
  r.label_draw = 1;
  r.true_prob = 0.4;
  r.action_issued = true;
  r.action_feasible = true;
  r.action_deltas = {0.5};
  r.action_cost = 0.5;
  r.true_prob_after = 0.52;
  p1.applicants = {r};
  p1.model = m;
  t.period_traces.push_back(p1);

  PeriodTrace p2;
  p2.period = 2;
  ApplicantRecord r2;
  r2.id = 1;
  r2.returning = true;
  r2.features = {0.1};
  r2.phat = sigmoid(0.1);
  r2.model_decision = 1;
  r2.collected = true;
  r2.label_draw = 1;
  r2.true_prob = 0.52;
  r2.true_prob_after = 0.52;
  p2.applicants = {r2};
  p2.model = m;
  t.period_traces.push_back(p2);
  return t;
}

}  // namespace

TEST_CASE("frozen model means no invalid recourse; improvements use the DGP probability") {
  const ReplicateTrace t = frozen_model_trace();
  CHECK(invalid_recourse_pct(t).value() == doctest::Approx(0.0));
  CHECK(net_improvement(t).value() == doctest::Approx(12.0));  // (0.52-0.40)*100
  CHECK(expected_reapplications(t).value() == doctest::Approx(1.0));
  CHECK(never_approved(t) == 0);
}

TEST_CASE("guarantee policies pay exactly one reapplication") {
  SimulationConfig cfg = small_config("Rec_Guarantee");
  for (int rep = 0; rep < 2; ++rep) {
    const ReplicateTrace t = run_replicate(cfg, rep);
    const auto e = expected_reapplications(t);
    REQUIRE(e.has_value());
    CHECK(*e == doctest::Approx(1.0).epsilon(1e-12));
  }
  SimulationConfig gipw = small_config("Guarantee_IPW");
  const ReplicateTrace t = run_replicate(gipw, 0);
  CHECK(expected_reapplications(t).value() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("full exploration leaves nobody unapproved") {
  SimulationConfig cfg = small_config("Random");
  cfg.policy.alpha = 1.0;
  const ReplicateTrace t = run_replicate(cfg, 0);
  CHECK(never_approved(t) == 0);
  // everyone is collected in their first period: no reapplicants at all
  CHECK(!expected_reapplications(t).has_value());
}

TEST_CASE("gain and loss normalize to exactly one on the baseline") {
  SimulationConfig cfg = small_config("Censoring");
  std::vector<ReplicateMetrics> ms;
  for (int rep = 0; rep < cfg.replicates; ++rep)
    ms.push_back(compute_replicate_metrics(run_replicate(cfg, rep), cfg));
  const GainLossBaseline base = gain_loss_baseline(ms);
  const MetricReport report =
      aggregate_metrics("causal", "Censoring", "causal__Censoring", ms, base);
  CHECK(report.gain.mean == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(report.loss.mean == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(report.gain_loss_normalized);

  // without a baseline the raw counts are flagged
  const MetricReport raw =
      aggregate_metrics("causal", "Censoring", "causal__Censoring", ms, std::nullopt);
  CHECK(!raw.gain_loss_normalized);
  CHECK(raw.gain.mean > 10.0);  // raw collected-positive counts
}

TEST_CASE("observed scores come from the final model over its training data") {
  SimulationConfig cfg = small_config("Censoring");
  const ReplicateTrace t = run_replicate(cfg, 0);
  const EvalSet obs = observed_eval_set(t);
  // |D^T| = initial rows + collected before the final period
  std::size_t expected = t.initial_data.rows.size();
  for (std::size_t k = 0; k + 1 < t.period_traces.size(); ++k)
    expected += static_cast<std::size_t>(t.period_traces[k].collected);
  CHECK(obs.scores.size() == expected);
  const auto a = observed_auc(t);
  REQUIRE(a.has_value());
  CHECK(*a > 0.5);
}

TEST_CASE("approval rates include exploration and guarantees") {
  SimulationConfig cfg = small_config("Rec_Guarantee");
  const ReplicateTrace t = run_replicate(cfg, 0);
  const auto all = approval_rate(t);
  const auto z1 = approval_rate_z1(t);
  REQUIRE(all.has_value());
  REQUIRE(z1.has_value());
  CHECK(*all > 0.0);
  CHECK(*all <= 100.0);
  CHECK(*z1 >= 0.0);

  // cross-check one period by hand
  const PeriodTrace& pt = t.period_traces[2];
  std::int64_t approved = 0;
  for (const auto& rec : pt.applicants) approved += rec.approved();
  double manual = 100.0 * static_cast<double>(approved) / pt.n_eval;
  double sum = 0;
  for (const auto& p : t.period_traces) {
    std::int64_t a = 0;
    for (const auto& rec : p.applicants) a += rec.approved();
    sum += 100.0 * static_cast<double>(a) / p.n_eval;
  }
  CHECK(*all == doctest::Approx(sum / static_cast<double>(t.period_traces.size())));
  CHECK(manual >= 0.0);
}

TEST_CASE("miscalibration area: calibrated scores are near zero, biased scores are not") {
  RngStream rng(17);
  std::vector<double> scores;
  std::vector<int> labels;
  for (int i = 0; i < 10000; ++i) {
    const double p = rng.uniform();
    scores.push_back(p);
    labels.push_back(rng.bernoulli(p) ? 1 : -1);
  }
  const double ma = miscalibration_area(scores, labels);
  CHECK(ma <= 0.02);
  CHECK(ma >= 0.0);

  // shift every score up by 0.3: badly calibrated
  std::vector<double> biased;
  for (double s : scores) biased.push_back(std::min(1.0, s + 0.3));
  CHECK(miscalibration_area(biased, labels) > 0.15);
  CHECK(miscalibration_area(biased, labels) <= 1.0);
}

TEST_CASE("sharpness of a constant half predictor is exactly a quarter") {
  const std::vector<double> half(100, 0.5);
  CHECK(sharpness(half) == doctest::Approx(0.25).epsilon(1e-15));
  const std::vector<double> confident(100, 0.99);
  CHECK(sharpness(confident) < 0.01);
  RngStream rng(3);
  std::vector<double> any;
  for (int i = 0; i < 1000; ++i) any.push_back(rng.uniform());
  CHECK(sharpness(any) <= 0.25);
  CHECK(sharpness(any) >= 0.0);
}

TEST_CASE("adversarial group calibration shrinks with the group fraction") {
  RngStream rng(23);
  std::vector<double> scores;
  std::vector<int> labels;
  for (int i = 0; i < 8000; ++i) {
    const double p = rng.uniform();
    scores.push_back(p);
    labels.push_back(rng.bernoulli(p) ? 1 : -1);
  }
  const std::vector<double> fracs{0.05, 0.1, 0.2, 0.5, 1.0};
  RngStream mrng(29);
  const auto curve = adversarial_group_calibration(scores, labels, fracs, 200, mrng);
  REQUIRE(curve.size() == 5);
  for (std::size_t i = 0; i + 1 < curve.size(); ++i)
    CHECK(curve[i].max_rmsce >= curve[i + 1].max_rmsce - 0.01);
  CHECK(curve[0].max_rmsce > curve[4].max_rmsce);
  for (const auto& pt : curve) CHECK(!pt.low_power);

  std::vector<double> tiny_scores(scores.begin(), scores.begin() + 50);
  std::vector<int> tiny_labels(labels.begin(), labels.begin() + 50);
  RngStream trng(31);
  const auto tiny = adversarial_group_calibration(tiny_scores, tiny_labels,
                                                  std::vector<double>{0.05}, 10, trng);
  CHECK(tiny[0].low_power);  // 3-element groups are flagged
}

TEST_CASE("uncertainty metrics appear in replicate metrics when enabled") {
  SimulationConfig cfg = small_config("Censoring");
  UncertaintySettings unc;
  unc.enabled = true;
  unc.trials = 20;
  const ReplicateTrace t = run_replicate(cfg, 0);
  const ReplicateMetrics m = compute_replicate_metrics(t, cfg, unc);
  REQUIRE(m.miscalibration_area_observed.has_value());
  REQUIRE(m.sharpness_true.has_value());
  CHECK(*m.sharpness_true <= 0.25);
  CHECK(m.adversarial_observed.size() == 5);
  CHECK(m.adversarial_true.size() == 5);

  UncertaintySettings split = unc;
  split.split_refit = true;
  const ReplicateMetrics ms = compute_replicate_metrics(t, cfg, split);
  CHECK(ms.miscalibration_area_true.has_value());

  const ReplicateMetrics off = compute_replicate_metrics(t, cfg);
  CHECK(!off.miscalibration_area_observed.has_value());
}

TEST_CASE("gaming runs have exactly zero true net improvement") {
  SimulationConfig cfg = small_config("Rec");
  cfg.dgp_name = "gaming";
  const ReplicateTrace t = run_replicate(cfg, 0);
  const auto ni = net_improvement(t);
  REQUIRE(ni.has_value());
  CHECK(*ni == doctest::Approx(0.0).epsilon(1e-12));
  // while the predicted improvement is large (that is the point of gaming)
  const auto nip = net_improvement_pred(t);
  REQUIRE(nip.has_value());
  CHECK(*nip > 5.0);
}

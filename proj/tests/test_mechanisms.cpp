#include <algorithm>
#include <cmath>
#include <map>

#include "censorsim/mechanisms.hpp"
#include "doctest.h"

using namespace censorsim;

namespace {

struct Sampled {
  Dataset data;
  std::map<std::int64_t, double> z_of;
};

Sampled sample_labeled(const char* dgp, std::size_t n, std::uint64_t seed) {
  const DagSpec& spec = builtin_dgp(dgp);
  RngStream rng(seed);
  Population pop = sample_population(spec, n, rng);
  Sampled out;
  out.data.feature_names = spec.model_features;
  for (auto& ind : pop.individuals) {
    DatasetRow row;
    row.x = ind.model_features(spec);
    row.label = realize_label(spec, ind, rng);
    row.individual_id = ind.id;
    out.data.rows.push_back(std::move(row));
    out.z_of[ind.id] = ind.z(spec);
  }
  return out;
}

}  // namespace

TEST_CASE("selection bias drops exactly the (z=1, y=1) rows") {
  Sampled s = sample_labeled("causal", 1000, 7);
  const Dataset filtered = induce_selection_bias(s.data, s.z_of);

  std::size_t expected_removed = 0;
  for (const auto& row : s.data.rows)
    if (s.z_of.at(row.individual_id) == 1.0 && row.label == 1) ++expected_removed;
  CHECK(expected_removed > 0);
  CHECK(s.data.rows.size() - filtered.rows.size() == expected_removed);

  // survivors keep order and are exactly the complement
  std::size_t j = 0;
  for (const auto& row : s.data.rows) {
    const bool drop = s.z_of.at(row.individual_id) == 1.0 && row.label == 1;
    if (drop) continue;
    REQUIRE(j < filtered.rows.size());
    CHECK(filtered.rows[j].individual_id == row.individual_id);
    CHECK(filtered.rows[j].label == row.label);
    ++j;
  }
  CHECK(j == filtered.rows.size());
  for (const auto& row : filtered.rows)
    CHECK(!(s.z_of.at(row.individual_id) == 1.0 && row.label == 1));
}

TEST_CASE("selection bias with no matching rows is the identity") {
  Sampled s = sample_labeled("causal", 100, 8);
  std::map<std::int64_t, double> all_zero;
  for (const auto& [id, z] : s.z_of) all_zero[id] = 0.0;
  const Dataset same = induce_selection_bias(s.data, all_zero);
  CHECK(same.rows.size() == s.data.rows.size());
}

TEST_CASE("label noise flips with the cell probabilities") {
  // one known cell from the stylized table: p_flip 0.4 for (x=0, z=1, y=1)
  Dataset d;
  d.feature_names = {"x", "z"};
  for (int i = 0; i < 10000; ++i) d.rows.push_back({{0.0, 1.0}, 1, i, 0, RowProvenance::kInitial});
  for (int i = 0; i < 2000; ++i) d.rows.push_back({{0.0, 0.0}, 1, 10000 + i, 0, RowProvenance::kInitial});

  FlipTable table;
  table.feature = "x";
  table.cells = {{0.0, 1.0, 1, 0.4}};
  RngStream rng(3);
  const Dataset noisy = apply_label_noise(d, table, rng);

  int flipped_cell = 0, flipped_other = 0;
  for (std::size_t i = 0; i < d.rows.size(); ++i) {
    const bool flipped = noisy.rows[i].label != d.rows[i].label;
    if (i < 10000) flipped_cell += flipped;
    else flipped_other += flipped;
  }
  CHECK(std::fabs(flipped_cell / 10000.0 - 0.4) < 0.02);
  CHECK(flipped_other == 0);  // missing cells default to zero

  FlipTable always;
  always.feature = "x";
  always.cells = {{0.0, 1.0, 1, 1.0}};
  RngStream rng2(4);
  const Dataset inverted = apply_label_noise(d, always, rng2);
  for (std::size_t i = 0; i < 10000; ++i) CHECK(inverted.rows[i].label == -1);

  FlipTable empty;
  empty.feature = "x";
  RngStream rng3(5);
  const Dataset same = apply_label_noise(d, empty, rng3);
  for (std::size_t i = 0; i < d.rows.size(); ++i)
    CHECK(same.rows[i].label == d.rows[i].label);
}

TEST_CASE("operational change shifts the intercept or the threshold") {
  LinearModel m;
  m.feature_names = {"x"};
  m.weights = {1.0};
  m.intercept = -0.2;
  m.threshold = 0.5;

  InductionSpec none;
  none.kind = InductionKind::kOperationalChange;
  none.delta_intercept = 0.0;
  const LinearModel same = apply_operational_change(m, none);
  for (double x = -3; x <= 3; x += 0.1)
    CHECK(same.decide(std::vector<double>{x}) == m.decide(std::vector<double>{x}));

  InductionSpec shift;
  shift.kind = InductionKind::kOperationalChange;
  shift.delta_intercept = -3.0;
  const LinearModel stricter = apply_operational_change(m, shift);
  for (double x = -3; x <= 3; x += 0.1) {
    CHECK(stricter.predict_proba(std::vector<double>{x}) ==
          doctest::Approx(sigmoid(1.0 * x - 0.2 - 3.0)).epsilon(1e-12));
  }

  // raising rho is decision-equivalent to an intercept drop of logit(rho)
  InductionSpec rho;
  rho.kind = InductionKind::kOperationalChange;
  rho.delta_rho = 0.9;
  const LinearModel thresholded = apply_operational_change(m, rho);
  InductionSpec equiv;
  equiv.kind = InductionKind::kOperationalChange;
  equiv.delta_intercept = logit(0.5) - logit(0.9);
  const LinearModel shifted = apply_operational_change(m, equiv);
  for (double x = -5; x <= 5; x += 0.05)
    CHECK(thresholded.decide(std::vector<double>{x}) == shifted.decide(std::vector<double>{x}));
}

TEST_CASE("feature shift redraws matching rows, ignoring truncation") {
  Sampled s = sample_labeled("causal", 1000, 11);
  InductionSpec spec;
  spec.kind = InductionKind::kFeatureShift;
  spec.shift_node = "x1";
  spec.shift_mean = -5.0;
  spec.shift_std = 1.0;
  spec.restrict_to_z = 1.0;
  RngStream rng(6);
  const Dataset shifted = apply_feature_shift(s.data, spec, s.z_of, rng);

  double mean = 0;
  int n = 0;
  for (std::size_t i = 0; i < shifted.rows.size(); ++i) {
    const double z = s.z_of.at(shifted.rows[i].individual_id);
    if (z == 1.0) {
      mean += shifted.rows[i].x[0];
      ++n;
    } else {
      CHECK(shifted.rows[i].x[0] == s.data.rows[i].x[0]);
    }
  }
  REQUIRE(n > 50);
  CHECK(std::fabs(mean / n + 5.0) < 0.5);  // far outside the [-2, 1.5] sampling range

  // null shift: distribution unchanged (two-sample KS on a fresh draw)
  Sampled big = sample_labeled("causal", 10000, 12);
  InductionSpec null_shift;
  null_shift.kind = InductionKind::kFeatureShift;
  null_shift.shift_node = "x1";
  null_shift.shift_mean = 0.0;
  null_shift.shift_std = 1.0;  // untruncated normal vs truncated: compare against its own redraw
  RngStream rng2(7);
  const Dataset a = apply_feature_shift(big.data, null_shift, big.z_of, rng2);
  const Dataset b = apply_feature_shift(big.data, null_shift, big.z_of, rng2);
  std::vector<double> xa, xb;
  for (const auto& row : a.rows) xa.push_back(row.x[0]);
  for (const auto& row : b.rows) xb.push_back(row.x[0]);
  std::sort(xa.begin(), xa.end());
  std::sort(xb.begin(), xb.end());
  double ks = 0;
  for (std::size_t i = 0; i < xa.size(); ++i) {
    const double fa = static_cast<double>(i) / xa.size();
    const auto lb = std::lower_bound(xb.begin(), xb.end(), xa[i]) - xb.begin();
    ks = std::max(ks, std::fabs(fa - static_cast<double>(lb) / xb.size()));
  }
  CHECK(ks < 0.03);

  // unrestricted: every row is redrawn
  InductionSpec all;
  all.kind = InductionKind::kFeatureShift;
  all.shift_node = "x1";
  all.shift_mean = 30.0;
  all.shift_std = 0.5;
  RngStream rng3(8);
  const Dataset moved = apply_feature_shift(s.data, all, s.z_of, rng3);
  for (const auto& row : moved.rows) CHECK(row.x[0] > 20.0);

  InductionSpec bad;
  bad.kind = InductionKind::kFeatureShift;
  bad.shift_node = "nope";
  CHECK_THROWS_AS(apply_feature_shift(s.data, bad, s.z_of, rng3), LearnerError);
}

TEST_CASE("censored-group detection over traces") {
  ReplicateTrace trace;
  trace.periods = 2;
  PeriodTrace p1;
  p1.period = 1;
  ApplicantRecord a;  // z=1 applied, never collected
  a.id = 1; a.z = 1.0; a.collected = false;
  ApplicantRecord b;  // z=0 applied and collected
  b.id = 2; b.z = 0.0; b.collected = true;
  p1.applicants = {a, b};
  trace.period_traces.push_back(p1);

  const auto groups = detect_censored_groups(trace, [](const ApplicantRecord& rec) {
    return rec.z == 1.0 ? "z=1" : "z=0";
  });
  REQUIRE(groups.size() == 2);
  for (const auto& g : groups) {
    if (g.cell == "z=1") {
      CHECK(g.censored);
      CHECK(g.applicants == 1);
    } else {
      CHECK(!g.censored);
      CHECK(g.labels_collected == 1);
    }
  }

  // collecting a z=1 label in a later period clears the flag
  PeriodTrace p2 = p1;
  p2.period = 2;
  p2.applicants[0].collected = true;
  trace.period_traces.push_back(p2);
  const auto cleared = detect_censored_groups(trace, [](const ApplicantRecord& rec) {
    return rec.z == 1.0 ? "z=1" : "z=0";
  });
  for (const auto& g : cleared) CHECK(!g.censored);
}

#include "censorsim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace censorsim {

namespace {

const LinearModel& final_model(const ReplicateTrace& trace) {
  if (trace.period_traces.empty()) throw EngineError("trace has no periods");
  return trace.period_traces.back().model;
}

}  // namespace

EvalSet observed_eval_set(const ReplicateTrace& trace) {
  // D^T: what the final model trained on — initial rows plus labels
  // collected before the final period.
  const LinearModel& model = final_model(trace);
  const int last = trace.period_traces.back().period;
  EvalSet set;
  for (const auto& row : trace.initial_data.rows) {
    set.scores.push_back(model.predict_proba(row.x));
    set.labels.push_back(row.label);
  }
  for (const auto& pt : trace.period_traces) {
    if (pt.period >= last) break;
    for (const auto& rec : pt.applicants) {
      if (!rec.collected) continue;
      set.scores.push_back(model.predict_proba(rec.features));
      set.labels.push_back(rec.label_draw);
    }
  }
  return set;
}

EvalSet true_eval_set(const ReplicateTrace& trace, const DagSpec& spec,
                      const Population& unbiased) {
  const LinearModel& model = final_model(trace);
  EvalSet set;
  set.scores.reserve(unbiased.individuals.size());
  for (const auto& ind : unbiased.individuals) {
    set.scores.push_back(model.predict_proba(ind.model_features(spec)));
    set.labels.push_back(ind.label.value());
  }
  return set;
}

std::optional<double> observed_auc(const ReplicateTrace& trace) {
  const EvalSet set = observed_eval_set(trace);
  return auc(set.scores, set.labels);
}

std::optional<double> true_auc(const ReplicateTrace& trace, const DagSpec& spec,
                               const Population& unbiased) {
  const EvalSet set = true_eval_set(trace, spec, unbiased);
  return auc(set.scores, set.labels);
}

namespace {

std::optional<double> mean_over_periods(const ReplicateTrace& trace,
                                        bool z1_only) {
  double sum = 0.0;
  int periods = 0;
  for (const auto& pt : trace.period_traces) {
    std::int64_t denom = 0, num = 0;
    for (const auto& rec : pt.applicants) {
      if (z1_only && rec.z != 1.0) continue;
      ++denom;
      if (rec.approved()) ++num;
    }
    if (denom == 0) continue;  // empty-denominator periods are excluded
    sum += 100.0 * static_cast<double>(num) / static_cast<double>(denom);
    ++periods;
  }
  if (periods == 0) return std::nullopt;
  return sum / periods;
}

}  // namespace

std::optional<double> approval_rate(const ReplicateTrace& trace) {
  return mean_over_periods(trace, false);
}

std::optional<double> approval_rate_z1(const ReplicateTrace& trace) {
  return mean_over_periods(trace, true);
}

std::optional<double> expected_reapplications(const ReplicateTrace& trace) {
  std::map<std::int64_t, std::pair<int, bool>> apps;  // id -> (count, approved)
  for (const auto& pt : trace.period_traces) {
    for (const auto& rec : pt.applicants) {
      auto& [count, approved] = apps[rec.id];
      ++count;
      if (rec.collected) approved = true;
    }
  }
  double sum = 0.0;
  int n = 0;
  for (const auto& [id, state] : apps) {
    const int reapplications = state.first - 1;
    if (!state.second || reapplications < 1) continue;
    sum += reapplications;
    ++n;
  }
  if (n == 0) return std::nullopt;
  return sum / n;
}

std::int64_t never_approved(const ReplicateTrace& trace) {
  std::map<std::int64_t, bool> approved;
  for (const auto& pt : trace.period_traces)
    for (const auto& rec : pt.applicants) approved[rec.id] |= rec.collected;
  return std::count_if(approved.begin(), approved.end(),
                       [](const auto& kv) { return !kv.second; });
}

namespace {

std::optional<double> mean_action_improvement(const ReplicateTrace& trace, bool predicted) {
  double sum = 0.0;
  int n = 0;
  for (const auto& pt : trace.period_traces) {
    for (const auto& rec : pt.applicants) {
      if (!rec.action_feasible) continue;
      if (predicted) {
        std::vector<double> after = rec.features;
        for (std::size_t j = 0; j < after.size(); ++j) after[j] += rec.action_deltas[j];
        sum += 100.0 * (pt.model.predict_proba(after) - rec.phat);
      } else {
        sum += 100.0 * (rec.true_prob_after - rec.true_prob);
      }
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / n;
}

}  // namespace

std::optional<double> net_improvement(const ReplicateTrace& trace) {
  return mean_action_improvement(trace, false);
}

std::optional<double> net_improvement_pred(const ReplicateTrace& trace) {
  return mean_action_improvement(trace, true);
}

std::optional<double> invalid_recourse_pct(const ReplicateTrace& trace) {
  // An enacted action is invalid when the next period's model still denies
  // the holder; guarantee overrides do not mask the measurement.
  std::int64_t enacted = 0, invalid = 0;
  for (std::size_t p = 0; p + 1 < trace.period_traces.size(); ++p) {
    const auto& now = trace.period_traces[p];
    const auto& next = trace.period_traces[p + 1];
    std::map<std::int64_t, const ApplicantRecord*> next_by_id;
    for (const auto& rec : next.applicants) next_by_id[rec.id] = &rec;
    for (const auto& rec : now.applicants) {
      if (!rec.action_feasible) continue;
      auto it = next_by_id.find(rec.id);
      if (it == next_by_id.end()) continue;
      ++enacted;
      if (it->second->model_decision != 1) ++invalid;
    }
  }
  if (enacted == 0) return std::nullopt;
  return 100.0 * static_cast<double>(invalid) / static_cast<double>(enacted);
}

double miscalibration_area(std::span<const double> scores, std::span<const int> labels,
                           int bins) {
  if (scores.size() != labels.size()) throw EngineError("scores/labels size mismatch");
  if (scores.empty()) return 0.0;
  std::vector<std::int64_t> count(static_cast<std::size_t>(bins), 0);
  std::vector<double> conf(static_cast<std::size_t>(bins), 0.0);
  std::vector<std::int64_t> pos(static_cast<std::size_t>(bins), 0);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    int b = static_cast<int>(scores[i] * bins);
    b = std::clamp(b, 0, bins - 1);
    ++count[static_cast<std::size_t>(b)];
    conf[static_cast<std::size_t>(b)] += scores[i];
    if (labels[i] > 0) ++pos[static_cast<std::size_t>(b)];
  }
  double area = 0.0;
  for (int b = 0; b < bins; ++b) {
    const auto ub = static_cast<std::size_t>(b);
    if (count[ub] == 0) continue;  // empty bins are skipped
    const double c = conf[ub] / static_cast<double>(count[ub]);
    const double a = static_cast<double>(pos[ub]) / static_cast<double>(count[ub]);
    area += (static_cast<double>(count[ub]) / static_cast<double>(scores.size())) *
            std::fabs(a - c);
  }
  return area;
}

double sharpness(std::span<const double> scores) {
  if (scores.empty()) return 0.0;
  double s = 0.0;
  for (double p : scores) s += p * (1.0 - p);
  return s / static_cast<double>(scores.size());
}

namespace {

double rmsce(std::span<const double> scores, std::span<const int> labels,
             std::span<const std::size_t> subset, int bins) {
  std::vector<std::int64_t> count(static_cast<std::size_t>(bins), 0);
  std::vector<double> conf(static_cast<std::size_t>(bins), 0.0);
  std::vector<std::int64_t> pos(static_cast<std::size_t>(bins), 0);
  for (std::size_t i : subset) {
    int b = static_cast<int>(scores[i] * bins);
    b = std::clamp(b, 0, bins - 1);
    ++count[static_cast<std::size_t>(b)];
    conf[static_cast<std::size_t>(b)] += scores[i];
    if (labels[i] > 0) ++pos[static_cast<std::size_t>(b)];
  }
  double sq = 0.0;
  for (int b = 0; b < bins; ++b) {
    const auto ub = static_cast<std::size_t>(b);
    if (count[ub] == 0) continue;
    const double c = conf[ub] / static_cast<double>(count[ub]);
    const double a = static_cast<double>(pos[ub]) / static_cast<double>(count[ub]);
    sq += (static_cast<double>(count[ub]) / static_cast<double>(subset.size())) *
          (a - c) * (a - c);
  }
  return std::sqrt(sq);
}

}  // namespace

std::vector<AdversarialPoint> adversarial_group_calibration(
    std::span<const double> scores, std::span<const int> labels,
    std::span<const double> group_fracs, int trials, RngStream& rng, int bins) {
  const std::size_t n = scores.size();
  std::vector<AdversarialPoint> out;
  std::vector<std::size_t> subset;
  for (double frac : group_fracs) {
    const auto size = static_cast<std::size_t>(
        std::ceil(frac * static_cast<double>(n)));
    AdversarialPoint pt;
    pt.group_frac = frac;
    pt.low_power = size < 10;
    double worst = 0.0;
    for (int t = 0; t < trials; ++t) {
      subset.clear();
      if (size >= n) {
        subset.resize(n);
        std::iota(subset.begin(), subset.end(), std::size_t{0});
      } else {
        for (std::size_t k = 0; k < size; ++k)
          subset.push_back(static_cast<std::size_t>(rng.uniform() * static_cast<double>(n)));
      }
      worst = std::max(worst, rmsce(scores, labels, subset, bins));
      if (size >= n) break;  // only one distinct full-set subset
    }
    pt.max_rmsce = worst;
    out.push_back(pt);
  }
  return out;
}

ReplicateMetrics compute_replicate_metrics(const ReplicateTrace& trace,
                                           const SimulationConfig& cfg,
                                           const UncertaintySettings& unc,
                                           const Population* unbiased_in) {
  const DagSpec& spec = cfg.spec();
  Population regenerated;
  const Population* unbiased = unbiased_in;
  if (unbiased == nullptr) {
    regenerated = unbiased_sample(cfg, trace.replicate);
    unbiased = &regenerated;
  }

  ReplicateMetrics m;
  m.observed_auc = observed_auc(trace);
  m.true_auc = true_auc(trace, spec, *unbiased);
  for (const auto& pt : trace.period_traces) {
    for (const auto& rec : pt.applicants) {
      if (!rec.collected) continue;
      (rec.label_draw == 1 ? m.gain_count : m.loss_count)++;
    }
  }
  m.approved_pct = approval_rate(trace);
  m.approved_pct_z1 = approval_rate_z1(trace);
  m.expected_reapplications = expected_reapplications(trace);
  m.never_approved = never_approved(trace);
  m.net_improvement = net_improvement(trace);
  m.net_improvement_pred = net_improvement_pred(trace);
  m.invalid_recourse_pct = invalid_recourse_pct(trace);

  if (unc.enabled) {
    EvalSet obs = observed_eval_set(trace);
    EvalSet tru = true_eval_set(trace, spec, *unbiased);
    if (unc.split_refit) {
      // Auxiliary-model mode: refit on the first half of each set, score the
      // second half. Keeps the uncertainty estimate independent of the
      // deployed model's own scores.
      auto refit = [&](const EvalSet& in, const std::vector<DatasetRow>& rows) {
        EvalSet out;
        const std::size_t half = rows.size() / 2;
        if (half == 0 || rows.size() - half == 0) return in;
        Dataset train;
        train.feature_names = trace.initial_data.feature_names;
        train.rows.assign(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(half));
        const bool two_class =
            std::any_of(train.rows.begin(), train.rows.end(),
                        [](const DatasetRow& r) { return r.label == 1; }) &&
            std::any_of(train.rows.begin(), train.rows.end(),
                        [](const DatasetRow& r) { return r.label == -1; });
        if (!two_class) return in;
        TrainConfig tc;
        tc.l2_lambda = trace.l2_lambda;
        const LinearModel aux = fit_logreg(train, tc);
        for (std::size_t i = half; i < rows.size(); ++i) {
          out.scores.push_back(aux.predict_proba(rows[i].x));
          out.labels.push_back(rows[i].label);
        }
        return out;
      };
      std::vector<DatasetRow> obs_rows = trace.initial_data.rows;
      for (const auto& pt : trace.period_traces)
        for (const auto& rec : pt.applicants)
          if (rec.collected) {
            DatasetRow r;
            r.x = rec.features;
            r.label = rec.label_draw;
            obs_rows.push_back(std::move(r));
          }
      std::vector<DatasetRow> tru_rows;
      for (const auto& ind : unbiased->individuals) {
        DatasetRow r;
        r.x = ind.model_features(spec);
        r.label = ind.label.value();
        tru_rows.push_back(std::move(r));
      }
      obs = refit(obs, obs_rows);
      tru = refit(tru, tru_rows);
    }
    m.miscalibration_area_observed = miscalibration_area(obs.scores, obs.labels, unc.bins);
    m.miscalibration_area_true = miscalibration_area(tru.scores, tru.labels, unc.bins);
    m.sharpness_observed = sharpness(obs.scores);
    m.sharpness_true = sharpness(tru.scores);
    RngStream rng(derive_seed(trace.master_seed, static_cast<std::uint64_t>(trace.replicate),
                              static_cast<std::uint64_t>(StreamPurpose::kMetrics)));
    m.adversarial_observed = adversarial_group_calibration(
        obs.scores, obs.labels, unc.group_fracs, unc.trials, rng, unc.bins);
    m.adversarial_true = adversarial_group_calibration(
        tru.scores, tru.labels, unc.group_fracs, unc.trials, rng, unc.bins);
  }
  return m;
}

Aggregate aggregate(std::span<const double> values) {
  Aggregate a;
  a.n = static_cast<int>(values.size());
  if (values.empty()) return a;
  a.mean = std::accumulate(values.begin(), values.end(), 0.0) /
           static_cast<double>(values.size());
  if (values.size() < 2) return a;  // stddev undefined for a single sample
  double sq = 0.0;
  for (double v : values) sq += (v - a.mean) * (v - a.mean);
  a.stddev = std::sqrt(sq / (static_cast<double>(values.size()) - 1.0));
  return a;
}

GainLossBaseline gain_loss_baseline(std::span<const ReplicateMetrics> baseline) {
  GainLossBaseline b;
  if (baseline.empty()) return b;
  for (const auto& m : baseline) {
    b.gain_mean += static_cast<double>(m.gain_count);
    b.loss_mean += static_cast<double>(m.loss_count);
  }
  b.gain_mean /= static_cast<double>(baseline.size());
  b.loss_mean /= static_cast<double>(baseline.size());
  return b;
}

namespace {

template <typename Get>
Aggregate aggregate_field(const std::vector<ReplicateMetrics>& ms, Get get) {
  std::vector<double> vals;
  for (const auto& m : ms) {
    const auto v = get(m);
    if (v) vals.push_back(*v);
  }
  return aggregate(vals);
}

}  // namespace

MetricReport aggregate_metrics(const std::string& dgp, const std::string& policy,
                               const std::string& cell,
                               std::vector<ReplicateMetrics> per_replicate,
                               const std::optional<GainLossBaseline>& baseline) {
  MetricReport r;
  r.dgp = dgp;
  r.policy = policy;
  r.cell = cell;
  const auto& ms = per_replicate;
  r.observed_auc = aggregate_field(ms, [](const auto& m) { return m.observed_auc; });
  r.true_auc = aggregate_field(ms, [](const auto& m) { return m.true_auc; });

  std::vector<double> gains, losses, nevers;
  for (const auto& m : ms) {
    double g = static_cast<double>(m.gain_count);
    double l = static_cast<double>(m.loss_count);
    if (baseline && baseline->gain_mean > 0.0 && baseline->loss_mean > 0.0) {
      g /= baseline->gain_mean;
      l /= baseline->loss_mean;
    }
    gains.push_back(g);
    losses.push_back(l);
    nevers.push_back(static_cast<double>(m.never_approved));
  }
  r.gain = aggregate(gains);
  r.loss = aggregate(losses);
  r.gain_loss_normalized = baseline.has_value() && baseline->gain_mean > 0.0 &&
                           baseline->loss_mean > 0.0;
  r.never_approved = aggregate(nevers);

  r.approved_pct = aggregate_field(ms, [](const auto& m) { return m.approved_pct; });
  r.approved_pct_z1 = aggregate_field(ms, [](const auto& m) { return m.approved_pct_z1; });
  r.expected_reapplications =
      aggregate_field(ms, [](const auto& m) { return m.expected_reapplications; });
  r.net_improvement = aggregate_field(ms, [](const auto& m) { return m.net_improvement; });
  r.net_improvement_pred =
      aggregate_field(ms, [](const auto& m) { return m.net_improvement_pred; });
  r.invalid_recourse_pct =
      aggregate_field(ms, [](const auto& m) { return m.invalid_recourse_pct; });
  r.miscalibration_area_observed =
      aggregate_field(ms, [](const auto& m) { return m.miscalibration_area_observed; });
  r.miscalibration_area_true =
      aggregate_field(ms, [](const auto& m) { return m.miscalibration_area_true; });
  r.sharpness_observed =
      aggregate_field(ms, [](const auto& m) { return m.sharpness_observed; });
  r.sharpness_true = aggregate_field(ms, [](const auto& m) { return m.sharpness_true; });
  r.per_replicate = std::move(per_replicate);
  return r;
}

}  // namespace censorsim

#include "censorsim/mechanisms.hpp"

#include <algorithm>
#include <map>

namespace censorsim {

double FlipTable::p_flip_for(double x, double z, int label) const {
  for (const auto& c : cells)
    if (c.x == x && c.z == z && c.label == label) return c.p_flip;
  return 0.0;
}

Dataset induce_selection_bias(const Dataset& data,
                              const std::map<std::int64_t, double>& z_of) {
  Dataset out;
  out.feature_names = data.feature_names;
  out.rows.reserve(data.rows.size());
  for (const auto& row : data.rows) {
    auto it = z_of.find(row.individual_id);
    const double z = it == z_of.end() ? 0.0 : it->second;
    if (z == 1.0 && row.label == 1) continue;
    out.rows.push_back(row);
  }
  return out;
}

Dataset apply_label_noise(const Dataset& data, const FlipTable& table, RngStream& rng) {
  const auto xit = std::find(data.feature_names.begin(), data.feature_names.end(), table.feature);
  if (xit == data.feature_names.end())
    throw LearnerError("flip table feature '" + table.feature + "' not in dataset");
  const auto zit = std::find(data.feature_names.begin(), data.feature_names.end(), "z");
  const std::size_t xcol = static_cast<std::size_t>(xit - data.feature_names.begin());
  const std::size_t zcol = zit == data.feature_names.end()
                               ? xcol
                               : static_cast<std::size_t>(zit - data.feature_names.begin());

  Dataset out = data;
  for (auto& row : out.rows) {
    const double z = zit == data.feature_names.end() ? 0.0 : row.x[zcol];
    const double p = table.p_flip_for(row.x[xcol], z, row.label);
    if (p > 0.0 && rng.bernoulli(p)) row.label = -row.label;
  }
  return out;
}

LinearModel apply_operational_change(const LinearModel& m, const InductionSpec& spec) {
  LinearModel out = m;
  if (spec.delta_rho) {
    out.threshold = *spec.delta_rho;
  } else {
    out.intercept += spec.delta_intercept;
  }
  return out;
}

Dataset apply_feature_shift(const Dataset& data, const InductionSpec& spec,
                            const std::map<std::int64_t, double>& z_of, RngStream& rng) {
  const auto it = std::find(data.feature_names.begin(), data.feature_names.end(), spec.shift_node);
  if (it == data.feature_names.end())
    throw LearnerError("shift node '" + spec.shift_node + "' not in dataset");
  const std::size_t col = static_cast<std::size_t>(it - data.feature_names.begin());

  Dataset out = data;
  for (auto& row : out.rows) {
    if (spec.restrict_to_z) {
      auto zit = z_of.find(row.individual_id);
      const double z = zit == z_of.end() ? 0.0 : zit->second;
      if (z != *spec.restrict_to_z) continue;
    }
    row.x[col] = rng.normal(spec.shift_mean, spec.shift_std);
  }
  return out;
}

std::vector<CensoredGroup> detect_censored_groups(const ReplicateTrace& trace,
                                                  const GroupingFn& grouping) {
  std::map<std::string, CensoredGroup> cells;
  for (const auto& pt : trace.period_traces) {
    for (const auto& rec : pt.applicants) {
      CensoredGroup& g = cells[grouping(rec)];
      ++g.applicants;
      if (rec.collected) ++g.labels_collected;
    }
  }
  std::vector<CensoredGroup> out;
  out.reserve(cells.size());
  for (auto& [cell, g] : cells) {
    g.cell = cell;
    g.censored = g.applicants > 0 && g.labels_collected == 0;
    out.push_back(g);
  }
  return out;
}

}  // namespace censorsim

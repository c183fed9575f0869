#include "censorsim/engine.hpp"

#include <algorithm>
#include <atomic>
#include <future>
#include <set>
#include <sstream>

namespace censorsim {

const DagSpec& SimulationConfig::spec() const {
  if (inline_dgp) return *inline_dgp;
  return builtin_dgp(dgp_name);
}

std::string SimulationConfig::cell_name() const {
  std::string n = (inline_dgp ? inline_dgp->name : dgp_name) + "__" + policy.name();
  if (!cell_tag.empty()) n += "__" + cell_tag;
  return n;
}

std::vector<std::string> SimulationConfig::validate() const {
  std::vector<std::string> problems;
  if (periods < 2) problems.push_back("periods must be >= 2");
  if (n_new < 0) problems.push_back("n_new must be >= 0");
  if (n_init < 0) problems.push_back("n_init must be >= 0");
  if (!(rho >= 0.0 && rho <= 1.0)) problems.push_back("rho must lie in [0,1]");
  if (!(policy.alpha >= 0.0 && policy.alpha <= 1.0)) problems.push_back("alpha must lie in [0,1]");
  if (replicates < 1) problems.push_back("replicates must be >= 1");
  if (train.l2_lambda < 0.0) problems.push_back("train.l2_lambda must be >= 0");
  if (!(train.tol > 0.0)) problems.push_back("train.tol must be > 0");
  if (action_step <= 0.0) problems.push_back("action_step must be > 0");
  if (unbiased_n == 0) problems.push_back("unbiased_n must be >= 1");
  try {
    const DagSpec& s = spec();
    for (const auto& [name, fa] : action_overrides) {
      if (s.index_of(name) < 0)
        problems.push_back("action override for unknown feature '" + name + "'");
      else if (fa.step <= 0.0)
        problems.push_back("action override for '" + name + "' has step <= 0");
    }
    for (const auto& ind : induction) {
      if (ind.kind == InductionKind::kFeatureShift && s.index_of(ind.shift_node) < 0)
        problems.push_back("feature shift targets unknown node '" + ind.shift_node + "'");
    }
  } catch (const std::exception& e) {
    problems.push_back(e.what());
  }
  return problems;
}

void SimulationConfig::validate_or_throw() const {
  const auto problems = validate();
  if (problems.empty()) return;
  std::ostringstream msg;
  msg << "invalid simulation config:";
  for (const auto& p : problems) msg << "\n  - " << p;
  throw EngineError(msg.str());
}

namespace {

// Label realization is keyed only by (seed, replicate, individual): when an
// individual is observed is policy business, which label they carry is not.
RngStream label_stream(const SimulationConfig& cfg, int replicate, std::int64_t id) {
  return RngStream(derive_seed(cfg.seed, static_cast<std::uint64_t>(replicate),
                               static_cast<std::uint64_t>(StreamPurpose::kLabel),
                               static_cast<std::uint64_t>(id)));
}

int observe_label(const SimulationConfig& cfg, const DagSpec& spec, int replicate,
                  Individual& ind) {
  RngStream rng = label_stream(cfg, replicate, ind.id);
  return realize_label(spec, ind, rng);
}

// The label the individual would carry if observed now; no state change.
int peek_label(const SimulationConfig& cfg, int replicate, const Individual& ind) {
  if (ind.label) return *ind.label;
  RngStream rng = label_stream(cfg, replicate, ind.id);
  return rng.bernoulli(ind.true_prob) ? 1 : -1;
}

DatasetRow make_row(const DagSpec& spec, const Individual& ind, int label, int period,
                    RowProvenance prov) {
  DatasetRow row;
  row.x = ind.model_features(spec);
  row.label = label;
  row.individual_id = ind.id;
  row.period_collected = period;
  row.provenance = prov;
  return row;
}

struct PoolEntry {
  Individual ind;
};

}  // namespace

Population unbiased_sample(const SimulationConfig& cfg, int replicate) {
  const DagSpec& spec = cfg.spec();
  RngStream rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(replicate),
                            static_cast<std::uint64_t>(StreamPurpose::kUnbiasedSample)));
  Population pop = sample_population(spec, cfg.unbiased_n, rng, kUnbiasedIdBase);
  for (auto& ind : pop.individuals) observe_label(cfg, spec, replicate, ind);
  pop.seed = cfg.seed;
  return pop;
}

ActionSet resolve_action_set(const SimulationConfig& cfg, int replicate) {
  const DagSpec& spec = cfg.spec();
  bool needs_calibration = false;
  for (const auto& name : spec.model_features) {
    const NodeSpec* node = &spec.nodes[static_cast<std::size_t>(spec.index_of(name))];
    while (node->kind == NodeKind::kCopy)
      node = &spec.nodes[static_cast<std::size_t>(spec.index_of(node->source))];
    const bool binary =
        node->kind == NodeKind::kBernoulli || node->kind == NodeKind::kSigmoidBernoulli;
    if (!binary && !node->truncation) needs_calibration = true;
  }
  Population calibration;
  if (needs_calibration) {
    RngStream rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(replicate),
                              static_cast<std::uint64_t>(StreamPurpose::kActionBounds)));
    calibration = sample_population(spec, 10000, rng, 2 * kUnbiasedIdBase);
  }
  ActionSet aset = ActionSet::defaults_for(spec, needs_calibration ? &calibration : nullptr);
  for (auto& fa : aset.features) fa.step = cfg.action_step;
  for (const auto& [name, fa] : cfg.action_overrides) aset.for_feature(name) = fa;
  return aset;
}

ReplicateTrace run_replicate(const SimulationConfig& cfg, int replicate) {
  cfg.validate_or_throw();
  const DagSpec& spec = cfg.spec();
  const std::uint64_t master = cfg.seed;
  const auto rep = static_cast<std::uint64_t>(replicate);

  ReplicateTrace trace;
  trace.dgp = spec.name;
  trace.policy = cfg.policy.name();
  trace.replicate = replicate;
  trace.master_seed = master;
  trace.periods = cfg.periods;
  trace.n_new = cfg.n_new;
  trace.n_init = cfg.n_init;
  trace.unbiased_n = cfg.unbiased_n;
  trace.rho = cfg.rho;
  trace.alpha = cfg.policy.alpha;
  trace.l2_lambda = cfg.train.l2_lambda;

  // Pre-deployment data: fully labeled sample, then induction.
  RngStream init_rng(derive_seed(master, rep, static_cast<std::uint64_t>(StreamPurpose::kInitPopulation)));
  Population init_pop = sample_population(spec, static_cast<std::size_t>(cfg.n_init), init_rng, 0);
  Dataset data;
  data.feature_names = spec.model_features;
  std::map<std::int64_t, double> init_z;
  for (auto& ind : init_pop.individuals) {
    const int label = observe_label(cfg, spec, replicate, ind);
    data.rows.push_back(make_row(spec, ind, label, 0, RowProvenance::kInitial));
    init_z[ind.id] = ind.z(spec);
  }

  std::optional<InductionSpec> first_model_change;
  if (!cfg.policy.skips_induction()) {
    RngStream induction_rng(derive_seed(master, rep, static_cast<std::uint64_t>(StreamPurpose::kInduction)));
    for (const auto& ind_spec : cfg.induction) {
      switch (ind_spec.kind) {
        case InductionKind::kSelectionBias:
          data = induce_selection_bias(data, init_z);
          break;
        case InductionKind::kLabelNoise:
          data = apply_label_noise(data, ind_spec.flip_table, induction_rng);
          break;
        case InductionKind::kFeatureShift:
          data = apply_feature_shift(data, ind_spec, init_z, induction_rng);
          break;
        case InductionKind::kOperationalChange:
          first_model_change = ind_spec;
          break;
      }
    }
  }
  trace.initial_data = data;

  const ActionSet aset = resolve_action_set(cfg, replicate);

  std::vector<PoolEntry> pool;
  GuaranteeLedger ledger;
  std::set<std::int64_t> ever_collected;
  std::int64_t next_id = cfg.n_init;

  for (int t = 1; t <= cfg.periods; ++t) {
    PeriodTrace pt;
    pt.period = t;

    LinearModel model = fit_logreg(data, cfg.train);
    model.threshold = cfg.rho;
    model.trained_at = t;
    if (t == 1 && first_model_change) model = apply_operational_change(model, *first_model_change);
    pt.model = model;

    RngStream arrival_rng(derive_seed(master, rep, static_cast<std::uint64_t>(t),
                                      static_cast<std::uint64_t>(StreamPurpose::kArrivals)));
    Population arrivals =
        sample_population(spec, static_cast<std::size_t>(cfg.n_new), arrival_rng, next_id);
    next_id += cfg.n_new;

    std::vector<Individual> applicants;
    applicants.reserve(arrivals.individuals.size() + pool.size());
    for (auto& ind : arrivals.individuals) {
      ind.first_period = t;
      applicants.push_back(std::move(ind));
    }
    const std::size_t n_new_count = applicants.size();
    for (auto& entry : pool) applicants.push_back(std::move(entry.ind));
    pool.clear();

    pt.n_new = static_cast<int>(n_new_count);
    pt.n_ret = static_cast<int>(applicants.size() - n_new_count);
    pt.n_eval = static_cast<int>(applicants.size());
    pt.applicants.resize(applicants.size());

    std::vector<std::size_t> denied;
    for (std::size_t i = 0; i < applicants.size(); ++i) {
      Individual& ind = applicants[i];
      ApplicantRecord& rec = pt.applicants[i];
      rec.id = ind.id;
      rec.returning = i >= n_new_count;
      rec.features = ind.model_features(spec);
      rec.z = ind.z(spec);
      rec.phat = model.predict_proba(rec.features);
      rec.model_decision = model.decide(rec.features);
      rec.true_prob = ind.true_prob;
      rec.true_prob_after = ind.true_prob;
      if (ledger.due(ind.id, t)) {
        rec.guaranteed = true;
        ledger.discharge(ind.id, t);
      }
      if (rec.model_decision != 1 && !rec.guaranteed) denied.push_back(i);
    }

    // Randomized exploration over this period's denied set.
    const ExplorationKind explo = cfg.policy.exploration();
    if (explo != ExplorationKind::kNone && !denied.empty()) {
      std::vector<double> phat;
      phat.reserve(denied.size());
      for (std::size_t i : denied) phat.push_back(pt.applicants[i].phat);
      RngStream explore_rng(derive_seed(master, rep, static_cast<std::uint64_t>(t),
                                        static_cast<std::uint64_t>(StreamPurpose::kExplore)));
      for (std::size_t sel : select_exploration(explo, phat, cfg.policy.alpha, explore_rng))
        pt.applicants[denied[sel]].explored = true;
      denied.erase(std::remove_if(denied.begin(), denied.end(),
                                  [&](std::size_t i) { return pt.applicants[i].explored; }),
                   denied.end());
    }

    // Collect labels for everyone approved by any route.
    for (std::size_t i = 0; i < applicants.size(); ++i) {
      ApplicantRecord& rec = pt.applicants[i];
      Individual& ind = applicants[i];
      if (rec.approved()) {
        if (!ever_collected.insert(ind.id).second)
          throw EngineError("individual " + std::to_string(ind.id) +
                            " collected twice (period " + std::to_string(t) + ")");
        const int label = observe_label(cfg, spec, replicate, ind);
        rec.collected = true;
        rec.label_draw = label;
        const RowProvenance prov = rec.guaranteed  ? RowProvenance::kGuaranteed
                                   : rec.explored ? RowProvenance::kExplored
                                                  : RowProvenance::kApproved;
        data.rows.push_back(make_row(spec, ind, label, t, prov));
        ++pt.collected;
      } else {
        rec.label_draw = peek_label(cfg, replicate, ind);
      }
      ind.history.push_back({t, rec.approved() ? 1 : -1, false});
    }

    // Route the remaining denied: recourse (and guarantees) or plain reapply.
    RngStream resample_rng(derive_seed(master, rep, static_cast<std::uint64_t>(t),
                                       static_cast<std::uint64_t>(StreamPurpose::kResample)));
    for (std::size_t i : denied) {
      ApplicantRecord& rec = pt.applicants[i];
      Individual& ind = applicants[i];
      if (cfg.policy.has_recourse()) {
        rec.action_issued = true;
        const auto action = compute_recourse(model, rec.features, aset);
        if (action) {
          rec.action_feasible = true;
          rec.action_cost = action->cost;
          rec.action_deltas = action->deltas;
          ind = enact_action(spec, ind, aset, *action, resample_rng);
          ind.history.back().action_taken = true;
          rec.true_prob_after = ind.true_prob;
        }
        // Approval at t+1 is guaranteed for every applicant denied at t,
        // whether or not a feasible action existed.
        if (cfg.policy.has_guarantee()) ledger.promise(ind.id, t);
      }
      pool.push_back({std::move(ind)});
    }

    pt.n_cum = static_cast<std::int64_t>(data.rows.size());
    trace.period_traces.push_back(std::move(pt));
  }
  return trace;
}

RunResult run_experiment(const SimulationConfig& cfg, int jobs) {
  cfg.validate_or_throw();
  RunResult result;
  result.config = cfg;
  result.replicates.resize(static_cast<std::size_t>(cfg.replicates));
  if (jobs <= 1) {
    for (int r = 0; r < cfg.replicates; ++r)
      result.replicates[static_cast<std::size_t>(r)] = run_replicate(cfg, r);
    return result;
  }
  std::atomic<int> next{0};
  std::vector<std::future<void>> workers;
  const int n_workers = std::min(jobs, cfg.replicates);
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n_workers));
  for (int w = 0; w < n_workers; ++w) {
    workers.push_back(std::async(std::launch::async, [&, w] {
      try {
        for (;;) {
          const int r = next.fetch_add(1);
          if (r >= cfg.replicates) return;
          result.replicates[static_cast<std::size_t>(r)] = run_replicate(cfg, r);
        }
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
      }
    }));
  }
  for (auto& f : workers) f.get();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return result;
}

}  // namespace censorsim

#include "censorsim/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "censorsim/util.hpp"

namespace censorsim {

using nlohmann::json;

namespace {

json model_to_json(const LinearModel& m) {
  return json{{"features", m.feature_names}, {"w", m.weights},   {"b", m.intercept},
              {"rho", m.threshold},          {"at", m.trained_at}, {"deg", m.degenerate}};
}

LinearModel model_from_json(const json& j) {
  LinearModel m;
  m.feature_names = j.at("features").get<std::vector<std::string>>();
  m.weights = j.at("w").get<std::vector<double>>();
  m.intercept = j.at("b").get<double>();
  m.threshold = j.at("rho").get<double>();
  m.trained_at = j.at("at").get<int>();
  m.degenerate = j.at("deg").get<bool>();
  return m;
}

json row_to_json(const DatasetRow& r) {
  return json{r.x, r.label, r.individual_id, r.period_collected, to_string(r.provenance)};
}

DatasetRow row_from_json(const json& j) {
  DatasetRow r;
  r.x = j.at(0).get<std::vector<double>>();
  r.label = j.at(1).get<int>();
  r.individual_id = j.at(2).get<std::int64_t>();
  r.period_collected = j.at(3).get<int>();
  r.provenance = row_provenance_from_string(j.at(4).get<std::string>());
  return r;
}

json applicant_to_json(const ApplicantRecord& a) {
  return json{a.id,        a.returning, a.z,          a.features,     a.phat,
              a.model_decision, a.explored,  a.guaranteed, a.collected,    a.label_draw,
              a.true_prob, a.action_issued, a.action_feasible, a.action_cost,
              a.action_deltas, a.true_prob_after};
}

ApplicantRecord applicant_from_json(const json& j) {
  ApplicantRecord a;
  std::size_t k = 0;
  a.id = j.at(k++).get<std::int64_t>();
  a.returning = j.at(k++).get<bool>();
  a.z = j.at(k++).get<double>();
  a.features = j.at(k++).get<std::vector<double>>();
  a.phat = j.at(k++).get<double>();
  a.model_decision = j.at(k++).get<int>();
  a.explored = j.at(k++).get<bool>();
  a.guaranteed = j.at(k++).get<bool>();
  a.collected = j.at(k++).get<bool>();
  a.label_draw = j.at(k++).get<int>();
  a.true_prob = j.at(k++).get<double>();
  a.action_issued = j.at(k++).get<bool>();
  a.action_feasible = j.at(k++).get<bool>();
  a.action_cost = j.at(k++).get<double>();
  a.action_deltas = j.at(k++).get<std::vector<double>>();
  a.true_prob_after = j.at(k++).get<double>();
  return a;
}

}  // namespace

std::string trace_to_jsonl(const ReplicateTrace& trace) {
  std::ostringstream out;
  json header{{"type", "header"},
              {"dgp", trace.dgp},
              {"policy", trace.policy},
              {"replicate", trace.replicate},
              {"seed", trace.master_seed},
              {"periods", trace.periods},
              {"n_new", trace.n_new},
              {"n_init", trace.n_init},
              {"unbiased_n", trace.unbiased_n},
              {"rho", trace.rho},
              {"alpha", trace.alpha},
              {"l2_lambda", trace.l2_lambda},
              {"features", trace.initial_data.feature_names}};
  json init = json::array();
  for (const auto& r : trace.initial_data.rows) init.push_back(row_to_json(r));
  header["initial"] = init;
  out << header.dump() << "\n";
  for (const auto& pt : trace.period_traces) {
    json apps = json::array();
    for (const auto& a : pt.applicants) apps.push_back(applicant_to_json(a));
    json line{{"type", "period"}, {"t", pt.period},        {"model", model_to_json(pt.model)},
              {"n_new", pt.n_new}, {"n_ret", pt.n_ret},    {"n_eval", pt.n_eval},
              {"collected", pt.collected}, {"n_cum", pt.n_cum}, {"apps", apps}};
    out << line.dump() << "\n";
  }
  return out.str();
}

ReplicateTrace trace_from_jsonl(const std::string& text) {
  ReplicateTrace trace;
  std::istringstream in(text);
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    const std::string type = j.at("type").get<std::string>();
    if (type == "header") {
      trace.dgp = j.at("dgp").get<std::string>();
      trace.policy = j.at("policy").get<std::string>();
      trace.replicate = j.at("replicate").get<int>();
      trace.master_seed = j.at("seed").get<std::uint64_t>();
      trace.periods = j.at("periods").get<int>();
      trace.n_new = j.at("n_new").get<int>();
      trace.n_init = j.at("n_init").get<int>();
      trace.unbiased_n = j.at("unbiased_n").get<std::size_t>();
      trace.rho = j.at("rho").get<double>();
      trace.alpha = j.at("alpha").get<double>();
      trace.l2_lambda = j.at("l2_lambda").get<double>();
      trace.initial_data.feature_names = j.at("features").get<std::vector<std::string>>();
      for (const auto& r : j.at("initial")) trace.initial_data.rows.push_back(row_from_json(r));
      have_header = true;
    } else if (type == "period") {
      PeriodTrace pt;
      pt.period = j.at("t").get<int>();
      pt.model = model_from_json(j.at("model"));
      pt.n_new = j.at("n_new").get<int>();
      pt.n_ret = j.at("n_ret").get<int>();
      pt.n_eval = j.at("n_eval").get<int>();
      pt.collected = j.at("collected").get<int>();
      pt.n_cum = j.at("n_cum").get<std::int64_t>();
      for (const auto& a : j.at("apps")) pt.applicants.push_back(applicant_from_json(a));
      trace.period_traces.push_back(std::move(pt));
    } else {
      throw IoError("unknown trace record type '" + type + "'");
    }
  }
  if (!have_header) throw IoError("trace has no header line");
  return trace;
}

std::filesystem::path trace_path(const std::filesystem::path& out_dir,
                                 const std::string& cell, int replicate) {
  char name[32];
  std::snprintf(name, sizeof(name), "rep%03d.jsonl", replicate);
  return out_dir / cell / name;
}

namespace {

SimulationConfig config_for_trace(const ExperimentMatrix& matrix, const std::string& cell) {
  for (const auto& c : matrix.cells)
    if (c.cell_name() == cell) return c;
  throw IoError("manifest lists no cell named '" + cell + "'");
}

std::optional<GainLossBaseline> baseline_for(
    const std::map<std::string, std::vector<ReplicateMetrics>>& by_cell,
    const std::string& dgp, const std::string& tag) {
  // The designated baseline is the Censoring cell of the same DGP (same tag).
  std::string key = dgp + "__Censoring";
  if (!tag.empty()) key += "__" + tag;
  auto it = by_cell.find(key);
  if (it == by_cell.end()) {
    it = by_cell.find(dgp + "__Censoring");
    if (it == by_cell.end()) return std::nullopt;
  }
  return gain_loss_baseline(it->second);
}

}  // namespace

std::vector<MetricReport> run_matrix(const ExperimentMatrix& matrix, int jobs,
                                     const std::filesystem::path& out_dir) {
  const auto problems = validate_matrix(matrix);
  if (!problems.empty()) {
    std::string msg = "invalid matrix:";
    for (const auto& p : problems) msg += "\n  - " + p;
    throw ConfigError(msg);
  }
  std::filesystem::create_directories(out_dir);

  json manifest;
  manifest["tool"] = "censorsim";
  manifest["version"] = "0.1.0";
  json files = json::array();
  json cells = json::array();

  std::map<std::string, std::vector<ReplicateMetrics>> metrics_by_cell;
  std::map<std::string, SimulationConfig> config_by_cell;
  std::vector<std::string> cell_order;

  for (const auto& cfg : matrix.cells) {
    const std::string cell = cfg.cell_name();
    cell_order.push_back(cell);
    config_by_cell.emplace(cell, cfg);
    const std::filesystem::path cell_dir = out_dir / cell;
    if (std::filesystem::exists(cell_dir) && !matrix.overwrite)
      throw IoError("output directory " + cell_dir.string() +
                    " already exists (set overwrite or use a fresh --out)");
    RunResult result = run_experiment(cfg, jobs);
    std::vector<ReplicateMetrics> per_rep;
    std::ostringstream models;
    for (const auto& trace : result.replicates) {
      const Population unbiased = unbiased_sample(cfg, trace.replicate);
      per_rep.push_back(
          compute_replicate_metrics(trace, cfg, matrix.uncertainty, &unbiased));
      const auto path = trace_path(out_dir, cell, trace.replicate);
      write_file(path, trace_to_jsonl(trace));
      files.push_back({{"path", std::filesystem::relative(path, out_dir).string()},
                       {"sha256", sha256_file_hex(path)}});
      models << "# replicate " << trace.replicate << "\n";
      for (const auto& pt : trace.period_traces)
        models << "## period " << pt.period << "\n" << model_to_text(pt.model);
    }
    const auto model_path = cell_dir / "models.txt";
    write_file(model_path, models.str());
    files.push_back({{"path", std::filesystem::relative(model_path, out_dir).string()},
                     {"sha256", sha256_file_hex(model_path)}});
    metrics_by_cell.emplace(cell, std::move(per_rep));
    cells.push_back({{"cell", cell}, {"config", sim_config_to_json(cfg)}});
  }

  std::vector<MetricReport> reports;
  for (const auto& cell : cell_order) {
    const SimulationConfig& cfg = config_by_cell.at(cell);
    reports.push_back(aggregate_metrics(
        cfg.spec().name, cfg.policy.name(), cell, metrics_by_cell.at(cell),
        baseline_for(metrics_by_cell, cfg.spec().name, cfg.cell_tag)));
  }

  write_file(out_dir / "metrics.csv", metrics_long_csv(reports));
  write_file(out_dir / "summary_table.csv", metrics_summary_csv(reports));
  write_file(out_dir / "report.json", metrics_report_json(reports).dump(2) + "\n");
  for (const char* f : {"metrics.csv", "summary_table.csv", "report.json"})
    files.push_back({{"path", f}, {"sha256", sha256_file_hex(out_dir / f)}});

  manifest["cells"] = cells;
  manifest["files"] = files;
  manifest["uncertainty"] = {{"enabled", matrix.uncertainty.enabled},
                             {"bins", matrix.uncertainty.bins},
                             {"trials", matrix.uncertainty.trials},
                             {"group_fracs", matrix.uncertainty.group_fracs},
                             {"split_refit", matrix.uncertainty.split_refit}};
  write_file(out_dir / "manifest.json", manifest.dump(2) + "\n");
  return reports;
}

namespace {

ExperimentMatrix matrix_from_manifest(const std::filesystem::path& out_dir) {
  const json manifest = json::parse(read_file(out_dir / "manifest.json"));
  ExperimentMatrix m;
  m.output_dir = out_dir;
  if (manifest.contains("uncertainty")) {
    const auto& u = manifest.at("uncertainty");
    m.uncertainty.enabled = u.value("enabled", false);
    m.uncertainty.bins = u.value("bins", 20);
    m.uncertainty.trials = u.value("trials", 200);
    if (u.contains("group_fracs"))
      m.uncertainty.group_fracs = u.at("group_fracs").get<std::vector<double>>();
    m.uncertainty.split_refit = u.value("split_refit", false);
  }
  for (const auto& c : manifest.at("cells")) {
    SimulationConfig cfg = sim_config_from_json(c.at("config"));
    m.cells.push_back(std::move(cfg));
  }
  return m;
}

}  // namespace

std::vector<MetricReport> metrics_from_traces(const std::filesystem::path& out_dir) {
  const ExperimentMatrix matrix = matrix_from_manifest(out_dir);
  std::map<std::string, std::vector<ReplicateMetrics>> metrics_by_cell;
  std::vector<MetricReport> reports;
  for (const auto& cfg : matrix.cells) {
    const std::string cell = cfg.cell_name();
    std::vector<ReplicateMetrics> per_rep;
    for (int r = 0; r < cfg.replicates; ++r) {
      const auto path = trace_path(out_dir, cell, r);
      if (!std::filesystem::exists(path))
        throw IoError("missing trace " + path.string());
      const ReplicateTrace trace = trace_from_jsonl(read_file(path));
      per_rep.push_back(compute_replicate_metrics(trace, cfg, matrix.uncertainty));
    }
    metrics_by_cell.emplace(cell, std::move(per_rep));
  }
  for (const auto& cfg : matrix.cells) {
    const std::string cell = cfg.cell_name();
    reports.push_back(aggregate_metrics(
        cfg.spec().name, cfg.policy.name(), cell, metrics_by_cell.at(cell),
        baseline_for(metrics_by_cell, cfg.spec().name, cfg.cell_tag)));
  }
  return reports;
}

namespace {

std::string fmt(double v) {
  if (std::isnan(v)) return "";
  std::ostringstream s;
  s.precision(12);
  s << v;
  return s.str();
}

}  // namespace

std::string metrics_long_csv(const std::vector<MetricReport>& reports) {
  std::ostringstream out;
  out << "dgp,policy,cell,replicate,metric,value\n";
  auto emit = [&](const MetricReport& r, const std::string& rep, const std::string& metric,
                  double value) {
    out << r.dgp << ',' << r.policy << ',' << r.cell << ',' << rep << ',' << metric << ','
        << fmt(value) << "\n";
  };
  for (const auto& r : reports) {
    for (std::size_t i = 0; i < r.per_replicate.size(); ++i) {
      const auto& m = r.per_replicate[i];
      const std::string rep = std::to_string(i);
      auto opt = [&](const char* name, const std::optional<double>& v) {
        if (v) emit(r, rep, name, *v);
        else out << r.dgp << ',' << r.policy << ',' << r.cell << ',' << rep << ',' << name
                 << ",\n";
      };
      opt("observed_auc", m.observed_auc);
      opt("true_auc", m.true_auc);
      emit(r, rep, "gain_count", static_cast<double>(m.gain_count));
      emit(r, rep, "loss_count", static_cast<double>(m.loss_count));
      opt("approved_pct", m.approved_pct);
      opt("approved_pct_z1", m.approved_pct_z1);
      opt("expected_reapplications", m.expected_reapplications);
      emit(r, rep, "never_approved", static_cast<double>(m.never_approved));
      opt("net_improvement", m.net_improvement);
      opt("net_improvement_pred", m.net_improvement_pred);
      opt("invalid_recourse_pct", m.invalid_recourse_pct);
      opt("miscalibration_area_observed", m.miscalibration_area_observed);
      opt("miscalibration_area_true", m.miscalibration_area_true);
      opt("sharpness_observed", m.sharpness_observed);
      opt("sharpness_true", m.sharpness_true);
      for (const auto& p : m.adversarial_observed)
        emit(r, rep, "adversarial_observed@" + fmt(p.group_frac), p.max_rmsce);
      for (const auto& p : m.adversarial_true)
        emit(r, rep, "adversarial_true@" + fmt(p.group_frac), p.max_rmsce);
    }
    auto agg = [&](const char* name, const Aggregate& a) {
      emit(r, "mean", name, a.mean);
      emit(r, "std", name, a.stddev);
    };
    agg("observed_auc", r.observed_auc);
    agg("true_auc", r.true_auc);
    agg("gain", r.gain);
    agg("loss", r.loss);
    agg("approved_pct", r.approved_pct);
    agg("approved_pct_z1", r.approved_pct_z1);
    agg("expected_reapplications", r.expected_reapplications);
    agg("never_approved", r.never_approved);
    agg("net_improvement", r.net_improvement);
    agg("net_improvement_pred", r.net_improvement_pred);
    agg("invalid_recourse_pct", r.invalid_recourse_pct);
    agg("miscalibration_area_observed", r.miscalibration_area_observed);
    agg("miscalibration_area_true", r.miscalibration_area_true);
    agg("sharpness_observed", r.sharpness_observed);
    agg("sharpness_true", r.sharpness_true);
  }
  return out.str();
}

std::string metrics_summary_csv(const std::vector<MetricReport>& reports) {
  // Blocks per DGP: metric rows, policy columns.
  std::vector<std::string> dgps;
  std::vector<std::string> policies;
  for (const auto& r : reports) {
    if (std::find(dgps.begin(), dgps.end(), r.dgp) == dgps.end()) dgps.push_back(r.dgp);
    if (std::find(policies.begin(), policies.end(), r.policy) == policies.end())
      policies.push_back(r.policy);
  }
  std::map<std::pair<std::string, std::string>, const MetricReport*> lookup;
  for (const auto& r : reports) lookup[{r.dgp, r.policy}] = &r;

  const std::vector<std::pair<std::string, Aggregate MetricReport::*>> rows = {
      {"observed_auc", &MetricReport::observed_auc},
      {"true_auc", &MetricReport::true_auc},
      {"gain", &MetricReport::gain},
      {"loss", &MetricReport::loss},
      {"approved_pct", &MetricReport::approved_pct},
      {"approved_pct_z1", &MetricReport::approved_pct_z1},
      {"expected_reapplications", &MetricReport::expected_reapplications},
      {"never_approved", &MetricReport::never_approved},
      {"net_improvement", &MetricReport::net_improvement},
      {"invalid_recourse_pct", &MetricReport::invalid_recourse_pct},
  };

  std::ostringstream out;
  out << "dgp,metric";
  for (const auto& p : policies) out << ',' << p;
  out << "\n";
  for (const auto& dgp : dgps) {
    for (const auto& [metric, field] : rows) {
      out << dgp << ',' << metric;
      for (const auto& p : policies) {
        out << ',';
        auto it = lookup.find({dgp, p});
        if (it != lookup.end()) out << fmt((it->second->*field).mean);
      }
      out << "\n";
    }
  }
  return out.str();
}

json metrics_report_json(const std::vector<MetricReport>& reports) {
  json out = json::array();
  auto agg = [](const Aggregate& a) {
    json j;
    j["mean"] = std::isnan(a.mean) ? json() : json(a.mean);
    j["std"] = std::isnan(a.stddev) ? json() : json(a.stddev);
    j["n"] = a.n;
    return j;
  };
  for (const auto& r : reports) {
    json j{{"dgp", r.dgp},
           {"policy", r.policy},
           {"cell", r.cell},
           {"gain_loss_normalized", r.gain_loss_normalized},
           {"observed_auc", agg(r.observed_auc)},
           {"true_auc", agg(r.true_auc)},
           {"gain", agg(r.gain)},
           {"loss", agg(r.loss)},
           {"approved_pct", agg(r.approved_pct)},
           {"approved_pct_z1", agg(r.approved_pct_z1)},
           {"expected_reapplications", agg(r.expected_reapplications)},
           {"never_approved", agg(r.never_approved)},
           {"net_improvement", agg(r.net_improvement)},
           {"net_improvement_pred", agg(r.net_improvement_pred)},
           {"invalid_recourse_pct", agg(r.invalid_recourse_pct)},
           {"miscalibration_area_observed", agg(r.miscalibration_area_observed)},
           {"miscalibration_area_true", agg(r.miscalibration_area_true)},
           {"sharpness_observed", agg(r.sharpness_observed)},
           {"sharpness_true", agg(r.sharpness_true)}};
    out.push_back(std::move(j));
  }
  return out;
}

namespace {

struct FigureSpec {
  const char* id;
  std::vector<std::string> required_cells;  // cell directory names
};

const std::vector<FigureSpec>& figure_specs() {
  static const std::vector<FigureSpec> specs = {
      {"exploration_poc",
       {"causal__NoCensoring", "causal__Censoring", "causal__Random"}},
      {"unrepresentative_training", {"causal__NoCensoring", "causal__Censoring"}},
      {"infeasible_recourse",
       {"causal__Rec__feasible", "causal__Rec__infeasible"}},
  };
  return specs;
}

// Per-period series for one cell averaged over its replicates.
void emit_cell_series(std::ostringstream& out, const std::string& figure,
                      const std::filesystem::path& out_dir, const std::string& cell,
                      bool with_coefficients) {
  std::vector<ReplicateTrace> traces;
  for (int r = 0;; ++r) {
    const auto path = trace_path(out_dir, cell, r);
    if (!std::filesystem::exists(path)) break;
    traces.push_back(trace_from_jsonl(read_file(path)));
  }
  if (traces.empty())
    throw IoError("figure needs traces for cell '" + cell +
                  "' under " + out_dir.string() + "; run the matching config first");
  const int periods = traces.front().periods;
  for (int t = 1; t <= periods; ++t) {
    double appr = 0, appr_z1 = 0, appr_z1y1 = 0;
    int n_appr = 0, n_z1 = 0, n_z1y1 = 0;
    std::map<std::string, double> coef_sum;
    double intercept_sum = 0;
    for (const auto& trace : traces) {
      const PeriodTrace& pt = trace.period_traces[static_cast<std::size_t>(t - 1)];
      std::int64_t all = 0, all_a = 0, z1 = 0, z1_a = 0, z1y1 = 0, z1y1_a = 0;
      for (const auto& rec : pt.applicants) {
        ++all;
        if (rec.approved()) ++all_a;
        if (rec.z == 1.0) {
          ++z1;
          if (rec.approved()) ++z1_a;
          if (rec.label_draw == 1) {
            ++z1y1;
            if (rec.approved()) ++z1y1_a;
          }
        }
      }
      if (all > 0) { appr += 100.0 * all_a / all; ++n_appr; }
      if (z1 > 0) { appr_z1 += 100.0 * z1_a / z1; ++n_z1; }
      if (z1y1 > 0) { appr_z1y1 += 100.0 * z1y1_a / z1y1; ++n_z1y1; }
      for (std::size_t f = 0; f < pt.model.feature_names.size(); ++f)
        coef_sum[pt.model.feature_names[f]] += pt.model.weights[f];
      intercept_sum += pt.model.intercept;
    }
    auto row = [&](const std::string& series, double value) {
      out << figure << ',' << cell << ',' << series << ',' << t << ',' << fmt(value) << "\n";
    };
    if (n_appr) row("approval_pct", appr / n_appr);
    if (n_z1) row("approval_pct_z1", appr_z1 / n_z1);
    if (n_z1y1) row("approval_pct_z1y1", appr_z1y1 / n_z1y1);
    if (with_coefficients) {
      for (const auto& [name, sum] : coef_sum)
        row("coef_" + name, sum / static_cast<double>(traces.size()));
      row("intercept", intercept_sum / static_cast<double>(traces.size()));
    }
  }
}

}  // namespace

std::vector<std::string> figure_catalog() {
  std::vector<std::string> out;
  for (const auto& f : figure_specs()) out.push_back(f.id);
  return out;
}

std::string emit_figure_data(const std::filesystem::path& out_dir,
                             const std::string& figure_id) {
  const FigureSpec* spec = nullptr;
  for (const auto& f : figure_specs())
    if (figure_id == f.id) spec = &f;
  if (spec == nullptr) {
    std::string msg = "unknown figure id '" + figure_id + "'; catalog:";
    for (const auto& f : figure_specs()) msg += std::string(" ") + f.id;
    throw IoError(msg);
  }
  std::ostringstream out;
  out << "figure,cell,series,period,value\n";
  const bool coefs = figure_id == "infeasible_recourse";
  for (const auto& cell : spec->required_cells)
    emit_cell_series(out, figure_id, out_dir, cell, coefs);
  return out.str();
}

}  // namespace censorsim

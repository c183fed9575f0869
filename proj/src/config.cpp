#include "censorsim/config.hpp"

#include <set>

#include "censorsim/util.hpp"

namespace censorsim {

using nlohmann::json;

namespace {

json induction_to_json(const InductionSpec& ind) {
  json j;
  switch (ind.kind) {
    case InductionKind::kSelectionBias:
      j["kind"] = "selection_bias";
      break;
    case InductionKind::kLabelNoise: {
      j["kind"] = "label_noise";
      j["feature"] = ind.flip_table.feature;
      json cells = json::array();
      for (const auto& c : ind.flip_table.cells)
        cells.push_back({c.x, c.z, c.label, c.p_flip});
      j["cells"] = cells;
      break;
    }
    case InductionKind::kOperationalChange:
      j["kind"] = "operational_change";
      if (ind.delta_rho) j["delta_rho"] = *ind.delta_rho;
      else j["delta_b"] = ind.delta_intercept;
      break;
    case InductionKind::kFeatureShift:
      j["kind"] = "feature_shift";
      j["node"] = ind.shift_node;
      j["mean"] = ind.shift_mean;
      j["std"] = ind.shift_std;
      if (ind.restrict_to_z) j["restrict_z"] = *ind.restrict_to_z;
      break;
  }
  return j;
}

InductionSpec induction_from_json(const json& j) {
  InductionSpec ind;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "selection_bias") {
    ind.kind = InductionKind::kSelectionBias;
  } else if (kind == "label_noise") {
    ind.kind = InductionKind::kLabelNoise;
    ind.flip_table.feature = j.at("feature").get<std::string>();
    for (const auto& c : j.at("cells")) {
      FlipCell cell;
      cell.x = c.at(0).get<double>();
      cell.z = c.at(1).get<double>();
      cell.label = c.at(2).get<int>();
      cell.p_flip = c.at(3).get<double>();
      if (cell.p_flip < 0.0 || cell.p_flip > 1.0)
        throw ConfigError("flip probability must lie in [0,1]");
      ind.flip_table.cells.push_back(cell);
    }
  } else if (kind == "operational_change") {
    ind.kind = InductionKind::kOperationalChange;
    if (j.contains("delta_rho")) ind.delta_rho = j.at("delta_rho").get<double>();
    else ind.delta_intercept = j.at("delta_b").get<double>();
  } else if (kind == "feature_shift") {
    ind.kind = InductionKind::kFeatureShift;
    ind.shift_node = j.at("node").get<std::string>();
    ind.shift_mean = j.at("mean").get<double>();
    ind.shift_std = j.at("std").get<double>();
    if (j.contains("restrict_z")) ind.restrict_to_z = j.at("restrict_z").get<double>();
  } else {
    throw ConfigError("unknown induction kind '" + kind + "'");
  }
  return ind;
}

ActionDirection direction_from_string(const std::string& s) {
  if (s == "both") return ActionDirection::kBoth;
  if (s == "increase") return ActionDirection::kIncreaseOnly;
  if (s == "decrease") return ActionDirection::kDecreaseOnly;
  throw ConfigError("unknown action direction '" + s + "' (both/increase/decrease)");
}

std::string direction_to_string(ActionDirection d) {
  switch (d) {
    case ActionDirection::kBoth: return "both";
    case ActionDirection::kIncreaseOnly: return "increase";
    case ActionDirection::kDecreaseOnly: return "decrease";
  }
  return "both";
}

}  // namespace

json sim_config_to_json(const SimulationConfig& cfg) {
  json j;
  j["dgp"] = cfg.dgp_name;
  j["policy"] = cfg.policy.name();
  j["alpha"] = cfg.policy.alpha;
  j["periods"] = cfg.periods;
  j["n_new"] = cfg.n_new;
  j["n_init"] = cfg.n_init;
  j["rho"] = cfg.rho;
  j["replicates"] = cfg.replicates;
  j["seed"] = cfg.seed;
  j["unbiased_n"] = cfg.unbiased_n;
  j["train"] = {{"l2_lambda", cfg.train.l2_lambda},
                {"max_iter", cfg.train.max_iter},
                {"tol", cfg.train.tol}};
  j["action_step"] = cfg.action_step;
  if (!cfg.cell_tag.empty()) j["tag"] = cfg.cell_tag;
  json ind = json::array();
  for (const auto& i : cfg.induction) ind.push_back(induction_to_json(i));
  j["induction"] = ind;
  if (!cfg.action_overrides.empty()) {
    json ao = json::array();
    for (const auto& [name, fa] : cfg.action_overrides) {
      ao.push_back({{"feature", name},
                    {"actionable", fa.actionable},
                    {"direction", direction_to_string(fa.direction)},
                    {"lo", fa.lo},
                    {"hi", fa.hi},
                    {"step", fa.step},
                    {"cost_weight", fa.cost_weight}});
    }
    j["action_overrides"] = ao;
  }
  return j;
}

SimulationConfig sim_config_from_json(const json& j, const SimulationConfig& defaults) {
  SimulationConfig cfg = defaults;
  if (j.contains("dgp")) {
    if (j.at("dgp").is_object()) {
      cfg.inline_dgp = dgp_from_json_text(j.at("dgp").dump());
      cfg.dgp_name = cfg.inline_dgp->name;
    } else {
      cfg.dgp_name = j.at("dgp").get<std::string>();
      cfg.inline_dgp.reset();
    }
  }
  double alpha = cfg.policy.alpha;
  if (j.contains("alpha")) alpha = j.at("alpha").get<double>();
  if (j.contains("policy")) cfg.policy = PolicySpec::parse(j.at("policy").get<std::string>(), alpha);
  else cfg.policy.alpha = alpha;
  if (j.contains("periods")) cfg.periods = j.at("periods").get<int>();
  if (j.contains("n_new")) cfg.n_new = j.at("n_new").get<int>();
  if (j.contains("n_init")) cfg.n_init = j.at("n_init").get<int>();
  if (j.contains("rho")) cfg.rho = j.at("rho").get<double>();
  if (j.contains("replicates")) cfg.replicates = j.at("replicates").get<int>();
  if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("unbiased_n")) cfg.unbiased_n = j.at("unbiased_n").get<std::size_t>();
  if (j.contains("train")) {
    const auto& t = j.at("train");
    if (t.contains("l2_lambda")) cfg.train.l2_lambda = t.at("l2_lambda").get<double>();
    if (t.contains("max_iter")) cfg.train.max_iter = t.at("max_iter").get<int>();
    if (t.contains("tol")) cfg.train.tol = t.at("tol").get<double>();
  }
  if (j.contains("action_step")) cfg.action_step = j.at("action_step").get<double>();
  if (j.contains("tag")) cfg.cell_tag = j.at("tag").get<std::string>();
  if (j.contains("induction")) {
    cfg.induction.clear();
    for (const auto& i : j.at("induction")) cfg.induction.push_back(induction_from_json(i));
  }
  if (j.contains("action_overrides")) {
    cfg.action_overrides.clear();
    for (const auto& ao : j.at("action_overrides")) {
      FeatureActionSpec fa;
      fa.actionable = ao.value("actionable", true);
      fa.direction = direction_from_string(ao.value("direction", std::string("both")));
      fa.lo = ao.at("lo").get<double>();
      fa.hi = ao.at("hi").get<double>();
      fa.step = ao.value("step", cfg.action_step);
      fa.cost_weight = ao.value("cost_weight", 1.0);
      cfg.action_overrides.emplace_back(ao.at("feature").get<std::string>(), fa);
    }
  }
  return cfg;
}

namespace {

// Later keys win; objects merge recursively.
json merge(json base, const json& over) {
  if (!base.is_object() || !over.is_object()) return over;
  for (auto it = over.begin(); it != over.end(); ++it) {
    if (base.contains(it.key())) base[it.key()] = merge(base[it.key()], it.value());
    else base[it.key()] = it.value();
  }
  return base;
}

}  // namespace

namespace {

// Resolves `include` chains; local keys override included ones.
json resolve_includes(json j, const std::filesystem::path& base_dir, int depth = 0) {
  if (!j.contains("include")) return j;
  if (depth > 8) throw ConfigError("include chain too deep (cycle?)");
  const std::filesystem::path inc = base_dir / j.at("include").get<std::string>();
  json parent = json::parse(read_file(inc), nullptr, true, true);
  parent = resolve_includes(std::move(parent),
                            inc.has_parent_path() ? inc.parent_path()
                                                  : std::filesystem::path("."),
                            depth + 1);
  j.erase("include");
  return merge(std::move(parent), j);
}

}  // namespace

ExperimentMatrix matrix_from_json(const json& j_in, const std::filesystem::path& base_dir) {
  const json j = resolve_includes(j_in, base_dir);

  ExperimentMatrix m;
  if (j.contains("output_dir")) m.output_dir = j.at("output_dir").get<std::string>();
  m.overwrite = j.value("overwrite", false);
  if (j.contains("uncertainty")) {
    const auto& u = j.at("uncertainty");
    m.uncertainty.enabled = u.value("enabled", true);
    m.uncertainty.bins = u.value("bins", 20);
    m.uncertainty.trials = u.value("trials", 200);
    if (u.contains("group_fracs"))
      m.uncertainty.group_fracs = u.at("group_fracs").get<std::vector<double>>();
    m.uncertainty.split_refit = u.value("split_refit", false);
  }

  SimulationConfig defaults;
  if (j.contains("defaults")) defaults = sim_config_from_json(j.at("defaults"), defaults);

  // Custom DGP definitions usable by name in the axes.
  std::map<std::string, DagSpec> custom;
  if (j.contains("dgp_definitions"))
    for (const auto& d : j.at("dgp_definitions")) {
      DagSpec spec = dgp_from_json_text(d.dump());
      custom.emplace(spec.name, std::move(spec));
    }
  auto resolve_dgp = [&](SimulationConfig& cfg) {
    auto it = custom.find(cfg.dgp_name);
    if (it != custom.end()) cfg.inline_dgp = it->second;
  };

  std::set<std::string> names;
  auto add_cell = [&](SimulationConfig cfg) {
    resolve_dgp(cfg);
    if (!names.insert(cfg.cell_name()).second)
      throw ConfigError("duplicate cell '" + cfg.cell_name() +
                        "' (use tags to disambiguate config variants)");
    m.cells.push_back(std::move(cfg));
  };

  if (j.contains("dgps") || j.contains("policies")) {
    const auto dgps = j.contains("dgps") ? j.at("dgps").get<std::vector<std::string>>()
                                         : std::vector<std::string>{defaults.dgp_name};
    const auto policies = j.contains("policies")
                              ? j.at("policies").get<std::vector<std::string>>()
                              : std::vector<std::string>{defaults.policy.name()};
    for (const auto& dgp : dgps) {
      for (const auto& pol : policies) {
        SimulationConfig cfg = defaults;
        cfg.dgp_name = dgp;
        cfg.inline_dgp.reset();
        cfg.policy = PolicySpec::parse(pol, defaults.policy.alpha);
        add_cell(std::move(cfg));
      }
    }
  }
  if (j.contains("cells")) {
    for (const auto& c : j.at("cells")) {
      SimulationConfig cfg = sim_config_from_json(c, defaults);
      if (c.contains("overrides")) cfg = sim_config_from_json(c.at("overrides"), cfg);
      add_cell(std::move(cfg));
    }
  }
  return m;
}

ExperimentMatrix load_matrix(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_file(path), nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError("cannot parse " + path.string() + ": " + e.what());
  }
  ExperimentMatrix m = matrix_from_json(j, path.parent_path().empty()
                                               ? std::filesystem::path(".")
                                               : path.parent_path());
  const auto problems = validate_matrix(m);
  if (!problems.empty()) {
    std::string msg = "invalid config " + path.string() + ":";
    for (const auto& p : problems) msg += "\n  - " + p;
    throw ConfigError(msg);
  }
  return m;
}

std::vector<std::string> validate_matrix(const ExperimentMatrix& matrix) {
  std::vector<std::string> problems;
  for (const auto& cell : matrix.cells)
    for (const auto& p : cell.validate())
      problems.push_back("[" + cell.cell_name() + "] " + p);
  return problems;
}

}  // namespace censorsim

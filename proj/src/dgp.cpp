#include "censorsim/dgp.hpp"

#include <algorithm>
#include <limits>
#include <cmath>
#include <set>
#include <sstream>

#include "json.hpp"

namespace censorsim {

namespace {

// Looks up node values while sampling. `visible` caps which nodes may be
// read so that an out-of-order spec fails loudly instead of reading junk.
class NodeContext final : public EvalContext {
 public:
  NodeContext(const DagSpec& spec, const std::vector<double>& values, int visible = -1)
      : spec_(spec), values_(values), visible_(visible) {}

  void bind_raw(const double* raw) { raw_ = raw; }

  double lookup(const std::string& name) const override {
    if (raw_ != nullptr && name == "v") return *raw_;
    const int idx = spec_.index_of(name);
    if (idx < 0) throw DgpError("unknown node '" + name + "' in expression for DGP '" + spec_.name + "'");
    if (visible_ >= 0 && idx >= visible_)
      throw DgpError("node '" + name + "' read before it was sampled (DGP '" + spec_.name + "')");
    const double v = values_[idx];
    if (std::isnan(v)) throw DgpError("missing value for node '" + name + "'");
    return v;
  }

 private:
  const DagSpec& spec_;
  const std::vector<double>& values_;
  int visible_;
  const double* raw_ = nullptr;
};

double check_prob(double p, const std::string& node) {
  if (!(p >= 0.0 && p <= 1.0))
    throw DgpError("probability for node '" + node + "' evaluated to " + std::to_string(p));
  return p;
}

}  // namespace

void DagSpec::finalize() {
  index_.clear();
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (!index_.emplace(nodes[i].name, static_cast<int>(i)).second)
      throw DgpError("duplicate node '" + nodes[i].name + "' in DGP '" + name + "'");
  }
  parents_idx_.assign(nodes.size(), {});
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    NodeSpec& n = nodes[i];
    if (n.kind == NodeKind::kCopy) {
      if (index_.count(n.source) == 0)
        throw DgpError("copy node '" + n.name + "' references unknown source '" + n.source + "'");
      n.parents = {n.source};
    } else {
      n.parents.clear();
      if (!n.expr.empty())
        for (const auto& v : n.expr.variables()) n.parents.push_back(v);
      if (n.post)
        for (const auto& v : n.post->variables())
          if (v != "v" && std::find(n.parents.begin(), n.parents.end(), v) == n.parents.end())
            n.parents.push_back(v);
    }
    for (const auto& p : n.parents) {
      auto it = index_.find(p);
      if (it == index_.end())
        throw DgpError("node '" + n.name + "' depends on unknown node '" + p + "'");
      if (it->second >= static_cast<int>(i))
        throw DgpError("node '" + n.name + "' depends on '" + p +
                       "', which does not precede it (DGP '" + name + "' must be topologically ordered)");
      parents_idx_[i].push_back(it->second);
    }
    if (n.truncation && !(n.truncation->lo <= n.truncation->hi))
      throw DgpError("empty truncation interval on node '" + n.name + "'");
  }
  auto must_find = [&](const std::string& n, const char* what) {
    auto it = index_.find(n);
    if (it == index_.end())
      throw DgpError(std::string(what) + " node '" + n + "' not found in DGP '" + name + "'");
    return it->second;
  };
  outcome_idx_ = must_find(outcome_node, "outcome");
  censor_idx_ = must_find(censor_node, "censor");
  const NodeKind ok = nodes[outcome_idx_].kind;
  if (ok != NodeKind::kBernoulli && ok != NodeKind::kSigmoidBernoulli)
    throw DgpError("outcome node '" + outcome_node + "' must be bernoulli or sigmoid_bernoulli");
  model_idx_.clear();
  for (const auto& f : model_features) {
    if (f == outcome_node)
      throw DgpError("outcome node cannot be a model feature (DGP '" + name + "')");
    model_idx_.push_back(must_find(f, "model feature"));
  }
  for (const auto& l : latent_nodes) must_find(l, "latent");
  outcome_has_children_ = false;
  for (std::size_t i = 0; i < nodes.size(); ++i)
    for (int p : parents_idx_[i])
      if (p == outcome_idx_) outcome_has_children_ = true;
}

int DagSpec::index_of(const std::string& node) const {
  auto it = index_.find(node);
  return it == index_.end() ? -1 : it->second;
}

std::vector<int> DagSpec::descendants_of(const std::vector<int>& sources) const {
  std::vector<bool> reach(nodes.size(), false);
  for (int s : sources) reach[static_cast<std::size_t>(s)] = true;
  std::vector<int> out;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (reach[i]) continue;
    for (int p : parents_idx_[i]) {
      if (reach[static_cast<std::size_t>(p)]) {
        reach[i] = true;
        out.push_back(static_cast<int>(i));
        break;
      }
    }
  }
  return out;
}

double Individual::value(const DagSpec& spec, const std::string& node) const {
  const int idx = spec.index_of(node);
  if (idx < 0) throw DgpError("unknown node '" + node + "'");
  return values[static_cast<std::size_t>(idx)];
}

std::vector<double> Individual::model_features(const DagSpec& spec) const {
  std::vector<double> out;
  out.reserve(spec.model_feature_indices().size());
  for (int idx : spec.model_feature_indices()) out.push_back(values[static_cast<std::size_t>(idx)]);
  return out;
}

namespace {

double sample_node(const DagSpec& spec, const NodeSpec& n, int node_idx,
                   std::vector<double>& values, RngStream& rng, bool ordered_guard) {
  NodeContext ctx(spec, values, ordered_guard ? node_idx : -1);
  auto draw_once = [&]() -> double {
    switch (n.kind) {
      case NodeKind::kNormal:
        return rng.normal(n.expr.eval(ctx), n.sd);
      case NodeKind::kBernoulli:
        return rng.bernoulli(check_prob(n.expr.eval(ctx), n.name)) ? 1.0 : 0.0;
      case NodeKind::kGamma:
        return n.offset + rng.gamma(n.shape, n.scale);
      case NodeKind::kCopy:
        return values[static_cast<std::size_t>(spec.index_of(n.source))];
      case NodeKind::kSigmoidBernoulli:
        return rng.bernoulli(sigmoid(n.expr.eval(ctx))) ? 1.0 : 0.0;
      case NodeKind::kDeterministic:
        return n.expr.eval(ctx);
    }
    throw DgpError("corrupt node kind");
  };
  double v = draw_once();
  if (n.truncation) {
    int tries = 1;
    while (v < n.truncation->lo || v > n.truncation->hi) {
      if (++tries > kTruncationRetryCap)
        throw DgpError("rejection sampling exceeded " + std::to_string(kTruncationRetryCap) +
                       " retries on node '" + n.name + "' (degenerate truncation?)");
      v = draw_once();
    }
  }
  if (n.post) {
    NodeContext pctx(spec, values, ordered_guard ? node_idx : -1);
    pctx.bind_raw(&v);
    v = n.post->eval(pctx);
  }
  return v;
}

}  // namespace

Population sample_population(const DagSpec& spec, std::size_t n, RngStream& rng,
                             std::int64_t first_id) {
  if (!spec.finalized()) throw DgpError("DagSpec::finalize() was not called");
  Population pop;
  pop.dgp_name = spec.name;
  pop.individuals.reserve(n);
  const int out_idx = spec.outcome_index();
  for (std::size_t k = 0; k < n; ++k) {
    Individual ind;
    ind.id = first_id + static_cast<std::int64_t>(k);
    ind.values.assign(spec.nodes.size(), std::numeric_limits<double>::quiet_NaN());
    for (std::size_t i = 0; i < spec.nodes.size(); ++i) {
      const NodeSpec& node = spec.nodes[i];
      if (static_cast<int>(i) == out_idx) {
        NodeContext ctx(spec, ind.values, static_cast<int>(i));
        ind.true_prob = node.kind == NodeKind::kSigmoidBernoulli
                            ? sigmoid(node.expr.eval(ctx))
                            : check_prob(node.expr.eval(ctx), node.name);
        if (spec.outcome_has_children()) {
          const bool hit = rng.bernoulli(ind.true_prob);
          ind.values[i] = hit ? 1.0 : 0.0;
          ind.label = hit ? 1 : -1;
        }
        continue;
      }
      ind.values[i] = sample_node(spec, node, static_cast<int>(i), ind.values, rng, true);
    }
    pop.individuals.push_back(std::move(ind));
  }
  return pop;
}

int realize_label(const DagSpec& spec, Individual& ind, RngStream& rng) {
  if (ind.label) return *ind.label;
  const bool hit = rng.bernoulli(ind.true_prob);
  ind.label = hit ? 1 : -1;
  ind.values[static_cast<std::size_t>(spec.outcome_index())] = hit ? 1.0 : 0.0;
  return *ind.label;
}

Individual resample_downstream(const DagSpec& spec, const Individual& ind,
                               const std::map<std::string, double>& changed,
                               RngStream& rng) {
  Individual out = ind;
  if (changed.empty()) return out;

  std::vector<int> changed_idx;
  for (const auto& [node, value] : changed) {
    const int idx = spec.index_of(node);
    if (idx < 0) throw DgpError("unknown node '" + node + "' in intervention");
    if (idx == spec.outcome_index())
      throw DgpError("cannot intervene on the outcome node '" + node + "'");
    const auto& trunc = spec.nodes[static_cast<std::size_t>(idx)].truncation;
    if (trunc && (value < trunc->lo || value > trunc->hi))
      throw DgpError("intervention value " + std::to_string(value) + " for node '" + node +
                     "' is outside its truncation bounds");
    out.values[static_cast<std::size_t>(idx)] = value;
    changed_idx.push_back(idx);
  }

  const std::vector<int> desc = spec.descendants_of(changed_idx);
  const std::set<int> desc_set(desc.begin(), desc.end());
  const int out_idx = spec.outcome_index();
  const bool outcome_touched = desc_set.count(out_idx) > 0;

  for (int i : desc) {  // descendants_of returns topological order
    const NodeSpec& node = spec.nodes[static_cast<std::size_t>(i)];
    if (i == out_idx) {
      NodeContext ctx(spec, out.values);
      out.true_prob = node.kind == NodeKind::kSigmoidBernoulli
                          ? sigmoid(node.expr.eval(ctx))
                          : check_prob(node.expr.eval(ctx), node.name);
      if (spec.outcome_has_children()) {
        const bool hit = rng.bernoulli(out.true_prob);
        out.values[static_cast<std::size_t>(i)] = hit ? 1.0 : 0.0;
        out.label = hit ? 1 : -1;
      } else {
        out.values[static_cast<std::size_t>(i)] = std::numeric_limits<double>::quiet_NaN();
        out.label.reset();
      }
      continue;
    }
    out.values[static_cast<std::size_t>(i)] =
        sample_node(spec, node, i, out.values, rng, false);
  }
  if (!outcome_touched) {
    // Upstream values of the outcome are untouched too, but recompute for
    // interventions on nodes the outcome formula reads directly.
    NodeContext ctx(spec, out.values);
    const NodeSpec& onode = spec.nodes[static_cast<std::size_t>(out_idx)];
    out.true_prob = onode.kind == NodeKind::kSigmoidBernoulli
                        ? sigmoid(onode.expr.eval(ctx))
                        : check_prob(onode.expr.eval(ctx), onode.name);
  }
  return out;
}

double true_probability(const DagSpec& spec, const std::vector<double>& values) {
  const NodeSpec& node = spec.nodes[static_cast<std::size_t>(spec.outcome_index())];
  NodeContext ctx(spec, values);
  return node.kind == NodeKind::kSigmoidBernoulli ? sigmoid(node.expr.eval(ctx))
                                                  : check_prob(node.expr.eval(ctx), node.name);
}

double true_probability(const DagSpec& spec, const std::map<std::string, double>& features) {
  std::vector<double> values(spec.nodes.size(), std::numeric_limits<double>::quiet_NaN());
  for (const auto& [name, v] : features) {
    const int idx = spec.index_of(name);
    if (idx < 0) throw DgpError("unknown node '" + name + "'");
    values[static_cast<std::size_t>(idx)] = v;
  }
  return true_probability(spec, values);
}

namespace {

NodeKind kind_from_string(const std::string& s) {
  if (s == "normal") return NodeKind::kNormal;
  if (s == "bernoulli") return NodeKind::kBernoulli;
  if (s == "gamma") return NodeKind::kGamma;
  if (s == "copy") return NodeKind::kCopy;
  if (s == "sigmoid_bernoulli") return NodeKind::kSigmoidBernoulli;
  if (s == "deterministic") return NodeKind::kDeterministic;
  throw DgpError("unknown node kind '" + s + "'");
}

DagSpec dgp_from_json(const nlohmann::json& j) {
  DagSpec spec;
  spec.name = j.at("name").get<std::string>();
  spec.outcome_node = j.at("outcome").get<std::string>();
  spec.censor_node = j.at("censor").get<std::string>();
  spec.model_features = j.at("model_features").get<std::vector<std::string>>();
  if (j.contains("latent")) spec.latent_nodes = j.at("latent").get<std::vector<std::string>>();
  for (const auto& jn : j.at("nodes")) {
    NodeSpec n;
    n.name = jn.at("name").get<std::string>();
    n.kind = kind_from_string(jn.at("kind").get<std::string>());
    switch (n.kind) {
      case NodeKind::kNormal:
        n.expr = Expr::parse(jn.at("mean").get<std::string>());
        n.sd = jn.at("sd").get<double>();
        break;
      case NodeKind::kBernoulli:
        n.expr = Expr::parse(jn.at("prob").get<std::string>());
        break;
      case NodeKind::kGamma:
        n.shape = jn.at("shape").get<double>();
        n.scale = jn.at("scale").get<double>();
        n.offset = jn.value("offset", 0.0);
        break;
      case NodeKind::kCopy:
        n.source = jn.at("source").get<std::string>();
        break;
      case NodeKind::kSigmoidBernoulli:
        n.expr = Expr::parse(jn.at("linear").get<std::string>());
        break;
      case NodeKind::kDeterministic:
        n.expr = Expr::parse(jn.at("expr").get<std::string>());
        break;
    }
    if (jn.contains("bounds")) {
      const auto& b = jn.at("bounds");
      n.truncation = Interval{b.at(0).get<double>(), b.at(1).get<double>()};
    }
    if (jn.contains("post")) n.post = Expr::parse(jn.at("post").get<std::string>());
    spec.nodes.push_back(std::move(n));
  }
  spec.finalize();
  return spec;
}

// The distribution table each builtin transcribes; the gamma is stated as
// (concentration, rate) upstream, stored here as (shape, scale).
const char* kBuiltinJson[] = {
    R"json({
      "name": "causal",
      "outcome": "y", "censor": "z",
      "model_features": ["x1", "x2", "z"],
      "nodes": [
        {"name": "x1", "kind": "normal", "mean": "0", "sd": 1, "bounds": [-2, 1.5]},
        {"name": "x2", "kind": "normal", "mean": "0", "sd": 1, "bounds": [-2, 1.5]},
        {"name": "z", "kind": "bernoulli", "prob": "0.15"},
        {"name": "y", "kind": "sigmoid_bernoulli", "linear": "x1 + x2 + z - 0.5"}
      ]
    })json",
    R"json({
      "name": "causal_blind",
      "outcome": "y", "censor": "z",
      "model_features": ["x1", "x2", "z"],
      "nodes": [
        {"name": "x1", "kind": "normal", "mean": "0", "sd": 1, "bounds": [-2, 2]},
        {"name": "x2", "kind": "normal", "mean": "0", "sd": 1, "bounds": [-2, 2]},
        {"name": "z", "kind": "bernoulli", "prob": "0.15"},
        {"name": "y", "kind": "sigmoid_bernoulli", "linear": "x1 + x2 - 0.5"}
      ]
    })json",
    R"json({
      "name": "causal_linked",
      "outcome": "y", "censor": "z",
      "model_features": ["x1", "x2", "z"],
      "nodes": [
        {"name": "x1", "kind": "normal", "mean": "0", "sd": 1, "bounds": [-2, 1.5]},
        {"name": "x2", "kind": "copy", "source": "x1"},
        {"name": "z", "kind": "bernoulli", "prob": "0.15"},
        {"name": "y", "kind": "sigmoid_bernoulli", "linear": "x1 + x2 + z - 0.5"}
      ]
    })json",
    R"json({
      "name": "causal_equal",
      "outcome": "y", "censor": "z",
      "model_features": ["x1", "x2", "z"],
      "latent": ["s"],
      "nodes": [
        {"name": "z", "kind": "bernoulli", "prob": "0.15"},
        {"name": "s", "kind": "bernoulli", "prob": "0.75"},
        {"name": "x1", "kind": "normal", "mean": "(2 - z - s) / 2", "sd": 1, "bounds": [-2, 2]},
        {"name": "x2", "kind": "normal", "mean": "(2 - z - s) / 2", "sd": 1, "bounds": [-2, 2]},
        {"name": "y", "kind": "sigmoid_bernoulli", "linear": "x1 + x2 + z - 1.5"}
      ]
    })json",
    R"json({
      "name": "mixed_proxy",
      "outcome": "y", "censor": "z",
      "model_features": ["x1", "x2p", "z"],
      "latent": ["x2"],
      "nodes": [
        {"name": "x1", "kind": "normal", "mean": "0", "sd": 1, "bounds": [-2, 1.5]},
        {"name": "x2", "kind": "normal", "mean": "0", "sd": 1, "bounds": [-2, 1.5]},
        {"name": "x2p", "kind": "copy", "source": "x2"},
        {"name": "z", "kind": "bernoulli", "prob": "0.15"},
        {"name": "y", "kind": "sigmoid_bernoulli", "linear": "x1 + x2 + z - 0.5"}
      ]
    })json",
    R"json({
      "name": "mixed_downstream",
      "outcome": "y", "censor": "z",
      "model_features": ["x1", "x2p", "z"],
      "nodes": [
        {"name": "x1", "kind": "normal", "mean": "0", "sd": 1, "bounds": [-2, 1.5]},
        {"name": "z", "kind": "bernoulli", "prob": "0.15"},
        {"name": "y", "kind": "sigmoid_bernoulli", "linear": "x1 + z - 0.5"},
        {"name": "x2p", "kind": "normal", "mean": "y - 1", "sd": 1, "bounds": [-2, 1.5]}
      ]
    })json",
    R"json({
      "name": "gaming",
      "outcome": "y", "censor": "z",
      "model_features": ["x1p", "x2p", "z"],
      "latent": ["x1", "x2"],
      "nodes": [
        {"name": "x1", "kind": "normal", "mean": "0", "sd": 1, "bounds": [-2, 1.5]},
        {"name": "x2", "kind": "normal", "mean": "0", "sd": 1, "bounds": [-2, 1.5]},
        {"name": "x1p", "kind": "copy", "source": "x1"},
        {"name": "x2p", "kind": "copy", "source": "x2"},
        {"name": "z", "kind": "bernoulli", "prob": "0.15"},
        {"name": "y", "kind": "sigmoid_bernoulli", "linear": "x1 + x2 + z - 0.5"}
      ]
    })json",
    R"json({
      "name": "german",
      "outcome": "y", "censor": "g",
      "model_features": ["g", "a", "e", "l", "d", "i", "s"],
      "nodes": [
        {"name": "a", "kind": "gamma", "shape": 10, "scale": 3.5, "offset": -35},
        {"name": "g", "kind": "bernoulli", "prob": "0.5"},
        {"name": "e", "kind": "normal", "mean": "-1 + 0.5*g + sigmoid(-0.1*a)", "sd": 0.25,
         "post": "-0.5 + sigmoid(v)"},
        {"name": "l", "kind": "normal", "mean": "1 + 0.01*(a - 5)*(5 - a) + g", "sd": 4},
        {"name": "d", "kind": "normal", "mean": "-1 + 0.01*a + 2*g + l", "sd": 9},
        {"name": "i", "kind": "normal", "mean": "-4 + 0.01*(a + 35) + 2*g + 2*e", "sd": 4},
        {"name": "s", "kind": "normal", "mean": "-4 + step(i)*1.5*i", "sd": 25},
        {"name": "y", "kind": "sigmoid_bernoulli", "linear": "0.3*(-l - d + i + s)"}
      ]
    })json",
};

}  // namespace

DagSpec dgp_from_json_text(const std::string& json_text) {
  return dgp_from_json(nlohmann::json::parse(json_text, nullptr, true, true));
}

const DagSpec& builtin_dgp(const std::string& name) {
  static const std::map<std::string, DagSpec> builtins = [] {
    std::map<std::string, DagSpec> m;
    for (const char* text : kBuiltinJson) {
      DagSpec s = dgp_from_json_text(text);
      m.emplace(s.name, std::move(s));
    }
    return m;
  }();
  auto it = builtins.find(name);
  if (it == builtins.end()) {
    std::ostringstream msg;
    msg << "unknown DGP '" << name << "'; valid names:";
    for (const auto& [k, v] : builtins) msg << ' ' << k;
    throw DgpError(msg.str());
  }
  return it->second;
}

std::vector<std::string> builtin_dgp_names() {
  static const char* names[] = {"causal", "causal_blind", "causal_linked", "causal_equal",
                                "mixed_proxy", "mixed_downstream", "gaming", "german"};
  return {std::begin(names), std::end(names)};
}

}  // namespace censorsim

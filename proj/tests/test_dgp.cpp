#include <cmath>
#include <set>

#include "censorsim/dgp.hpp"
#include "doctest.h"

using namespace censorsim;

namespace {

RngStream stream(std::uint64_t s) { return RngStream(s); }

}  // namespace

TEST_CASE("builtin catalog") {
  CHECK(builtin_dgp_names().size() == 8);
  for (const auto& name : builtin_dgp_names()) CHECK(builtin_dgp(name).name == name);
  CHECK_THROWS_WITH_AS(builtin_dgp("bogus"),
                       doctest::Contains("unknown DGP 'bogus'"), DgpError);
}

TEST_CASE("causal spec transcription") {
  const DagSpec& spec = builtin_dgp("causal");
  CHECK(spec.model_features == std::vector<std::string>{"x1", "x2", "z"});
  const NodeSpec& z = spec.nodes[static_cast<std::size_t>(spec.index_of("z"))];
  CHECK(z.kind == NodeKind::kBernoulli);
  const NodeSpec& x1 = spec.nodes[static_cast<std::size_t>(spec.index_of("x1"))];
  REQUIRE(x1.truncation.has_value());
  CHECK(x1.truncation->lo == -2.0);
  CHECK(x1.truncation->hi == 1.5);

  // closed-form outcome checks
  CHECK(true_probability(spec, {{"x1", 0.0}, {"x2", 0.0}, {"z", 0.0}}) ==
        doctest::Approx(sigmoid(-0.5)).epsilon(1e-12));
  CHECK(true_probability(spec, {{"x1", 0.0}, {"x2", 0.0}, {"z", 1.0}}) ==
        doctest::Approx(sigmoid(0.5)).epsilon(1e-12));
  CHECK_THROWS_AS(true_probability(spec, {{"x1", 0.0}, {"x2", 0.0}}), DgpError);
}

TEST_CASE("german spec transcription") {
  const DagSpec& spec = builtin_dgp("german");
  CHECK(spec.nodes.size() == 8);
  CHECK(spec.censor_node == "g");
  const NodeSpec& a = spec.nodes[static_cast<std::size_t>(spec.index_of("a"))];
  CHECK(a.kind == NodeKind::kGamma);
  CHECK(a.shape == 10.0);
  CHECK(a.scale == 3.5);  // the table states the rate 1/3.5
  CHECK(a.offset == -35.0);
  CHECK(spec.model_features.size() == 7);

  RngStream rng = stream(3);
  Population pop = sample_population(spec, 4000, rng);
  double asum = 0, gsum = 0;
  for (const auto& ind : pop.individuals) {
    asum += ind.value(spec, "a");
    gsum += ind.z(spec);
    const double e = ind.value(spec, "e");
    CHECK(e >= -0.5);
    CHECK(e <= 0.5);
  }
  CHECK(std::fabs(asum / 4000) < 0.6);  // A has mean -35 + 10*3.5 = 0
  CHECK(gsum / 4000 == doctest::Approx(0.5).epsilon(0.05));
}

TEST_CASE("population sampling moments and truncation") {
  const DagSpec& spec = builtin_dgp("causal");
  RngStream rng = stream(1);
  Population pop = sample_population(spec, 100000, rng);
  REQUIRE(pop.individuals.size() == 100000);
  double zmean = 0;
  std::set<std::int64_t> ids;
  for (const auto& ind : pop.individuals) {
    zmean += ind.z(spec);
    ids.insert(ind.id);
    CHECK(ind.value(spec, "x1") >= -2.0);
    CHECK(ind.value(spec, "x1") <= 1.5);
    CHECK(ind.true_prob >= 0.0);
    CHECK(ind.true_prob <= 1.0);
    CHECK(!ind.label.has_value());  // labels are lazy here
  }
  CHECK(ids.size() == pop.individuals.size());
  CHECK(std::fabs(zmean / 100000 - 0.15) < 0.01);

  RngStream r0 = stream(9);
  CHECK(sample_population(spec, 0, r0).individuals.empty());
}

TEST_CASE("seed determinism is bit exact") {
  const DagSpec& spec = builtin_dgp("german");
  RngStream a = stream(11), b = stream(11);
  Population pa = sample_population(spec, 500, a);
  Population pb = sample_population(spec, 500, b);
  for (std::size_t i = 0; i < 500; ++i) {
    for (std::size_t k = 0; k < spec.nodes.size(); ++k) {
      const double va = pa.individuals[i].values[k];
      const double vb = pb.individuals[i].values[k];
      if (std::isnan(va)) CHECK(std::isnan(vb));
      else CHECK(va == vb);
    }
    CHECK(pa.individuals[i].true_prob == pb.individuals[i].true_prob);
  }
}

TEST_CASE("label realization") {
  const DagSpec& spec = builtin_dgp("causal");
  RngStream rng = stream(5);
  Population pop = sample_population(spec, 3, rng);
  Individual& ind = pop.individuals[0];

  ind.true_prob = 1.0;
  CHECK(realize_label(spec, ind, rng) == 1);
  CHECK(ind.label == 1);
  ind.true_prob = 0.0;  // already cached: stays 1
  CHECK(realize_label(spec, ind, rng) == 1);

  Individual& neg = pop.individuals[1];
  neg.true_prob = 0.0;
  CHECK(realize_label(spec, neg, rng) == -1);

  Individual proto = pop.individuals[2];
  proto.true_prob = 0.7;
  int pos = 0;
  for (int i = 0; i < 10000; ++i) {
    Individual fresh = proto;
    fresh.label.reset();
    pos += realize_label(spec, fresh, rng) == 1;
  }
  CHECK(std::fabs(pos / 10000.0 - 0.7) < 0.02);
}

TEST_CASE("counterfactual resampling: locality and identity") {
  const DagSpec& spec = builtin_dgp("causal");
  RngStream rng = stream(21);
  Population pop = sample_population(spec, 50, rng);

  Individual same = resample_downstream(spec, pop.individuals[0], {}, rng);
  REQUIRE(same.values.size() == pop.individuals[0].values.size());
  for (std::size_t k = 0; k < same.values.size(); ++k) {
    if (std::isnan(pop.individuals[0].values[k])) CHECK(std::isnan(same.values[k]));
    else CHECK(same.values[k] == pop.individuals[0].values[k]);
  }
  CHECK(same.true_prob == pop.individuals[0].true_prob);

  const Individual& ind = pop.individuals[1];
  Individual moved = resample_downstream(spec, ind, {{"x1", 1.25}}, rng);
  CHECK(moved.value(spec, "x1") == 1.25);
  CHECK(moved.value(spec, "x2") == ind.value(spec, "x2"));
  CHECK(moved.z(spec) == ind.z(spec));
  CHECK(moved.true_prob ==
        doctest::Approx(sigmoid(1.25 + ind.value(spec, "x2") + ind.z(spec) - 0.5))
            .epsilon(1e-12));

  CHECK_THROWS_AS(resample_downstream(spec, ind, {{"y", 1.0}}, rng), DgpError);
  CHECK_THROWS_AS(resample_downstream(spec, ind, {{"x1", 7.0}}, rng), DgpError);
  CHECK_THROWS_AS(resample_downstream(spec, ind, {{"nope", 0.0}}, rng), DgpError);
}

TEST_CASE("counterfactual locality over random interventions on all builtins") {
  RngStream rng = stream(77);
  int total = 0;
  for (const auto& name : builtin_dgp_names()) {
    const DagSpec& spec = builtin_dgp(name);
    Population pop = sample_population(spec, 125, rng);
    for (const auto& ind : pop.individuals) {
      // pick an actionable-ish node: any non-outcome node
      std::vector<int> candidates;
      for (std::size_t i = 0; i < spec.nodes.size(); ++i)
        if (static_cast<int>(i) != spec.outcome_index()) candidates.push_back(static_cast<int>(i));
      const int node = candidates[static_cast<std::size_t>(
          rng.uniform() * static_cast<double>(candidates.size()))];
      const NodeSpec& ns = spec.nodes[static_cast<std::size_t>(node)];
      double nv;
      if (ns.kind == NodeKind::kBernoulli) nv = 1.0 - ind.values[static_cast<std::size_t>(node)];
      else if (ns.truncation) nv = rng.uniform(ns.truncation->lo, ns.truncation->hi);
      else nv = ind.values[static_cast<std::size_t>(node)] + rng.normal();
      Individual out = resample_downstream(spec, ind, {{ns.name, nv}}, rng);

      const auto desc = spec.descendants_of({node});
      const std::set<int> desc_set(desc.begin(), desc.end());
      for (std::size_t i = 0; i < spec.nodes.size(); ++i) {
        if (static_cast<int>(i) == node || desc_set.count(static_cast<int>(i))) continue;
        const double va = ind.values[i];
        const double vb = out.values[i];
        if (std::isnan(va)) CHECK(std::isnan(vb));
        else CHECK(va == vb);  // bit identical
      }
      ++total;
    }
  }
  CHECK(total == 1000);
}

TEST_CASE("linked copy nodes track interventions") {
  const DagSpec& spec = builtin_dgp("causal_linked");
  RngStream rng = stream(31);
  Population pop = sample_population(spec, 100, rng);
  for (const auto& ind : pop.individuals) {
    CHECK(ind.value(spec, "x2") == ind.value(spec, "x1"));
    Individual moved = resample_downstream(spec, ind, {{"x1", 0.75}}, rng);
    CHECK(moved.value(spec, "x2") == 0.75);  // copy re-resolves to the new x1
    Individual forced = resample_downstream(spec, ind, {{"x1", 0.5}, {"x2", 1.0}}, rng);
    CHECK(forced.value(spec, "x1") == 0.5);
    CHECK(forced.value(spec, "x2") == 1.0);  // explicit intervention wins
  }
}

TEST_CASE("proxy nodes are inert for the true outcome") {
  for (const char* name : {"mixed_proxy", "gaming"}) {
    const DagSpec& spec = builtin_dgp(name);
    RngStream rng = stream(41);
    Population pop = sample_population(spec, 200, rng);
    for (const auto& ind : pop.individuals) {
      std::map<std::string, double> change;
      change["x2p"] = rng.uniform(-2.0, 1.5);
      if (spec.index_of("x1p") >= 0) change["x1p"] = rng.uniform(-2.0, 1.5);
      Individual moved = resample_downstream(spec, ind, change, rng);
      CHECK(moved.true_prob == ind.true_prob);
      CHECK(moved.label.has_value() == ind.label.has_value());
    }
  }
}

TEST_CASE("outcome with children is drawn eagerly and resampled downstream") {
  const DagSpec& spec = builtin_dgp("mixed_downstream");
  CHECK(spec.outcome_has_children());
  RngStream rng = stream(51);
  Population pop = sample_population(spec, 2000, rng);
  double corr_num = 0;
  double y_mean = 0, x2p_mean = 0;
  for (const auto& ind : pop.individuals) {
    REQUIRE(ind.label.has_value());  // needed to sample x2p
    y_mean += *ind.label == 1 ? 1.0 : 0.0;
    x2p_mean += ind.value(spec, "x2p");
  }
  y_mean /= 2000;
  x2p_mean /= 2000;
  for (const auto& ind : pop.individuals)
    corr_num += ((*ind.label == 1 ? 1.0 : 0.0) - y_mean) * (ind.value(spec, "x2p") - x2p_mean);
  CHECK(corr_num / 2000 > 0.05);  // x2p mean is y-1: strongly informative

  // intervening on x1 redraws y (and so x2p) from the new conditional
  int label_flips = 0;
  for (int i = 0; i < 300; ++i) {
    const Individual& ind = pop.individuals[static_cast<std::size_t>(i)];
    Individual moved = resample_downstream(spec, ind, {{"x1", 1.4}}, rng);
    CHECK(moved.label.has_value());
    CHECK(moved.true_prob ==
          doctest::Approx(sigmoid(1.4 + ind.z(spec) - 0.5)).epsilon(1e-12));
    label_flips += *moved.label != *ind.label;
  }
  CHECK(label_flips > 0);
}

TEST_CASE("causal_equal: latent node shapes the feature means, outcome gap small") {
  const DagSpec& spec = builtin_dgp("causal_equal");
  CHECK(spec.latent_nodes == std::vector<std::string>{"s"});
  RngStream rng = stream(61);
  Population pop = sample_population(spec, 60000, rng);
  double p_y_z1 = 0, p_y_z0 = 0, s_mean = 0;
  int n1 = 0, n0 = 0;
  for (const auto& ind : pop.individuals) {
    s_mean += ind.value(spec, "s");
    if (ind.z(spec) == 1.0) { p_y_z1 += ind.true_prob; ++n1; }
    else { p_y_z0 += ind.true_prob; ++n0; }
  }
  CHECK(s_mean / 60000 == doctest::Approx(0.75).epsilon(0.01));
  const double gap = std::fabs(p_y_z1 / n1 - p_y_z0 / n0);
  MESSAGE("causal_equal P(Y=1|Z=1) - P(Y=1|Z=0) measured gap: ", gap);
  CHECK(gap < 0.05);
}

TEST_CASE("degenerate truncation fails after the retry cap") {
  DagSpec spec = dgp_from_json_text(R"({
    "name": "tight", "outcome": "y", "censor": "z",
    "model_features": ["x", "z"],
    "nodes": [
      {"name": "x", "kind": "normal", "mean": "0", "sd": 1, "bounds": [25.0, 25.001]},
      {"name": "z", "kind": "bernoulli", "prob": "0.5"},
      {"name": "y", "kind": "sigmoid_bernoulli", "linear": "x"}
    ]
  })");
  RngStream rng = stream(71);
  CHECK_THROWS_WITH_AS(sample_population(spec, 1, rng),
                       doctest::Contains("rejection sampling"), DgpError);
}

TEST_CASE("spec validation catches structural problems") {
  // parent listed after its child
  CHECK_THROWS_AS(dgp_from_json_text(R"({
    "name": "bad", "outcome": "y", "censor": "z",
    "model_features": ["x"],
    "nodes": [
      {"name": "x", "kind": "normal", "mean": "w", "sd": 1},
      {"name": "w", "kind": "normal", "mean": "0", "sd": 1},
      {"name": "z", "kind": "bernoulli", "prob": "0.5"},
      {"name": "y", "kind": "sigmoid_bernoulli", "linear": "x"}
    ]
  })"), DgpError);
  // outcome as model feature
  CHECK_THROWS_AS(dgp_from_json_text(R"({
    "name": "bad2", "outcome": "y", "censor": "z",
    "model_features": ["y"],
    "nodes": [
      {"name": "z", "kind": "bernoulli", "prob": "0.5"},
      {"name": "y", "kind": "sigmoid_bernoulli", "linear": "z"}
    ]
  })"), DgpError);
  // probability outside [0,1]
  DagSpec bad = dgp_from_json_text(R"({
    "name": "badp", "outcome": "y", "censor": "z",
    "model_features": ["z"],
    "nodes": [
      {"name": "z", "kind": "bernoulli", "prob": "1.5"},
      {"name": "y", "kind": "sigmoid_bernoulli", "linear": "z"}
    ]
  })");
  RngStream rng = stream(81);
  CHECK_THROWS_WITH_AS(sample_population(bad, 1, rng),
                       doctest::Contains("probability"), DgpError);
}

#include "labelforge/error.hpp"
#include "labelforge/label_model.hpp"
#include "labelforge/synth.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

namespace lf = labelforge;
using lftest::brute_force_log_marginal;

namespace {

lf::GenerativeParams independent(double beta, const std::vector<std::pair<double, double>>& qa) {
  lf::GenerativeParams p;
  p.beta = beta;
  for (auto [q, a] : qa) p.lfs.push_back({q, a});
  return p;
}

double proba(const lf::GenerativeParams& p, const std::vector<int>& votes) {
  const std::vector<lf::Vote> row(votes.begin(), votes.end());
  return lf::predict_proba(p, {}, row);
}

lf::SynthSpec spec_with(std::size_t m, std::size_t n, std::uint64_t seed) {
  lf::SynthSpec s;
  s.m = m;
  s.n = n;
  s.seed = seed;
  return s;
}

}  // namespace

TEST(LogMarginal, MatchesBruteForcePerRow) {
  for (std::uint64_t inst = 0; inst < 100; ++inst) {
    lf::Rng rng(500 + inst);
    const std::size_t m = 1 + rng.below(6);
    const auto edges = lftest::random_matching(rng, m);
    const auto params = lftest::random_params(rng, m, edges);
    const auto structure = lftest::structure_of(edges);
    const auto matrix = lftest::random_matrix(rng, 50, m);
    double total = 0.0;
    for (std::size_t i = 0; i < matrix.n(); ++i) {
      const auto row = matrix.dense_row(i);
      const std::vector<int> votes(row.begin(), row.end());
      const double expected = brute_force_log_marginal(params, votes);
      EXPECT_NEAR(lf::log_marginal_likelihood(lftest::single_row(votes), params, structure), expected, 1e-12);
      total += expected;
    }
    EXPECT_NEAR(lf::log_marginal_likelihood(matrix, params, structure), total, 1e-10);
  }
}

TEST(LogMarginal, FullVoteDistributionSumsToOne) {
  for (std::uint64_t inst = 0; inst < 30; ++inst) {
    lf::Rng rng(900 + inst);
    const std::size_t m = 1 + inst % 6;
    const auto edges = lftest::random_matching(rng, m);
    const auto params = lftest::random_params(rng, m, edges);
    const auto structure = lftest::structure_of(edges);
    std::size_t cells = 1;
    for (std::size_t j = 0; j < m; ++j) cells *= 3;
    double sum = 0.0;
    for (std::size_t code = 0; code < cells; ++code) {
      sum += std::exp(lf::log_marginal_likelihood(lftest::single_row(lftest::vote_vector(code, m)), params, structure));
    }
    EXPECT_NEAR(sum, 1.0, 1e-8) << "m=" << m;
  }
}

TEST(LogMarginal, AllAbstainIgnoresAccuracies) {
  const std::size_t n = 25;
  const auto matrix = lf::LabelMatrix::from_dense(std::vector<std::string>(n, "x"), {"a", "b", "c"},
                                                  std::vector<lf::Vote>(3 * n, 0));
  auto p = independent(0.3, {{0.2, 0.9}, {0.5, 0.6}, {0.7, 0.55}});
  const double expected = n * (std::log(0.8) + std::log(0.5) + std::log(0.3));
  EXPECT_NEAR(lf::log_marginal_likelihood(matrix, p, {}), expected, 1e-12);
  for (auto& lfp : p.lfs) lfp.accuracy = 0.99;
  EXPECT_NEAR(lf::log_marginal_likelihood(matrix, p, {}), expected, 1e-12);
}

TEST(LogMarginal, SingleVoteAtBalancedPrior) {
  const auto p = independent(0.5, {{1.0, 0.9}});
  EXPECT_NEAR(lf::log_marginal_likelihood(lftest::single_row({1}), p, {}), std::log(0.5), 1e-12);
}

TEST(LogMarginal, StructureMismatchThrows) {
  lf::Rng rng(1);
  const auto p = lftest::random_params(rng, 3, {{0, 1}});
  EXPECT_THROW(lf::log_marginal_likelihood(lftest::single_row({1, 0, 1}), p, {}), lf::Error);
}

TEST(Objective, GradientMatchesCentralDifferences) {
  for (std::uint64_t inst = 0; inst < 50; ++inst) {
    lf::Rng rng(2000 + inst);
    const std::size_t m = 1 + rng.below(6);
    const auto edges = lftest::random_matching(rng, m);
    const auto structure = lftest::structure_of(edges);
    const lf::ParameterMap map(m, structure);
    const auto patterns = lf::VotePatterns::from_matrix(lftest::random_matrix(rng, 60, m));
    auto x = map.to_logits(lftest::random_params(rng, m, edges));
    std::vector<double> grad;
    lf::objective(patterns, map, x, &grad);
    ASSERT_EQ(grad.size(), map.size());
    const double h = 1e-5;
    std::vector<double> fd(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      auto up = x, down = x;
      up[i] += h;
      down[i] -= h;
      fd[i] = (lf::objective(patterns, map, up, nullptr) - lf::objective(patterns, map, down, nullptr)) / (2 * h);
    }
    double scale = 0.0;
    for (double v : fd) scale = std::max(scale, std::abs(v));
    EXPECT_LE(lftest::max_abs_diff(grad, fd), 1e-5 * std::max(scale, 1e-3)) << "instance " << inst;
  }
}

TEST(Objective, EqualsMeanNegativeLogMarginal) {
  lf::Rng rng(77);
  const std::vector<std::pair<std::size_t, std::size_t>> edges = {{1, 3}};
  const auto params = lftest::random_params(rng, 4, edges);
  const auto matrix = lftest::random_matrix(rng, 80, 4);
  const lf::ParameterMap map(4, lftest::structure_of(edges));
  const double obj = lf::objective(lf::VotePatterns::from_matrix(matrix), map, map.to_logits(params), nullptr);
  EXPECT_NEAR(obj, -lf::log_marginal_likelihood(matrix, params, lftest::structure_of(edges)) / 80.0, 1e-12);
}

TEST(ParameterMap, LogitRoundTrip) {
  lf::Rng rng(3);
  const std::vector<std::pair<std::size_t, std::size_t>> edges = {{0, 2}, {3, 4}};
  const lf::ParameterMap map(6, lftest::structure_of(edges));
  EXPECT_EQ(map.size(), 1u + 2 * 2 + 18 * 2);
  EXPECT_EQ(map.propensity_index(0), lf::ParameterMap::npos);
  EXPECT_EQ(map.edge_of(4), 1u);
  const auto p = lftest::random_params(rng, 6, edges);
  const auto back = map.from_logits(map.to_logits(p));
  EXPECT_NEAR(back.beta, p.beta, 1e-12);
  for (std::size_t j : {1u, 5u}) {
    EXPECT_NEAR(back.lfs[j].propensity, p.lfs[j].propensity, 1e-12);
    EXPECT_NEAR(back.lfs[j].accuracy, p.lfs[j].accuracy, 1e-12);
  }
  for (std::size_t e = 0; e < 2; ++e) {
    for (std::size_t s = 0; s < 2; ++s) {
      for (std::size_t c = 0; c < 9; ++c) EXPECT_NEAR(back.edges[e].joint[s][c], p.edges[e].joint[s][c], 1e-12);
    }
  }
}

TEST(FlipSymmetry, ObjectiveAndPosterior) {
  for (std::uint64_t inst = 0; inst < 40; ++inst) {
    lf::Rng rng(3000 + inst);
    const std::size_t m = 1 + rng.below(6);
    const auto edges = lftest::random_matching(rng, m);
    const auto structure = lftest::structure_of(edges);
    const auto params = lftest::random_params(rng, m, edges);
    const auto flipped = lf::flip_labels(params);
    const auto matrix = lftest::random_matrix(rng, 40, m);
    EXPECT_NEAR(lf::log_marginal_likelihood(matrix, params, structure),
                lf::log_marginal_likelihood(matrix, flipped, structure), 1e-10);
    for (std::size_t i = 0; i < matrix.n(); ++i) {
      const auto row = matrix.dense_row(i);
      EXPECT_NEAR(lf::predict_proba(flipped, structure, row), 1.0 - lf::predict_proba(params, structure, row), 1e-14);
    }
    for (std::size_t e = 0; e < edges.size(); ++e) EXPECT_EQ(flipped.edges[e].joint[1], params.edges[e].joint[0]);
    const auto twice = lf::flip_labels(flipped);
    EXPECT_DOUBLE_EQ(twice.beta, params.beta);
  }
}

TEST(PredictProba, Examples) {
  EXPECT_EQ(proba(independent(0.37, {{0.5, 0.8}, {0.4, 0.7}}), {0, 0}), 0.37);
  EXPECT_NEAR(proba(independent(0.5, {{1.0, 0.9}, {1.0, 0.6}}), {1, 1}), (0.9 * 0.6) / (0.9 * 0.6 + 0.1 * 0.4),
              1e-12);
  EXPECT_NEAR(proba(independent(0.5, {{1.0, 0.9}, {1.0, 0.6}}), {1, 1}), 0.93103, 1e-5);
  EXPECT_NEAR(proba(independent(0.5, {{0.6, 0.8}, {0.6, 0.8}}), {1, -1}), 0.5, 1e-15);
}

TEST(PredictProba, MatchesBruteForceWithEdges) {
  lf::Rng rng(41);
  for (int inst = 0; inst < 50; ++inst) {
    const std::size_t m = 2 + rng.below(5);
    const auto edges = lftest::random_matching(rng, m);
    const auto params = lftest::random_params(rng, m, edges);
    const auto votes = lftest::vote_vector(rng.below(729), m);
    const std::vector<lf::Vote> row(votes.begin(), votes.end());
    EXPECT_NEAR(lf::predict_proba(params, lftest::structure_of(edges), row), lftest::brute_force_posterior(params, votes),
                1e-12);
  }
}

TEST(PredictProba, MonotoneInExtraPositiveVote) {
  lf::Rng rng(55);
  for (int inst = 0; inst < 300; ++inst) {
    const std::size_t m = 2 + rng.below(5);
    lf::GenerativeParams p;
    p.beta = rng.uniform(0.1, 0.9);
    for (std::size_t j = 0; j < m; ++j) p.lfs.push_back({rng.uniform(0.1, 0.9), rng.uniform(0.51, 0.9)});
    auto votes = lftest::vote_vector(rng.below(729), m);
    const std::size_t j = rng.below(m);
    votes[j] = 0;
    const double before = proba(p, votes);
    votes[j] = 1;
    EXPECT_GT(proba(p, votes), before);
  }
}

TEST(Fit, RecoversThreeIndependentLfs) {
  lf::SynthSpec s = spec_with(3, 10000, 4);
  s.accuracies = std::vector<double>{0.9, 0.8, 0.7};
  s.propensities = std::vector<double>{1.0, 1.0, 1.0};
  const auto data = lf::sample_dataset(s);
  const auto r = lf::fit(data.matrix, {});
  const std::vector<double> truth = {0.9, 0.8, 0.7};
  for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(r.params.lfs[j].accuracy, truth[j], 0.03);
  EXPECT_NEAR(r.params.beta, 0.5, 0.03);
}

TEST(Fit, SingleLfResolvesFlipToAboveChance) {
  for (double a : {0.2, 0.5, 0.9}) {
    lf::SynthSpec s = spec_with(1, 500, 9);
    s.accuracies = std::vector<double>{a};
    const auto r = lf::fit(lf::sample_dataset(s).matrix, {});
    EXPECT_GE(r.params.lfs[0].accuracy, 0.5) << a;
  }
}

TEST(Fit, FlipConventionAppliesWhenBalanceIsFree) {
  lf::SynthSpec s = spec_with(5, 3000, 2);
  s.accuracies = std::vector<double>{0.2, 0.25, 0.3, 0.2, 0.3};
  const auto r = lf::fit(lf::sample_dataset(s).matrix, {});
  EXPECT_GE(lf::mean_accuracy(r.params), 0.5);
}

TEST(Fit, ObjectiveTraceNonIncreasing) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto s = spec_with(6, 2000, seed);
    s.edges = {{0, 1, 0.8}};
    const auto data = lf::sample_dataset(s);
    for (const auto& structure : {lf::DependencyStructure{}, data.structure}) {
      const auto r = lf::fit(data.matrix, structure);
      ASSERT_FALSE(r.trace.empty());
      for (std::size_t i = 1; i < r.trace.size(); ++i) EXPECT_LE(r.trace[i], r.trace[i - 1]);
      EXPECT_EQ(r.objective, r.trace.back());
    }
  }
}

TEST(Fit, ObjectiveNotWorseThanTruth) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto s = spec_with(6, 3000, seed);
    s.edges = {{2, 4, 0.7}};
    const auto data = lf::sample_dataset(s);
    const auto r = lf::fit(data.matrix, data.structure, {.max_iter = 3000, .tol = 1e-10});
    const double at_truth = -lf::log_marginal_likelihood(data.matrix, data.truth, data.structure) / 3000.0;
    EXPECT_LE(r.objective, at_truth + 1e-9);
  }
}

TEST(Fit, OneDimensionalGridOracle) {
  // One LF, class balance pinned away from 0.5 and propensity pinned:
  // the accuracy is the only free coordinate.
  const double beta = 0.3, q = 0.6;
  lf::SynthSpec s = spec_with(1, 5000, 21);
  s.beta = beta;
  s.accuracies = std::vector<double>{0.8};
  s.propensities = std::vector<double>{q};
  const auto data = lf::sample_dataset(s);
  lf::FitConfig cfg;
  cfg.fixed_beta = beta;
  cfg.fixed_propensity = std::vector<double>{q};
  cfg.tol = 1e-14;
  cfg.max_iter = 20000;
  const auto r = lf::fit(data.matrix, {}, cfg);
  EXPECT_FALSE(r.flipped);
  EXPECT_EQ(r.params.beta, beta);
  EXPECT_NEAR(r.params.lfs[0].propensity, q, 1e-12);

  auto lml = [&](double a) {
    lf::GenerativeParams p;
    p.beta = beta;
    p.lfs = {{q, a}};
    double total = 0.0;
    for (std::size_t i = 0; i < data.matrix.n(); ++i) total += brute_force_log_marginal(p, {data.matrix.at(i, 0)});
    return total;
  };
  double best_a = 0.5, best = -INFINITY;
  for (int g = 1; g < 10000; ++g) {
    const double a = g / 10000.0;
    if (const double v = lml(a); v > best) best = v, best_a = a;
  }
  double lo = best_a - 1e-4, hi = best_a + 1e-4;
  for (int it = 0; it < 60; ++it) {
    const double m1 = lo + (hi - lo) / 3, m2 = hi - (hi - lo) / 3;
    if (lml(m1) < lml(m2)) {
      lo = m1;
    } else {
      hi = m2;
    }
  }
  const double grid_a = (lo + hi) / 2;
  EXPECT_NEAR(r.params.lfs[0].accuracy, grid_a, 1e-4);

  double pos = 0, neg = 0;
  for (std::size_t i = 0; i < data.matrix.n(); ++i) {
    pos += data.matrix.at(i, 0) > 0;
    neg += data.matrix.at(i, 0) < 0;
  }
  const double closed = (pos / (pos + neg) - (1 - beta)) / (2 * beta - 1);
  EXPECT_NEAR(grid_a, closed, 1e-6);
}

TEST(Fit, PermutationEquivariance) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto data = lf::sample_dataset(spec_with(6, 2000, seed));
    const std::vector<std::size_t> order = {3, 0, 5, 1, 4, 2};
    const auto base = lf::fit(data.matrix, {}, {.seed = 7});
    const auto perm = lf::fit(data.matrix.permute_columns(order), {}, {.seed = 7});
    EXPECT_NEAR(perm.params.beta, base.params.beta, 1e-6);
    for (std::size_t c = 0; c < order.size(); ++c) {
      EXPECT_NEAR(perm.params.lfs[c].accuracy, base.params.lfs[order[c]].accuracy, 1e-6);
      EXPECT_NEAR(perm.params.lfs[c].propensity, base.params.lfs[order[c]].propensity, 1e-6);
    }
  }
}

TEST(Fit, PermutationEquivarianceWithEdge) {
  auto s = spec_with(4, 3000, 12);
  s.edges = {{0, 2, 0.9}};
  const auto data = lf::sample_dataset(s);
  // Column c of the permuted matrix is column order[c]; LF 0 -> 1, LF 2 -> 3.
  const std::vector<std::size_t> order = {1, 0, 3, 2};
  lf::DependencyStructure moved;
  moved.edges = {{1, 3}};
  const auto base = lf::fit(data.matrix, data.structure);
  const auto perm = lf::fit(data.matrix.permute_columns(order), moved);
  for (std::size_t c = 0; c < 4; ++c) EXPECT_NEAR(perm.params.lfs[c].accuracy, base.params.lfs[order[c]].accuracy, 1e-6);
}

TEST(Fit, RejectsBadConfig) {
  const auto data = lf::sample_dataset(spec_with(3, 100, 0));
  EXPECT_THROW(lf::fit(data.matrix, {}, {.max_iter = 0}), lf::Error);
  lf::FitConfig bad_beta;
  bad_beta.fixed_beta = 1.0;
  EXPECT_THROW(lf::fit(data.matrix, {}, bad_beta), lf::Error);
  lf::DependencyStructure not_matching;
  not_matching.edges = {{0, 1}, {1, 2}};
  EXPECT_THROW(lf::fit(data.matrix, not_matching), lf::Error);
}

TEST(LearnStructure, PlantedDuplicateIsTopEdge) {
  auto s = spec_with(6, 5000, 3);
  s.edges = {{1, 4, 1.0}};
  const auto st = lf::learn_structure(lf::sample_dataset(s).matrix, 0.05);
  ASSERT_FALSE(st.scores.empty());
  EXPECT_EQ(st.scores[0].j, 1u);
  EXPECT_EQ(st.scores[0].k, 4u);
  ASSERT_FALSE(st.edges.empty());
  EXPECT_EQ(st.edges[0], (std::pair<std::size_t, std::size_t>{1, 4}));
  EXPECT_EQ(st.scores.size(), 15u);
  st.validate(6);
}

TEST(LearnStructure, IndependentDataSelectsNothingMostly) {
  int clean = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) clean += lf::learn_structure(lf::sample_dataset(spec_with(6, 10000, 100 + seed)).matrix).edges.empty();
  EXPECT_GE(clean, 19);
}

TEST(LearnStructure, DegenerateInputs) {
  const auto one = lf::sample_dataset(spec_with(1, 100, 0));
  EXPECT_TRUE(lf::learn_structure(one.matrix).edges.empty());
  EXPECT_THROW(lf::learn_structure(one.matrix, 0.0), lf::Error);
  EXPECT_THROW(lf::learn_structure(one.matrix, -1.0), lf::Error);
}

TEST(EmitLabels, CountsAndExclusion) {
  const auto data = lf::sample_dataset(spec_with(7, 4000, 5));
  const auto r = lf::fit(data.matrix, {});
  std::vector<std::string> dev(data.matrix.row_ids().begin(), data.matrix.row_ids().begin() + 200);
  const auto labels = lf::emit_labels(r.params, {}, data.matrix, dev);
  ASSERT_EQ(labels.rows.size(), 4000u);
  EXPECT_EQ(labels.excluded_ids().size(), 200u);
  EXPECT_EQ(labels.excluded_ids(), dev);
  for (const auto& row : labels.rows) {
    EXPECT_GE(row.p, 0.0);
    EXPECT_LE(row.p, 1.0);
  }
  EXPECT_EQ(labels.model_version.size(), 64u);
}

TEST(EmitLabels, DeterministicExport) {
  const auto data = lf::sample_dataset(spec_with(5, 1000, 6));
  const auto a = lf::emit_labels(lf::fit(data.matrix, {}).params, {}, data.matrix, {"r0"});
  const auto b = lf::emit_labels(lf::fit(data.matrix, {}).params, {}, data.matrix, {"r0"});
  EXPECT_EQ(lf::prob_labels_to_jsonl(a), lf::prob_labels_to_jsonl(b));
  EXPECT_EQ(a.model_version, b.model_version);
}

TEST(ModelFile, JsonRoundTrip) {
  auto s = spec_with(5, 2000, 8);
  s.edges = {{0, 3, 0.9}};
  const auto data = lf::sample_dataset(s);
  const auto r = lf::fit(data.matrix, data.structure);
  const lf::ModelFile mf{r.params, data.structure, data.matrix.col_names(), "v1", {{"iterations", r.iterations}}};
  const auto j = lf::model_to_json(mf);
  const auto back = lf::model_from_json(nlohmann::json::parse(j.dump()));
  EXPECT_EQ(back.lfset_version, "v1");
  EXPECT_EQ(back.lf_names, mf.lf_names);
  EXPECT_EQ(back.structure.edges, mf.structure.edges);
  EXPECT_EQ(back.params.beta, r.params.beta);
  for (std::size_t j2 = 0; j2 < 5; ++j2) EXPECT_EQ(back.params.lfs[j2].accuracy, r.params.lfs[j2].accuracy);
  EXPECT_EQ(back.params.edges[0].joint, r.params.edges[0].joint);
  EXPECT_EQ(lf::model_to_json(back), j);
}

#include "labelforge/end_model.hpp"
#include "labelforge/error.hpp"
#include "labelforge/label_model.hpp"
#include "labelforge/synth.hpp"

#include "support.hpp"

#include <gmock/gmock.h>
#include <gtest/gtest.h>

#include <cmath>

namespace lf = labelforge;
using ::testing::HasSubstr;

namespace {

struct Gaussian {
  lf::FeatureMatrix x;
  std::vector<int> y;
};

Gaussian gaussian(std::size_t n, std::size_t d, std::uint64_t seed, double sigma = 1.0) {
  lf::Rng rng(seed);
  Gaussian g;
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) {
    ids.push_back("r" + std::to_string(i));
    g.y.push_back(rng.bernoulli(0.5) ? 1 : -1);
  }
  g.x = lf::gen_features(ids, g.y, d, sigma, seed + 1);
  return g;
}

lf::ProbLabels labels_from(const std::vector<std::string>& ids, const std::vector<double>& p) {
  lf::ProbLabels out;
  for (std::size_t i = 0; i < ids.size(); ++i) out.rows.push_back({ids[i], p[i], false});
  return out;
}

}  // namespace

TEST(NoiseAwareLoss, HardLabelIsLogistic) {
  for (double s : {-30.0, -2.0, 0.0, 0.7, 40.0}) {
    EXPECT_EQ(lf::noise_aware_loss(s, 1.0), lf::logistic_loss(s, 1));
    EXPECT_EQ(lf::noise_aware_loss(s, 0.0), lf::logistic_loss(s, -1));
  }
  EXPECT_NEAR(lf::noise_aware_loss(0.0, 0.5), 0.693147, 1e-6);
  EXPECT_NEAR(lf::noise_aware_loss(0.0, 0.5), std::log(2.0), 1e-15);
  EXPECT_TRUE(std::isfinite(lf::logistic_loss(-800.0, 1)));
  EXPECT_NEAR(lf::logistic_loss(-800.0, 1), 800.0, 1e-9);
}

TEST(NoiseAwareLoss, LinearInLabelConvexInScore) {
  lf::Rng rng(1);
  for (int t = 0; t < 200; ++t) {
    const double s = rng.uniform(-6, 6);
    const double p = rng.uniform();
    const double mix = p * lf::noise_aware_loss(s, 1.0) + (1 - p) * lf::noise_aware_loss(s, 0.0);
    EXPECT_NEAR(lf::noise_aware_loss(s, p), mix, 1e-12);
    const double h = 1e-3;
    EXPECT_GE(lf::noise_aware_loss(s + h, p) + lf::noise_aware_loss(s - h, p) - 2 * lf::noise_aware_loss(s, p), -1e-15);
    const double e = 1e-6;
    const double fd = (lf::noise_aware_loss(s + e, p) - lf::noise_aware_loss(s - e, p)) / (2 * e);
    EXPECT_NEAR(lf::noise_aware_loss_grad(s, p), fd, 1e-7);
  }
}

TEST(NoiseAwareLoss, ConstantPredictorMinimizer) {
  const double p = 0.8;
  double lo = -10, hi = 10;
  const double g = (std::sqrt(5.0) - 1) / 2;
  for (int it = 0; it < 200; ++it) {
    const double a = hi - g * (hi - lo), b = lo + g * (hi - lo);
    if (lf::noise_aware_loss(a, p) < lf::noise_aware_loss(b, p)) {
      hi = b;
    } else {
      lo = a;
    }
  }
  const double s_star = (lo + hi) / 2;
  EXPECT_NEAR(s_star, 1.3863, 1e-4);
  EXPECT_NEAR(s_star, std::log(p / (1 - p)), 1e-7);
}

TEST(Train, HardLabelsReproduceSupervisedWeights) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto g = gaussian(800, 6, 10 + seed);
    std::vector<double> p;
    for (int y : g.y) p.push_back(y > 0 ? 1.0 : 0.0);
    const lf::TrainConfig cfg{.seed = seed, .max_iter = 300};
    const auto na = lf::train_noise_aware(g.x, labels_from(g.x.ids, p), cfg);
    const auto sup = lf::train_supervised(g.x, g.y, cfg);
    EXPECT_EQ(na.iterations, sup.iterations);
    EXPECT_LE(lftest::max_abs_diff(na.weights, sup.weights), 1e-8);
    EXPECT_NEAR(na.bias, sup.bias, 1e-8);
  }
}

TEST(Train, UninformativeLabelsGiveZeroWeights) {
  const auto g = gaussian(300, 4, 3);
  const auto m = lf::train_noise_aware(g.x, labels_from(g.x.ids, std::vector<double>(300, 0.5)));
  for (double w : m.weights) EXPECT_NEAR(w, 0.0, 1e-12);
  EXPECT_NEAR(m.bias, 0.0, 1e-12);
}

TEST(Train, InformativeLabelsMatchGroundTruth) {
  const std::size_t n = 5000, d = 20;
  lf::SynthSpec spec;
  spec.m = 10;
  spec.n = n;
  spec.seed = 31;
  const auto data = lf::sample_dataset(spec);
  const auto fitres = lf::fit(data.matrix, {});
  const auto labels = lf::emit_labels(fitres.params, {}, data.matrix, {});
  const auto x = lf::gen_features(data.matrix.row_ids(), data.y_true, d, 1.0, 32);
  const auto test = gaussian(4000, d, 33);
  const auto dp = lf::train_noise_aware(x, labels);
  const auto fs = lf::train_supervised(x, data.y_true);
  const double auc_dp = lf::roc_auc(dp.scores(test.x), test.y);
  const double auc_fs = lf::roc_auc(fs.scores(test.x), test.y);
  EXPECT_NEAR(auc_dp, auc_fs, 0.02);
  EXPECT_GT(auc_fs, 0.9);
}

TEST(Train, ExcludedRowsAreDropped) {
  const auto g = gaussian(200, 3, 4);
  std::vector<double> p;
  for (int y : g.y) p.push_back(y > 0 ? 0.9 : 0.1);
  auto with_junk = labels_from(g.x.ids, p);
  auto keep = std::vector<bool>(200, true);
  for (std::size_t i = 0; i < 200; i += 4) {
    with_junk.rows[i].excluded = true;
    with_junk.rows[i].p = 1.0 - with_junk.rows[i].p;
    keep[i] = false;
  }
  lf::ProbLabels kept;
  for (std::size_t i = 0; i < 200; ++i) {
    if (keep[i]) kept.rows.push_back(with_junk.rows[i]);
  }
  const auto a = lf::train_noise_aware(g.x, with_junk);
  const auto b = lf::train_noise_aware(g.x.select(keep), kept);
  EXPECT_EQ(a.weights, b.weights);
}

TEST(Train, IdMismatchNamesFirstId) {
  const auto g = gaussian(10, 2, 5);
  auto labels = labels_from(g.x.ids, std::vector<double>(10, 0.5));
  labels.rows[3].doc_id = "zz";
  try {
    lf::train_noise_aware(g.x, labels);
    FAIL();
  } catch (const lf::Error& e) {
    EXPECT_THAT(e.what(), HasSubstr("\"r3\""));
    EXPECT_THAT(e.what(), HasSubstr("\"zz\""));
  }
  labels.rows.resize(10 - 1);
  labels.rows[3].doc_id = "r3";
  EXPECT_THAT([&] {
    try {
      lf::train_noise_aware(g.x, labels);
    } catch (const lf::Error& e) {
      return std::string(e.what());
    }
    return std::string();
  }(), HasSubstr("\"r9\""));
}

TEST(Train, RejectsBadInputs) {
  const auto g = gaussian(10, 2, 6);
  EXPECT_THROW(lf::train_supervised(g.x, std::vector<int>(10, 2)), lf::Error);
  EXPECT_THROW(lf::train_supervised(g.x, std::vector<int>(9, 1)), lf::Error);
  EXPECT_THROW(lf::train_supervised(g.x, g.y, {.max_iter = 0}), lf::Error);
  auto bad = g.x;
  bad.values[0] = NAN;
  EXPECT_THROW(lf::train_supervised(bad, g.y), lf::Error);
}

TEST(Train, LossDecreasesAndIsDeterministic) {
  const auto g = gaussian(500, 5, 7);
  const auto a = lf::train_supervised(g.x, g.y);
  const auto b = lf::train_supervised(g.x, g.y);
  EXPECT_EQ(a.weights, b.weights);
  EXPECT_LT(a.final_loss, std::log(2.0));
}

TEST(EndModelFile, JsonAndFeatureCsvRoundTrip) {
  const auto g = gaussian(50, 3, 8);
  const auto m = lf::train_supervised(g.x, g.y, {.seed = 4});
  const auto back = lf::end_model_from_json(nlohmann::json::parse(lf::end_model_to_json(m).dump()));
  EXPECT_EQ(back.weights, m.weights);
  EXPECT_EQ(back.bias, m.bias);
  EXPECT_EQ(back.seed, 4u);
  const auto x = lf::features_from_csv(lf::features_to_csv(g.x));
  EXPECT_EQ(x.ids, g.x.ids);
  EXPECT_EQ(x.values, g.x.values);
  EXPECT_THROW(lf::features_from_csv("id,f0\na,1\n"), lf::ParseError);
  EXPECT_THROW(lf::features_from_csv("doc_id,f0\na,1,2\n"), lf::ParseError);
  EXPECT_THROW(lf::features_from_csv("doc_id,f0\na,x\n"), lf::ParseError);
  EXPECT_THROW(lf::end_model_from_json({{"bias", 1}}), lf::ParseError);
}

TEST(RocAuc, Examples) {
  EXPECT_DOUBLE_EQ(lf::roc_auc(std::vector<double>{0.1, 0.4, 0.35, 0.8}, std::vector<int>{-1, -1, 1, 1}), 0.75);
  EXPECT_DOUBLE_EQ(lf::roc_auc(std::vector<double>{0.1, 0.2, 0.7, 0.9}, std::vector<int>{-1, -1, 1, 1}), 1.0);
  EXPECT_DOUBLE_EQ(lf::roc_auc(std::vector<double>(6, 0.3), std::vector<int>{-1, 1, -1, 1, 1, -1}), 0.5);
  EXPECT_THROW(lf::roc_auc(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 1}), lf::Error);
  EXPECT_THROW(lf::roc_auc(std::vector<double>{0.1}, std::vector<int>{1, -1}), lf::Error);
}

namespace {

double concordance_auc(const std::vector<double>& s, const std::vector<int>& y) {
  double num = 0, pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[i] > 0 && y[j] < 0) {
        num += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
        pairs += 1;
      }
    }
  }
  return num / pairs;
}

}  // namespace

TEST(RocAuc, MatchesPairwiseConcordance) {
  lf::Rng rng(21);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 2 + rng.below(60);
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = static_cast<double>(rng.below(10));
      y[i] = i == 0 ? 1 : (i == 1 ? -1 : (rng.bernoulli(0.4) ? 1 : -1));
    }
    EXPECT_NEAR(lf::roc_auc(s, y), concordance_auc(s, y), 1e-12);
  }
}

TEST(RocAuc, MonotoneTransformInvariance) {
  lf::Rng rng(22);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 20 + rng.below(200);
    std::vector<double> s(n), tr(n), neg(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = rng.normal();
      y[i] = i == 0 ? 1 : (i == 1 ? -1 : (rng.bernoulli(0.5) ? 1 : -1));
      tr[i] = std::exp(3.0 * s[i]) + 7.0;
      neg[i] = -s[i];
    }
    const double auc = lf::roc_auc(s, y);
    EXPECT_EQ(lf::roc_auc(tr, y), auc);
    EXPECT_NEAR(lf::roc_auc(neg, y), 1.0 - auc, 1e-12);
  }
}

TEST(RocCurve, EndpointsAndTies) {
  const auto pts = lf::roc_curve(std::vector<double>{0.9, 0.5, 0.5, 0.1}, std::vector<int>{1, 1, -1, -1});
  ASSERT_EQ(pts.size(), 4u);
  EXPECT_EQ(pts.front().fpr, 0.0);
  EXPECT_EQ(pts.front().tpr, 0.0);
  EXPECT_EQ(pts[1].tpr, 0.5);
  EXPECT_EQ(pts[2].fpr, 0.5);
  EXPECT_EQ(pts[2].tpr, 1.0);
  EXPECT_EQ(pts.back().fpr, 1.0);
  EXPECT_EQ(pts.back().tpr, 1.0);
}

TEST(DeLong, HandComputedSixPointInstance) {
  const std::vector<int> y = {1, 1, 1, -1, -1, -1};
  const std::vector<double> a = {0.9, 0.6, 0.35, 0.5, 0.35, 0.2};
  const std::vector<double> b = {0.7, 0.4, 0.8, 0.6, 0.1, 0.3};
  const auto c = lf::delong_components(a, b, y);
  const double tol = 1e-12;
  EXPECT_NEAR(c.auc[0], 5.0 / 6.0, tol);
  EXPECT_NEAR(c.auc[1], 8.0 / 9.0, tol);
  const std::vector<double> v10a = {1.0, 1.0, 0.5}, v10b = {1.0, 2.0 / 3.0, 1.0};
  const std::vector<double> v01a = {2.0 / 3.0, 5.0 / 6.0, 1.0}, v01b = {2.0 / 3.0, 1.0, 1.0};
  EXPECT_LE(lftest::max_abs_diff(c.v10[0], v10a), tol);
  EXPECT_LE(lftest::max_abs_diff(c.v10[1], v10b), tol);
  EXPECT_LE(lftest::max_abs_diff(c.v01[0], v01a), tol);
  EXPECT_LE(lftest::max_abs_diff(c.v01[1], v01b), tol);
  EXPECT_NEAR(c.s10[0][0], 1.0 / 12.0, tol);
  EXPECT_NEAR(c.s10[1][1], 1.0 / 27.0, tol);
  EXPECT_NEAR(c.s10[0][1], -1.0 / 36.0, tol);
  EXPECT_NEAR(c.s10[1][0], -1.0 / 36.0, tol);
  EXPECT_NEAR(c.s01[0][0], 1.0 / 36.0, tol);
  EXPECT_NEAR(c.s01[1][1], 1.0 / 27.0, tol);
  EXPECT_NEAR(c.s01[0][1], 1.0 / 36.0, tol);
  EXPECT_NEAR(c.cov[0][0], 1.0 / 27.0, tol);
  EXPECT_NEAR(c.cov[1][1], 2.0 / 81.0, tol);
  EXPECT_NEAR(c.cov[0][1], 0.0, tol);
  const auto r = lf::delong_test(a, b, y);
  EXPECT_NEAR(r.var_diff, 5.0 / 81.0, tol);
  EXPECT_NEAR(r.z, -1.0 / (2.0 * std::sqrt(5.0)), tol);
  EXPECT_NEAR(r.p, std::erfc(1.0 / (2.0 * std::sqrt(5.0)) / std::sqrt(2.0)), tol);
}

TEST(DeLong, IdenticalModelsGivePOne) {
  const std::vector<int> y = {1, -1, 1, -1, 1};
  const std::vector<double> s = {0.3, 0.1, 0.8, 0.4, 0.2};
  const auto r = lf::delong_test(s, s, y);
  EXPECT_EQ(r.p, 1.0);
  EXPECT_EQ(r.z, 0.0);
}

TEST(DeLong, ZeroVarianceWithUnequalAucsThrows) {
  // Model a orders every pair correctly and model b every pair wrongly,
  // so every V10/V01 entry is constant and the variance vanishes.
  const std::vector<int> y = {1, 1, -1, -1};
  EXPECT_THROW(lf::delong_test(std::vector<double>{0.9, 0.8, 0.1, 0.2}, std::vector<double>{0.1, 0.2, 0.9, 0.8}, y),
               lf::Error);
}

TEST(DeLong, Antisymmetric) {
  lf::Rng rng(30);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> a, b;
    std::vector<int> y;
    for (int i = 0; i < 60; ++i) {
      y.push_back(i % 2 ? 1 : -1);
      a.push_back(rng.normal() + 0.5 * y.back());
      b.push_back(rng.normal() + 0.3 * y.back());
    }
    const auto ab = lf::delong_test(a, b, y);
    const auto ba = lf::delong_test(b, a, y);
    EXPECT_NEAR(ab.z, -ba.z, 1e-12);
    EXPECT_NEAR(ab.p, ba.p, 1e-12);
  }
}

TEST(DeLong, NullCalibration) {
  int rejected = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    lf::Rng rng(40000 + seed);
    std::vector<double> a(500), b(500);
    std::vector<int> y(500);
    for (std::size_t i = 0; i < 500; ++i) {
      y[i] = rng.bernoulli(0.5) ? 1 : -1;
      a[i] = rng.normal();
      b[i] = rng.normal();
    }
    rejected += lf::delong_test(a, b, y).p < 0.05;
  }
  EXPECT_NEAR(rejected / 200.0, 0.05, 0.03);
}

TEST(DeLong, JsonFields) {
  const auto j = lf::delong_to_json(lf::delong_test(std::vector<double>{0.2, 0.9, 0.4}, std::vector<double>{0.3, 0.5, 0.1},
                                                    std::vector<int>{-1, 1, -1}));
  for (const char* k : {"auc_a", "auc_b", "z", "p", "var_diff", "n_pos", "n_neg"}) EXPECT_TRUE(j.contains(k)) << k;
}

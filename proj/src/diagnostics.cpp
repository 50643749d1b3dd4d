#include "labelforge/diagnostics.hpp"

#include "labelforge/error.hpp"
#include "labelforge/lf_dsl.hpp"
#include "labelforge/util.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace labelforge {

using nlohmann::json;

namespace {

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string md_num(double v, int digits = 4) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(digits);
  os << v;
  return os.str();
}

std::string md_opt(const std::optional<double>& v) { return v ? md_num(*v) : "-"; }

}  // namespace

// ---- LF report -------------------------------------------------------------

std::optional<double> LFReport::mean_discrepancy() const {
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& r : rows) {
    if (r.discrepancy) {
      sum += *r.discrepancy;
      ++count;
    }
  }
  if (count == 0) return std::nullopt;
  return sum / static_cast<double>(count);
}

json LFReport::to_json() const {
  json lfs = json::array();
  for (const auto& r : rows) {
    lfs.push_back({{"name", r.name},
                   {"coverage", r.coverage},
                   {"polarity", r.polarity},
                   {"conflict_mass", r.conflict_mass},
                   {"dev_accuracy", opt(r.dev_accuracy)},
                   {"dev_count", r.dev_count},
                   {"learned_accuracy", opt(r.learned_accuracy)},
                   {"learned_propensity", opt(r.learned_propensity)},
                   {"discrepancy", opt(r.discrepancy)},
                   {"below_chance", r.below_chance}});
  }
  json pairs = json::array();
  for (const auto& p : dependent_pairs) {
    pairs.push_back({{"j", col_names[p.j]}, {"k", col_names[p.k]}, {"p_value", p.p_value},
                     {"low_expected", p.low_expected}});
  }
  return {{"lfset_version", lfset_version},
          {"n", n},
          {"dev_size", dev_size},
          {"beta", opt(beta)},
          {"lfs", lfs},
          {"dependent_pairs", pairs},
          {"mean_discrepancy", opt(mean_discrepancy())}};
}

std::string LFReport::to_markdown() const {
  std::ostringstream os;
  os << "# LF report\n\n";
  os << "LFSet version: `" << lfset_version << "`  \n";
  os << "Rows: " << n << ", dev labels: " << dev_size;
  if (beta) os << ", class balance: " << md_num(*beta);
  os << "\n\n";
  os << "| LF | coverage | polarity | conflict | dev acc | dev n | learned acc | discrepancy | flag |\n";
  os << "|---|---|---|---|---|---|---|---|---|\n";
  for (const auto& r : rows) {
    std::string pol;
    for (int v : r.polarity) pol += (pol.empty() ? "" : ",") + std::string(v > 0 ? "+1" : "-1");
    os << "| " << r.name << " | " << md_num(r.coverage) << " | " << (pol.empty() ? "-" : pol) << " | "
       << md_num(r.conflict_mass) << " | " << md_opt(r.dev_accuracy) << " | " << r.dev_count << " | "
       << md_opt(r.learned_accuracy) << " | " << md_opt(r.discrepancy) << " | "
       << (r.below_chance ? "below chance" : "") << " |\n";
  }
  os << "\n## Dependent pairs\n\n";
  if (dependent_pairs.empty()) {
    os << "None.\n";
  } else {
    os << "| LF j | LF k | p-value | low expected count |\n|---|---|---|---|\n";
    for (const auto& p : dependent_pairs) {
      os << "| " << col_names[p.j] << " | " << col_names[p.k] << " | " << p.p_value << " | "
         << (p.low_expected ? "yes" : "no") << " |\n";
    }
  }
  return os.str();
}

LFReport lf_report(const LabelMatrix& matrix, const std::vector<DevLabel>& dev, const GenerativeParams* params) {
  const std::size_t n = matrix.n();
  const std::size_t m = matrix.m();
  if (params && params->lfs.size() != m) throw Error("lf_report: parameters do not match the matrix width");
  const LFStats stats = compute_stats(matrix, dev);

  std::vector<std::size_t> conflicted(m, 0);
  for (std::size_t i = 0; i < n; ++i) {
    bool pos = false, neg = false;
    for (const auto& e : matrix.row(i)) (e.vote > 0 ? pos : neg) = true;
    if (pos && neg) {
      for (const auto& e : matrix.row(i)) ++conflicted[e.col];
    }
  }

  LFReport report;
  report.lfset_version = matrix.lfset_version();
  report.n = n;
  report.dev_size = dev.size();
  report.col_names = matrix.col_names();
  if (params) report.beta = params->beta;
  for (std::size_t j = 0; j < m; ++j) {
    LFReportRow row;
    row.name = matrix.col_names()[j];
    row.coverage = stats.coverage[j];
    row.polarity = stats.polarity[j];
    row.conflict_mass = n ? static_cast<double>(conflicted[j]) / static_cast<double>(n) : 0.0;
    row.dev_accuracy = stats.dev_accuracy[j].value;
    row.dev_count = stats.dev_accuracy[j].count;
    if (params) {
      row.learned_accuracy = params->lfs[j].accuracy;
      row.learned_propensity = params->lfs[j].propensity;
    }
    if (row.dev_accuracy && row.learned_accuracy) row.discrepancy = std::abs(*row.dev_accuracy - *row.learned_accuracy);
    row.below_chance = (row.learned_accuracy && *row.learned_accuracy < 0.5) ||
                       (row.dev_accuracy && *row.dev_accuracy < 0.5);
    report.rows.push_back(std::move(row));
  }
  if (n >= 2 && m >= 2) report.dependent_pairs = dependent_pairs(pairwise_independence_test(matrix));
  return report;
}

// ---- scaling experiment ----------------------------------------------------

LogLogFit fit_log_log(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw Error("fit_log_log: x and y differ in length");
  if (x.size() < 2) throw Error("fit_log_log: need at least two points");
  std::vector<double> lx(x.size()), ly(y.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw Error("fit_log_log: values must be positive");
    lx[i] = std::log(x[i]);
    ly[i] = std::log(y[i]);
  }
  const double k = static_cast<double>(x.size());
  const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / k;
  const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / k;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  if (!(sxx > 0.0)) throw Error("fit_log_log: x values must not all be equal");
  LogLogFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  return f;
}

double label_agreement(const std::vector<double>& p, const std::vector<int>& y_true) {
  if (p.size() != y_true.size()) throw Error("label_agreement: length mismatch");
  if (p.empty()) throw Error("label_agreement: no rows");
  double hits = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0.5) {
      hits += 0.5;
    } else if ((p[i] > 0.5) == (y_true[i] > 0)) {
      hits += 1.0;
    }
  }
  return hits / static_cast<double>(p.size());
}

bool ScalingResult::means_non_increasing() const {
  for (std::size_t i = 1; i < mean_error.size(); ++i) {
    if (mean_error[i] > mean_error[i - 1]) return false;
  }
  return true;
}

json ScalingResult::to_json() const {
  json cells_json = json::array();
  for (const auto& c : cells) {
    cells_json.push_back({{"n", c.n}, {"seed", c.seed}, {"est_error", c.est_error}, {"agreement", c.agreement}});
  }
  json per_n = json::array();
  for (std::size_t g = 0; g < grid.size(); ++g) {
    per_n.push_back({{"n", grid[g]}, {"mean_est_error", mean_error[g]}, {"mean_agreement", mean_agreement[g]}});
  }
  return {{"grid", grid},
          {"cells", cells_json},
          {"per_n", per_n},
          {"slope", fit.slope},
          {"intercept", fit.intercept},
          {"means_non_increasing", means_non_increasing()}};
}

std::string ScalingResult::to_csv() const {
  std::string out = "n,seed,est_error,agreement\n";
  for (const auto& c : cells) {
    out += std::to_string(c.n) + "," + std::to_string(c.seed) + "," + format_double(c.est_error) + "," +
           format_double(c.agreement) + "\n";
  }
  return out;
}

std::string ScalingResult::to_markdown() const {
  std::ostringstream os;
  os << "# Scaling experiment\n\n";
  os << "Log-log slope of mean estimation error: " << md_num(fit.slope) << " (intercept " << md_num(fit.intercept)
     << ")\n\n";
  os << "| n | mean est. error | mean agreement |\n|---|---|---|\n";
  for (std::size_t g = 0; g < grid.size(); ++g) {
    os << "| " << grid[g] << " | " << md_num(mean_error[g], 5) << " | " << md_num(mean_agreement[g]) << " |\n";
  }
  os << "\nPer-n means non-increasing: " << (means_non_increasing() ? "yes" : "no") << "\n";
  return os.str();
}

ScalingResult scaling_experiment(const SynthSpec& spec_template, const std::vector<std::size_t>& n_grid,
                                 const std::vector<std::uint64_t>& seeds, const FitConfig& fit_config) {
  if (n_grid.size() < 4) throw Error("scaling_experiment: the n grid needs at least 4 points");
  for (std::size_t g = 1; g < n_grid.size(); ++g) {
    if (n_grid[g] <= n_grid[g - 1]) throw Error("scaling_experiment: the n grid must be strictly increasing");
  }
  if (seeds.size() < 5) throw Error("scaling_experiment: at least 5 seeds required");

  std::vector<std::uint64_t> sorted_seeds = seeds;
  std::sort(sorted_seeds.begin(), sorted_seeds.end());
  if (std::adjacent_find(sorted_seeds.begin(), sorted_seeds.end()) != sorted_seeds.end()) {
    throw Error("scaling_experiment: seeds must be distinct");
  }

  ScalingResult result;
  result.grid = n_grid;
  for (std::size_t n : n_grid) {
    double err_sum = 0.0, agree_sum = 0.0;
    for (std::uint64_t seed : sorted_seeds) {
      SynthSpec spec = spec_template;
      spec.n = n;
      spec.seed = seed;
      spec.data_seed = (seed * 0x100000001b3ULL) ^ (static_cast<std::uint64_t>(n) * 0x9e3779b97f4a7c15ULL);
      const SynthDataset ds = sample_dataset(spec);
      FitConfig cfg = fit_config;
      cfg.seed = seed;
      const FitResult fr = fit(ds.matrix, ds.structure, cfg);

      ScalingCell cell;
      cell.n = n;
      cell.seed = seed;
      for (std::size_t j = 0; j < spec.m; ++j) {
        cell.est_error += std::abs(fr.params.lfs[j].accuracy - ds.truth.lfs[j].accuracy);
      }
      cell.est_error /= static_cast<double>(spec.m);
      const ProbLabels labels = emit_labels(fr.params, ds.structure, ds.matrix, {});
      cell.agreement = label_agreement(labels.probabilities(), ds.y_true);
      err_sum += cell.est_error;
      agree_sum += cell.agreement;
      result.cells.push_back(cell);
    }
    result.mean_error.push_back(err_sum / static_cast<double>(sorted_seeds.size()));
    result.mean_agreement.push_back(agree_sum / static_cast<double>(sorted_seeds.size()));
  }
  std::vector<double> xs(n_grid.begin(), n_grid.end());
  result.fit = fit_log_log(xs, result.mean_error);
  return result;
}

// ---- weak vs full supervision ----------------------------------------------

const ArmSummary& ComparisonReport::arm(const std::string& name) const {
  for (const auto& a : arms) {
    if (a.name == name) return a;
  }
  throw Error("comparison report has no arm \"" + name + "\"");
}

json ComparisonReport::to_json() const {
  json arms_json = json::array();
  for (const auto& a : arms) {
    json roc = json::array();
    for (const auto& pt : a.median_roc) roc.push_back({pt.fpr, pt.tpr});
    arms_json.push_back({{"name", a.name},
                         {"auc", a.auc},
                         {"label_agreement", a.label_agreement},
                         {"auc_mean", a.mean},
                         {"auc_min", a.min},
                         {"auc_max", a.max},
                         {"auc_mean_ci95", {a.mean - a.ci_half_width, a.mean + a.ci_half_width}},
                         {"median_seed", seeds[a.median_index]},
                         {"median_auc", a.auc[a.median_index]},
                         {"median_roc", roc}});
  }
  json tests = json::array();
  for (const auto& c : delong) {
    json row = delong_to_json(c.result);
    row["comparison"] = c.label;
    tests.push_back(row);
  }
  return {{"seeds", seeds}, {"arms", arms_json}, {"delong", tests}};
}

std::string ComparisonReport::to_markdown() const {
  std::ostringstream os;
  os << "# Supervision comparison\n\n";
  os << "| arm | AUC mean | AUC min | AUC max | mean +- 1.96 SE | median AUC | mean label agreement |\n";
  os << "|---|---|---|---|---|---|---|\n";
  for (const auto& a : arms) {
    const double agree =
        std::accumulate(a.label_agreement.begin(), a.label_agreement.end(), 0.0) / static_cast<double>(a.label_agreement.size());
    os << "| " << a.name << " | " << md_num(a.mean) << " | " << md_num(a.min) << " | " << md_num(a.max) << " | ["
       << md_num(a.mean - a.ci_half_width) << ", " << md_num(a.mean + a.ci_half_width) << "] | "
       << md_num(a.auc[a.median_index]) << " | " << md_num(agree) << " |\n";
  }
  os << "\n## DeLong tests between median models\n\n| Comparison | p-value |\n|---|---|\n";
  for (const auto& c : delong) os << "| " << c.label << " | " << md_num(c.result.p) << " |\n";
  return os.str();
}

ComparisonReport supervision_comparison(const std::function<ComparisonTrial(std::uint64_t)>& make_trial,
                                        const FeatureMatrix& test_features, const std::vector<int>& test_y,
                                        const std::vector<std::uint64_t>& seeds, const TrainConfig& train_config) {
  if (seeds.empty()) throw Error("supervision_comparison: at least one seed required");
  if (test_features.n() != test_y.size()) throw Error("supervision_comparison: test labels do not match features");

  ComparisonReport report;
  report.seeds = seeds;
  const std::vector<std::string> names = {"FS", "DP", "MV"};
  std::vector<std::vector<LinearEndModel>> models(names.size());
  report.arms.resize(names.size());
  for (std::size_t a = 0; a < names.size(); ++a) report.arms[a].name = names[a];

  for (std::uint64_t seed : seeds) {
    const ComparisonTrial trial = make_trial(seed);
    const auto& x = trial.features;
    if (trial.y_true.size() != x.n() || trial.dp.size() != x.n() || trial.mv.size() != x.n()) {
      throw Error("supervision_comparison: trial arrays do not match the feature rows");
    }
    TrainConfig cfg = train_config;
    cfg.seed = seed;
    auto soft = [&](const std::vector<double>& p) {
      ProbLabels labels;
      for (std::size_t i = 0; i < x.n(); ++i) labels.rows.push_back({x.ids[i], p[i], false});
      return labels;
    };
    models[0].push_back(train_supervised(x, trial.y_true, cfg));
    models[1].push_back(train_noise_aware(x, soft(trial.dp), cfg));
    models[2].push_back(train_noise_aware(x, soft(trial.mv), cfg));

    std::vector<double> truth01(x.n());
    for (std::size_t i = 0; i < x.n(); ++i) truth01[i] = trial.y_true[i] > 0 ? 1.0 : 0.0;
    report.arms[0].label_agreement.push_back(label_agreement(truth01, trial.y_true));
    report.arms[1].label_agreement.push_back(label_agreement(trial.dp, trial.y_true));
    report.arms[2].label_agreement.push_back(label_agreement(trial.mv, trial.y_true));
  }

  for (std::size_t a = 0; a < names.size(); ++a) {
    auto& arm = report.arms[a];
    for (const auto& model : models[a]) arm.auc.push_back(roc_auc(model.scores(test_features), test_y));
    const double k = static_cast<double>(arm.auc.size());
    arm.mean = std::accumulate(arm.auc.begin(), arm.auc.end(), 0.0) / k;
    arm.min = *std::min_element(arm.auc.begin(), arm.auc.end());
    arm.max = *std::max_element(arm.auc.begin(), arm.auc.end());
    if (arm.auc.size() > 1) {
      double ss = 0.0;
      for (double v : arm.auc) ss += (v - arm.mean) * (v - arm.mean);
      arm.ci_half_width = 1.96 * std::sqrt(ss / (k - 1.0)) / std::sqrt(k);
    }
    std::vector<std::size_t> order(arm.auc.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) { return arm.auc[l] < arm.auc[r]; });
    arm.median_index = order[(order.size() - 1) / 2];
    arm.median_scores = models[a][arm.median_index].scores(test_features);
    arm.median_roc = roc_curve(arm.median_scores, test_y);
  }

  auto compare = [&](std::size_t l, std::size_t r) {
    report.delong.push_back({names[l] + " vs. " + names[r],
                             delong_test(report.arms[l].median_scores, report.arms[r].median_scores, test_y)});
  };
  compare(0, 1);
  compare(0, 2);
  compare(1, 2);
  return report;
}

namespace {

constexpr std::uint64_t kFeatureStream = 0xc2b2ae3d27d4eb4fULL;

std::pair<FeatureMatrix, std::vector<int>> make_test_set(const FeatureOptions& f) {
  Rng rng(f.test_seed);
  std::vector<std::string> ids(f.n_test);
  std::vector<int> y(f.n_test);
  for (std::size_t i = 0; i < f.n_test; ++i) {
    ids[i] = "t" + std::to_string(i);
    y[i] = rng.bernoulli(f.test_beta) ? 1 : -1;
  }
  return {gen_features(ids, y, f.d, f.sigma, f.test_seed ^ kFeatureStream, f.mu), y};
}

}  // namespace

ComparisonReport supervision_comparison_synth(const SynthSpec& spec_template, const std::vector<std::uint64_t>& seeds,
                                              const FeatureOptions& features, const FitConfig& fit_config,
                                              const TrainConfig& train_config) {
  auto [test_x, test_y] = make_test_set(features);
  auto trial = [&](std::uint64_t seed) {
    SynthSpec spec = spec_template;
    spec.seed = seed;
    spec.data_seed.reset();
    const SynthDataset ds = sample_dataset(spec);
    FitConfig cfg = fit_config;
    cfg.seed = seed;
    const FitResult fr = fit(ds.matrix, ds.structure, cfg);
    ComparisonTrial t;
    t.features = gen_features(ds.matrix.row_ids(), ds.y_true, features.d, features.sigma, seed ^ kFeatureStream,
                              features.mu);
    t.y_true = ds.y_true;
    t.dp = emit_labels(fr.params, ds.structure, ds.matrix, {}).probabilities();
    t.mv = majority_vote(ds.matrix).probabilities();
    return t;
  };
  return supervision_comparison(trial, test_x, test_y, seeds, train_config);
}

ComparisonReport supervision_comparison_text(std::size_t n, const LFSet& lfset, const std::vector<std::uint64_t>& seeds,
                                             const FeatureOptions& features, const FitConfig& fit_config,
                                             const TrainConfig& train_config,
                                             const TextCorpusOptions& corpus_options) {
  auto [test_x, test_y] = make_test_set(features);
  auto trial = [&](std::uint64_t seed) {
    const TextCorpus tc = gen_text_corpus(n, seed, corpus_options);
    const LabelMatrix matrix = apply_all(lfset, tc.corpus);
    FitConfig cfg = fit_config;
    cfg.seed = seed;
    std::vector<std::string> dev_ids;
    if (!tc.dev.empty()) {
      double pos = 0.0;
      for (const auto& d : tc.dev) {
        dev_ids.push_back(d.doc_id);
        pos += d.y > 0 ? 1.0 : 0.0;
      }
      if (!cfg.init_beta && !cfg.fixed_beta) {
        cfg.fixed_beta = std::clamp(pos / static_cast<double>(tc.dev.size()), 0.01, 0.99);
      }
    }
    const DependencyStructure independent;
    const FitResult fr = fit(matrix, independent, cfg);
    const ProbLabels dp = emit_labels(fr.params, independent, matrix, dev_ids);
    const ProbLabels mv = majority_vote(matrix);

    std::vector<bool> keep(n);
    for (std::size_t i = 0; i < n; ++i) keep[i] = !dp.rows[i].excluded;
    const FeatureMatrix all =
        gen_features(matrix.row_ids(), tc.y_true, features.d, features.sigma, seed ^ kFeatureStream, features.mu);
    ComparisonTrial t;
    t.features = all.select(keep);
    for (std::size_t i = 0; i < n; ++i) {
      if (!keep[i]) continue;
      t.y_true.push_back(tc.y_true[i]);
      t.dp.push_back(dp.rows[i].p);
      t.mv.push_back(mv.rows[i].p);
    }
    return t;
  };
  return supervision_comparison(trial, test_x, test_y, seeds, train_config);
}

}  // namespace labelforge

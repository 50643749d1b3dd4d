#pragma once

#include "labelforge/end_model.hpp"
#include "labelforge/label_matrix.hpp"
#include "labelforge/label_model.hpp"
#include "labelforge/lf_dsl.hpp"
#include "labelforge/synth.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace labelforge {

// ---- LF report -------------------------------------------------------------

struct LFReportRow {
  std::string name;
  double coverage = 0.0;
  std::vector<int> polarity;
  /// Fraction of rows where this LF votes and another LF votes the opposite.
  double conflict_mass = 0.0;
  std::optional<double> dev_accuracy;
  std::size_t dev_count = 0;
  std::optional<double> learned_accuracy;
  std::optional<double> learned_propensity;
  std::optional<double> discrepancy;  ///< |dev - learned|
  bool below_chance = false;
};

struct LFReport {
  std::string lfset_version;
  std::size_t n = 0;
  std::size_t dev_size = 0;
  std::optional<double> beta;
  std::vector<LFReportRow> rows;
  std::vector<DependentPair> dependent_pairs;
  std::vector<std::string> col_names;

  /// Mean discrepancy over LFs that have both accuracies, if any.
  std::optional<double> mean_discrepancy() const;
  nlohmann::json to_json() const;
  std::string to_markdown() const;
};

/// Per-LF table with above-chance and dependence flags. `params` is optional.
LFReport lf_report(const LabelMatrix& matrix, const std::vector<DevLabel>& dev, const GenerativeParams* params);

// ---- scaling experiment ----------------------------------------------------

struct ScalingCell {
  std::size_t n = 0;
  std::uint64_t seed = 0;
  double est_error = 0.0;  ///< mean |a_hat - a| over LFs
  double agreement = 0.0;  ///< thresholded posterior vs y_true
};

struct LogLogFit {
  double slope = 0.0;
  double intercept = 0.0;
};

/// Least-squares line through (log x, log y).
LogLogFit fit_log_log(const std::vector<double>& x, const std::vector<double>& y);

struct ScalingResult {
  std::vector<std::size_t> grid;
  std::vector<ScalingCell> cells;  ///< sorted by (n, seed)
  std::vector<double> mean_error;
  std::vector<double> mean_agreement;
  LogLogFit fit;

  bool means_non_increasing() const;
  nlohmann::json to_json() const;
  std::string to_csv() const;
  std::string to_markdown() const;
};

ScalingResult scaling_experiment(const SynthSpec& spec_template, const std::vector<std::size_t>& n_grid,
                                 const std::vector<std::uint64_t>& seeds, const FitConfig& fit_config = {});

/// Agreement of P(y=+1) with hard labels; an exact 0.5 earns half credit.
double label_agreement(const std::vector<double>& p, const std::vector<int>& y_true);

// ---- weak vs full supervision ----------------------------------------------

/// One seed's training data for the three supervision arms.
struct ComparisonTrial {
  FeatureMatrix features;      ///< training rows (dev rows already removed)
  std::vector<int> y_true;     ///< ground truth for `features`
  std::vector<double> dp;      ///< label-model posteriors for `features`
  std::vector<double> mv;      ///< majority-vote labels for `features`
};

struct ArmSummary {
  std::string name;
  std::vector<double> auc;  ///< per seed, in seed order
  std::vector<double> label_agreement;
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
  double ci_half_width = 0.0;  ///< 1.96 * standard error over seeds
  std::size_t median_index = 0;
  std::vector<RocPoint> median_roc;
  std::vector<double> median_scores;
};

struct ArmComparison {
  std::string label;  ///< e.g. "FS vs. DP"
  DeLongResult result;
};

struct ComparisonReport {
  std::vector<std::uint64_t> seeds;
  std::vector<ArmSummary> arms;  ///< FS, DP, MV
  std::vector<ArmComparison> delong;

  const ArmSummary& arm(const std::string& name) const;
  nlohmann::json to_json() const;
  std::string to_markdown() const;
};

/// Trains the FS (ground truth), DP (posteriors) and MV arms for every seed
/// and compares the median-AUC models on a shared test set.
ComparisonReport supervision_comparison(const std::function<ComparisonTrial(std::uint64_t)>& make_trial,
                                        const FeatureMatrix& test_features, const std::vector<int>& test_y,
                                        const std::vector<std::uint64_t>& seeds, const TrainConfig& train_config = {});

struct FeatureOptions {
  std::size_t d = 20;
  double sigma = 1.0;
  double mu = 0.3;
  std::size_t n_test = 2000;
  std::uint64_t test_seed = 7777;
  double test_beta = 0.5;
};

/// Comparison on `sample_dataset` draws, one per seed.
ComparisonReport supervision_comparison_synth(const SynthSpec& spec_template, const std::vector<std::uint64_t>& seeds,
                                              const FeatureOptions& features = {}, const FitConfig& fit_config = {},
                                              const TrainConfig& train_config = {});

/// Comparison on generated text corpora labeled by `lfset`, one per seed.
/// Unless `fit_config` sets the class balance, it is pinned to the dev-set
/// positive rate: single-polarity LFs otherwise admit a degenerate optimum
/// with the balance at 0 or 1.
ComparisonReport supervision_comparison_text(std::size_t n, const LFSet& lfset, const std::vector<std::uint64_t>& seeds,
                                             const FeatureOptions& features = {}, const FitConfig& fit_config = {},
                                             const TrainConfig& train_config = {},
                                             const TextCorpusOptions& corpus_options = {});

}  // namespace labelforge

#pragma once

#include "labelforge/label_matrix.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace labelforge {

/// n x d target-modality features, row-major, rows keyed by document id.
struct FeatureMatrix {
  std::vector<std::string> ids;
  std::size_t d = 0;
  std::vector<double> values;

  std::size_t n() const noexcept { return ids.size(); }
  std::span<const double> row(std::size_t i) const { return {values.data() + i * d, d}; }
  /// Throws on a shape mismatch or a non-finite value.
  void validate() const;
  /// Rows `keep[i] == true`, in order.
  FeatureMatrix select(const std::vector<bool>& keep) const;
};

/// CSV with header `doc_id,f0,f1,...`.
std::string features_to_csv(const FeatureMatrix& x);
FeatureMatrix features_from_csv(std::string_view csv);

/// log(1 + exp(-y s)), computed without overflow.
double logistic_loss(double score, int y);

/// Expected logistic loss when y = +1 with probability `p`.
double noise_aware_loss(double score, double p);
/// d/ds of noise_aware_loss, equal to sigmoid(s) - p.
double noise_aware_loss_grad(double score, double p);

struct TrainConfig {
  std::uint64_t seed = 0;
  int max_iter = 500;
  double tol = 1e-9;
  double step = 1.0;
  double l2 = 1e-4;
};

struct LinearEndModel {
  std::vector<double> weights;
  double bias = 0.0;
  std::uint64_t seed = 0;
  int iterations = 0;
  double final_loss = 0.0;
  bool converged = false;

  double score(std::span<const double> x) const;
  std::vector<double> scores(const FeatureMatrix& x) const;
};

nlohmann::json end_model_to_json(const LinearEndModel& model);
LinearEndModel end_model_from_json(const nlohmann::json& doc);

/// Minimizes mean noise-aware loss + l2/2 |w|^2 by full-batch gradient
/// descent with step halving. Rows flagged excluded are dropped; label ids
/// must match the feature ids row for row.
LinearEndModel train_noise_aware(const FeatureMatrix& x, const ProbLabels& labels, const TrainConfig& config = {});

/// Standard logistic regression on hard labels in {-1, +1}, same schedule.
LinearEndModel train_supervised(const FeatureMatrix& x, std::span<const int> y, const TrainConfig& config = {});

/// Mann-Whitney AUC; ties between a positive and a negative count half.
double roc_auc(std::span<const double> scores, std::span<const int> labels);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

/// ROC curve vertices from (0,0) to (1,1), tied scores collapsed.
std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const int> labels);

/// Structural components of the DeLong estimator for two paired score sets.
struct DeLongComponents {
  std::array<std::vector<double>, 2> v10;  ///< per positive, per model
  std::array<std::vector<double>, 2> v01;  ///< per negative, per model
  std::array<double, 2> auc{};
  std::array<std::array<double, 2>, 2> s10{};
  std::array<std::array<double, 2>, 2> s01{};
  /// Covariance of (auc_a, auc_b): s10 / n_pos + s01 / n_neg.
  std::array<std::array<double, 2>, 2> cov{};
};

DeLongComponents delong_components(std::span<const double> scores_a, std::span<const double> scores_b,
                                   std::span<const int> labels);

struct DeLongResult {
  double auc_a = 0.0;
  double auc_b = 0.0;
  double z = 0.0;
  double p = 1.0;  ///< two-tailed
  double var_diff = 0.0;
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;
};

/// Paired two-tailed test of equal AUC.
DeLongResult delong_test(std::span<const double> scores_a, std::span<const double> scores_b,
                         std::span<const int> labels);

nlohmann::json delong_to_json(const DeLongResult& r);

}  // namespace labelforge
